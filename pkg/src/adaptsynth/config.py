"""Run configuration, family-spec parsing and report (de)serialization."""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .adapters import ARITH_OPS, AdapterFamily, AdapterSpec
from .cegis import CegisConfig, SynthesisResult
from .equiv import EquivPolicy
from .interp import InputVector
from .solver import SOLVER_ENV, TREAT_AS_UNSAT

# named configurations of the counting command
PRESETS = {
    # 13 -> 13 arguments, substitution plus type conversion, any 32-bit
    # constant, each target argument used at most once, 8 return variants
    "wide-typeconv": dict(kind="typeconv", allow_ret=True, distinct_args=True, const_count=2 ** 32),
    # argument permutation plus return substitution
    "arg-perm": dict(kind="argsub", allow_ret=True, distinct_args=True),
}


def parse_int(text: str) -> int:
    text = text.strip().replace("_", "")
    m = re.fullmatch(r"(-?\d+)\^(\d+)", text)
    if m:
        return int(m.group(1)) ** int(m.group(2))
    return int(text, 0)


def parse_constants(text: str | None) -> tuple[tuple[int, ...], int | None]:
    """'0,255' | '0..11' | 'count:2^32' | '' -> (explicit list, count override)."""
    if text is None or not text.strip():
        return (), None
    text = text.strip()
    if text.startswith("count:"):
        return (), parse_int(text[6:])
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(parse_int(lo), parse_int(hi) + 1))
        elif part:
            out.append(parse_int(part))
    return tuple(out), None


def parse_family(spec: str, constants: str | None = None, depth: int | None = None,
                 ops: str | None = None, mem_sizes: str | None = None,
                 mem_slots: int | None = None) -> AdapterFamily:
    """Family from a spec such as ``argsub``, ``typeconv+ret+distinct`` or a preset name."""
    spec = spec.strip()
    kw: dict = {}
    if spec in PRESETS:
        kw.update(PRESETS[spec])
    else:
        kind, *flags = spec.split("+")
        aliases = {"argsubtypeconv": "typeconv", "argsub-typeconv": "typeconv", "mem": "memsub"}
        kw["kind"] = aliases.get(kind.lower(), kind.lower())
        for flag in flags:
            if flag == "ret":
                kw["allow_ret"] = True
            elif flag == "distinct":
                kw["distinct_args"] = True
            elif flag == "anyn":
                kw["pow2"] = False
            else:
                raise ValueError(f"unknown family flag {flag!r}")
    consts, count = parse_constants(constants)
    if consts:
        kw["constants"] = consts
    if count is not None:
        kw["const_count"] = count
    if depth is not None:
        kw["depth"] = depth
    if ops:
        kw["ops"] = tuple(o.strip() for o in ops.split(",") if o.strip())
        unknown = set(kw["ops"]) - set(ARITH_OPS)
        if unknown:
            raise ValueError(f"unknown ops {sorted(unknown)}")
    if mem_sizes:
        kw["mem_sizes"] = tuple(int(x) for x in mem_sizes.split(","))
    if mem_slots is not None:
        kw["mem_slots"] = mem_slots
    return AdapterFamily(**kw)


def family_to_json(fam: AdapterFamily) -> dict:
    return {"kind": fam.kind, "constants": list(fam.constants), "allow_ret": fam.allow_ret,
            "depth": fam.depth, "ops": list(fam.ops), "distinct_args": fam.distinct_args,
            "const_count": fam.const_count, "mem_slots": fam.mem_slots,
            "mem_sizes": list(fam.mem_sizes), "mem_align": fam.mem_align, "pow2": fam.pow2}


def family_from_json(d: dict) -> AdapterFamily:
    d = dict(d)
    for k in ("constants", "ops", "mem_sizes"):
        if k in d:
            d[k] = tuple(d[k])
    return AdapterFamily(**d)


@dataclass(frozen=True)
class RunConfig:
    family: AdapterFamily = field(default_factory=AdapterFamily)
    backend: str = "symbolic"
    timeout_secs: float = 120.0
    solver_timeout_secs: float = 5.0
    solver_policy: str = TREAT_AS_UNSAT
    solver_backend: str = "auto"
    solver_path: str | None = None
    step_cap: int = 4000
    path_cap: int = 100_000
    seed: int = 0
    fault_policy: str = "strict"
    memory_mode: str = "final-state"
    identity_start: bool = False
    report: str | None = None

    def __post_init__(self):
        if min(self.timeout_secs, self.solver_timeout_secs, self.step_cap, self.path_cap) <= 0:
            raise ValueError("caps and timeouts must be positive")

    @property
    def policy(self) -> EquivPolicy:
        return EquivPolicy(self.fault_policy, self.memory_mode)

    def cegis(self, seed: int | None = None) -> CegisConfig:
        import os
        return CegisConfig(backend=self.backend, timeout_secs=self.timeout_secs,
                           solver_timeout_secs=self.solver_timeout_secs,
                           solver_policy=self.solver_policy, solver_backend=self.solver_backend,
                           solver_path=os.environ.get(SOLVER_ENV) or self.solver_path,
                           step_cap=self.step_cap, path_cap=self.path_cap,
                           seed=self.seed if seed is None else seed, policy=self.policy,
                           identity_start=self.identity_start)

    def with_(self, **kw) -> RunConfig:
        return replace(self, **kw)


def make_report(target, inner, result: SynthesisResult, cfg: RunConfig,
                target_ref: str = "", inner_ref: str = "") -> dict:
    from .ir import print_function
    s = result.state.stats
    return {
        "target": target.name, "inner": inner.name,
        "target_ref": target_ref, "inner_ref": inner_ref,
        "target_source": print_function(target), "inner_source": print_function(inner),
        "verdict": result.verdict,
        "adapter": result.adapter.to_json() if result.adapter else None,
        "adapter_text": result.adapter.describe() if result.adapter else None,
        "iterations": s.iterations,
        "trail": [t.to_json() for t in result.trail],
        "timings": {"total": s.total_secs, "solver": s.solver.seconds,
                    "check": s.check_secs, "adapter_search_total": s.search_secs,
                    "adapter_search_last": s.search_last_secs},
        "coverage": {"truncated": s.incomplete_check, "coerced_verdicts": s.solver.coerced,
                     "replay_counterexamples": s.replay_counterexamples},
        "config": {"family": family_to_json(cfg.family), "backend": cfg.backend,
                   "fault_policy": cfg.fault_policy, "memory_mode": cfg.memory_mode,
                   "step_cap": cfg.step_cap, "seed": cfg.seed},
        "error": result.error,
    }


def report_adapter(report: dict) -> AdapterSpec:
    return AdapterSpec.from_json(report["adapter"])


def report_trail(report: dict) -> list[InputVector]:
    return [InputVector.from_json(t) for t in report.get("trail", [])]


_NUM = {"type": "number", "minimum": 0}
_ADAPTER = {
    "type": "object",
    "required": ["args", "mem", "ret"],
    "properties": {
        "args": {"type": "array", "items": {"type": "object", "required": ["kind"]}},
        "mem": {"type": "array"},
        "ret": {"type": "object", "required": ["kind"]},
    },
}

# JSON schema of the dict built by make_report; adapter present iff Adapted
REPORT_SCHEMA = {
    "type": "object",
    "required": ["target", "inner", "target_source", "inner_source", "verdict", "adapter",
                 "iterations", "trail", "timings", "coverage", "config"],
    "properties": {
        "target": {"type": "string"},
        "inner": {"type": "string"},
        "verdict": {"enum": ["Adapted", "NotSubstitutable", "Timeout", "Failed"]},
        "adapter": {"oneOf": [_ADAPTER, {"type": "null"}]},
        "iterations": {"type": "integer", "minimum": 0},
        "trail": {"type": "array", "items": {
            "type": "object", "required": ["args", "regions"],
            "properties": {"args": {"type": "array", "items": {"type": "integer"}}}}},
        "timings": {"type": "object",
                    "required": ["total", "solver", "adapter_search_total", "adapter_search_last"],
                    "additionalProperties": _NUM},
        "coverage": {"type": "object", "required": ["truncated", "coerced_verdicts"]},
        "config": {"type": "object", "required": ["family", "backend", "fault_policy", "step_cap"]},
    },
    "if": {"properties": {"verdict": {"const": "Adapted"}}},
    "then": {"properties": {"adapter": _ADAPTER}},
    "else": {"properties": {"adapter": {"type": "null"}}},
}
