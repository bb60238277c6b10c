"""Counterexample-guided adapter synthesis.

The loop alternates ``check_adapter`` (symbolic inputs, concrete adapter)
with an adapter search over the accumulated tests, either symbolic
(``synthesize_adapter_symbolic``: concrete tests, selector variables) or by
walking a seeded enumeration of the family (``synthesize_adapter_concrete``).
"""
from __future__ import annotations

import random
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, Sequence

from . import term as T
from .adapters import (AdapterFamily, AdapterSpec, FamilySpace, adapt_terms, apply_concrete,
                       concrete_memory_pairs, default_adapter, encode_symbolic, permutation)
from .equiv import EquivPolicy, equivalent_concrete, mismatch_condition
from .interp import LIMIT, RETURNED, ExecLimits, ExecutionOutcome, InputVector, execute
from .ir import FunctionDef, check
from .solver import (TREAT_AS_UNSAT, ExternalSolverFailure, Sat, SolveBudget, Solver,
                     SolverStats)
from .symx import (ExploreLimits, ExploreStats, Explorer, SymOutcome, concrete_region,
                   run_harness, symbolic_args, symbolic_region)

ADAPTED = "Adapted"
NOT_SUBSTITUTABLE = "NotSubstitutable"
TIMEOUT = "Timeout"
FAILED = "Failed"
BACKENDS = ("symbolic", "concrete")


class SynthesisTimeout(Exception):
    pass


class InvariantViolation(AssertionError):
    """The tool contradicted itself (e.g. a search result fails replay)."""


@dataclass(frozen=True)
class CegisConfig:
    backend: str = "symbolic"
    timeout_secs: float = 120.0
    solver_timeout_secs: float = 5.0
    solver_policy: str = TREAT_AS_UNSAT
    solver_backend: str = "auto"
    solver_path: str | None = None
    step_cap: int = 4000
    path_cap: int = 100_000
    seed: int = 0
    policy: EquivPolicy = EquivPolicy()
    identity_start: bool = False
    replay_random: int = 1000
    max_address_fork: int = 16

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.timeout_secs <= 0 or self.solver_timeout_secs <= 0:
            raise ValueError("timeouts must be positive")

    @property
    def explore_limits(self) -> ExploreLimits:
        return ExploreLimits(self.step_cap, self.path_cap, None, self.max_address_fork)


@dataclass
class CegisStats:
    iterations: int = 0
    counterexamples: int = 0
    replay_counterexamples: int = 0
    candidates_tried: int = 0
    total_secs: float = 0.0
    check_secs: float = 0.0
    search_secs: float = 0.0
    search_last_secs: float = 0.0
    incomplete_check: bool = False
    explore: ExploreStats = field(default_factory=ExploreStats)
    solver: SolverStats = field(default_factory=SolverStats)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["solver"] = self.solver.as_dict()
        d["coerced_verdicts"] = self.solver.coerced
        return d


@dataclass
class CegisState:
    candidate: AdapterSpec
    tests: list[InputVector] = field(default_factory=list)
    iteration: int = 0
    stats: CegisStats = field(default_factory=CegisStats)


@dataclass
class SynthesisResult:
    verdict: str
    adapter: AdapterSpec | None
    state: CegisState
    error: str | None = None

    @property
    def trail(self) -> list[InputVector]:
        return self.state.tests

    @property
    def adapted(self) -> bool:
        return self.verdict == ADAPTED


class _Context:
    """Shared per-run services: solver, deadline and statistics."""

    def __init__(self, cfg: CegisConfig, stats: CegisStats | None = None):
        self.cfg = cfg
        self.deadline = time.monotonic() + cfg.timeout_secs
        self.stats = stats or CegisStats()
        self.solver = Solver(cfg.solver_backend, SolveBudget(cfg.solver_timeout_secs, cfg.solver_policy),
                             cfg.solver_path)
        self.solver.stats = self.stats.solver
        self.exec_limits = ExecLimits(cfg.step_cap)
        self.enum_pos: dict = {}

    def tick(self):
        if time.monotonic() > self.deadline:
            raise SynthesisTimeout

    def explorer(self, domains=()) -> Explorer:
        ex = Explorer(self.solver, domains, self.cfg.explore_limits, self.deadline)
        ex.stats = self.stats.explore
        return ex


def _ctx(cfg: CegisConfig | None, ctx: _Context | None) -> _Context:
    return ctx if ctx is not None else _Context(cfg or CegisConfig())


# --- concrete helpers -------------------------------------------------------

def run_concrete(f: FunctionDef, inp: InputVector, step_cap: int = 4000) -> ExecutionOutcome:
    return execute(f, inp, ExecLimits(step_cap))


def concrete_equivalent(target: FunctionDef, inner: FunctionDef, a: AdapterSpec, inp: InputVector,
                        policy: EquivPolicy = EquivPolicy(), step_cap: int = 4000,
                        t_out: ExecutionOutcome | None = None) -> bool:
    """Does the adapted inner function match the target on one input?"""
    if t_out is None:
        t_out = run_concrete(target, inp, step_cap)
    i_in = apply_concrete(a, inp, inner, target)
    i_out = run_concrete(inner, i_in, step_cap)
    t_init = _full_regions(target, inp)
    return equivalent_concrete(t_out, i_out, a.ret, policy,
                               concrete_memory_pairs(a, target, inner), t_init)


def _full_regions(f: FunctionDef, inp: InputVector) -> dict[str, bytes]:
    out = {}
    for r in f.regions:
        data = bytes(inp.region_bytes.get(r.name, b""))[:r.size]
        out[r.name] = data + bytes(r.size - len(data))
    return out


def random_inputs(f: FunctionDef, n: int, seed: int) -> Iterator[InputVector]:
    """Seeded inputs mixing small, byte-sized and full-width argument values."""
    rng = random.Random(seed)
    for _ in range(n):
        args = []
        for _ in range(f.arity):
            pick = rng.random()
            if pick < 0.25:
                v = rng.randint(-16, 16)
            elif pick < 0.5:
                v = rng.getrandbits(8)
            elif pick < 0.6:
                v = rng.getrandbits(16)
            elif pick < 0.7:
                v = rng.getrandbits(32)
            else:
                v = rng.getrandbits(64)
            args.append(v)
        regions = {}
        for r in f.regions:
            if rng.random() < 0.2:
                regions[r.name] = bytes(rng.choice((0, 1, 0xFF)) for _ in range(r.size))
            else:
                regions[r.name] = rng.randbytes(r.size)
        yield InputVector.of(args, regions)


# --- CheckAdapter -----------------------------------------------------------

def _input_from_model(target: FunctionDef, model: dict[str, int]) -> InputVector:
    args = [model.get(f"arg_{j}", 0) for j in range(target.arity)]
    regions = {r.name: bytes(model.get(f"init_{r.name}_{off}", 0) for off in range(r.size))
               for r in target.regions}
    return InputVector.of(args, regions)


def check_adapter(target: FunctionDef, inner: FunctionDef, a: AdapterSpec,
                  policy: EquivPolicy = EquivPolicy(), cfg: CegisConfig | None = None,
                  ctx: _Context | None = None) -> InputVector | None:
    """A counterexample input for adapter ``a``, or None if none was found."""
    ctx = _ctx(cfg, ctx)
    t_args = symbolic_args(target.arity)
    t_init = {r.name: symbolic_region(r.name, r.size) for r in target.regions}
    i_args, i_init = adapt_terms(a, target, inner, t_args, t_init)
    pairs = concrete_memory_pairs(a, target, inner)
    ex = ctx.explorer()
    for h in run_harness(ex, target, inner, t_args, t_init, i_args, i_init):
        ctx.tick()
        if h.target.status == LIMIT:
            # no inner behaviour can match; treated as outside the explored bound
            ctx.stats.incomplete_check = True
            continue
        bad = mismatch_condition(h.target, h.inner, a.ret, policy, pairs, t_init, i_init)
        if isinstance(bad, T.Const) and bad.bits == 0:
            continue
        res = ctx.solver.solve([*h.pc, bad])
        if isinstance(res, Sat):
            return _input_from_model(target, res.bits())
    ctx.tick()
    if ex.stats.incomplete:
        ctx.stats.incomplete_check = True
    return None


# --- SynthesizeAdapter ------------------------------------------------------

def _lift(out: ExecutionOutcome) -> SymOutcome:
    store: dict[str, dict[int, T.Term]] = {}
    for (r, off), b in out.final_writes.items():
        store.setdefault(r, {})[off] = T.const(b, 8)
    ret = T.const(out.return_value.bits, out.return_value.width) if out.return_value else None
    events = tuple((tag, tuple(T.const(v.bits, v.width) for v in ops)) for tag, ops in out.events)
    log = tuple((r, off, T.const(b, 8)) for r, off, b in out.write_log)
    return SymOutcome(out.status, out.fault_kind, out.fault_tag, ret, store, log, events,
                      (), out.steps, {})


def synthesize_adapter_symbolic(tests: Sequence[InputVector], target: FunctionDef, inner: FunctionDef,
                                fam: AdapterFamily, policy: EquivPolicy = EquivPolicy(),
                                cfg: CegisConfig | None = None,
                                ctx: _Context | None = None) -> AdapterSpec | None:
    """Solve for selector values under which every test is matched on some inner path."""
    ctx = _ctx(cfg, ctx)
    if not tests:
        raise ValueError("adapter search needs at least one test")
    constraints: list[T.Term] = []
    sym = None
    for inp in tests:
        ctx.tick()
        t_args = [T.const(v) for v in inp.arg_bits]
        full = _full_regions(target, inp)
        t_init = {r: concrete_region(b) for r, b in full.items()}
        sym = encode_symbolic(fam, target.arity, inner.arity, t_args, target, inner)
        t_out = run_concrete(target, inp, ctx.cfg.step_cap)
        t_sym = _lift(t_out)
        if t_out.status != RETURNED:
            verdict = mismatch_condition(t_sym, None, sym.ret_fn, policy)
            if verdict is T.TRUE:
                return None
            continue
        i_args, i_init = sym.inner_inputs(target, inner, t_init)
        pairs = sym.memory_pairs(target, inner)
        ex = ctx.explorer(sym.domains)
        options = []
        for i_out in ex.explore(inner, i_args, i_init, sym.side_conditions):
            ctx.tick()
            bad = mismatch_condition(t_sym, i_out, sym.ret_fn, policy, pairs, t_init, i_init)
            options.append(T.conj([*i_out.pc[len(sym.side_conditions):], T.bool_not(bad)]))
        ctx.tick()
        if ex.stats.incomplete:
            ctx.stats.incomplete_check = True
        c = T.disj(options)
        if isinstance(c, T.Const):
            if c.bits == 0:
                return None
            continue
        constraints.append(c)
    res = ctx.solver.solve([*sym.side_conditions, *constraints], sym.domains)
    ctx.tick()
    if isinstance(res, Sat):
        return sym.decode(res.bits())
    return None


def synthesize_adapter_concrete(tests: Sequence[InputVector], target: FunctionDef, inner: FunctionDef,
                                fam: AdapterFamily, seed: int = 0,
                                policy: EquivPolicy = EquivPolicy(),
                                cfg: CegisConfig | None = None,
                                ctx: _Context | None = None) -> AdapterSpec | None:
    """First adapter in the seeded enumeration that matches every test.

    Within one synthesis run the walk resumes where the previous search
    stopped; earlier adapters already failed a subset of the current tests,
    so the result is the same as restarting.
    """
    ctx = _ctx(cfg, ctx)
    if not tests:
        raise ValueError("adapter search needs at least one test")
    key = (id(target), id(inner), fam, seed)
    state = ctx.enum_pos.get(key)
    if state is None:
        space = FamilySpace(fam, target.arity, inner.arity, target, inner)
        state = (space, permutation(space.size, seed))
        ctx.enum_pos[key] = state
    space, order = state
    step_cap = ctx.cfg.step_cap
    t_outs = [run_concrete(target, inp, step_cap) for inp in tests]
    t_inits = [_full_regions(target, inp) for inp in tests]
    # newest test first: it refuted the last candidate
    checks = list(zip(tests, t_outs, t_inits))[::-1]
    pairs_cache: dict = {}
    n = 0
    while True:
        idx = next(order, None)
        if idx is None:
            return None
        a = space.nth(idx)
        n += 1
        ctx.stats.candidates_tried += 1
        if n & 255 == 0:
            ctx.tick()
        pairs = pairs_cache.get(a.mem)
        if pairs is None:
            pairs = pairs_cache[a.mem] = concrete_memory_pairs(a, target, inner)
        ok = True
        for inp, t_out, t_init in checks:
            i_out = run_concrete(inner, apply_concrete(a, inp, inner, target), step_cap)
            if not equivalent_concrete(t_out, i_out, a.ret, policy, pairs, t_init):
                ok = False
                break
        if ok:
            return a


# --- main loop --------------------------------------------------------------

def _replay_failure(target, inner, a, tests, cfg: CegisConfig) -> InputVector | None:
    for inp in tests:
        if not concrete_equivalent(target, inner, a, inp, cfg.policy, cfg.step_cap):
            return inp
    for inp in random_inputs(target, cfg.replay_random, cfg.seed ^ 0xA5A5):
        t_out = run_concrete(target, inp, cfg.step_cap)
        if t_out.status == LIMIT:
            continue
        if not concrete_equivalent(target, inner, a, inp, cfg.policy, cfg.step_cap, t_out):
            return inp
    return None


def synthesize(target: FunctionDef, inner: FunctionDef, fam: AdapterFamily,
               backend: str | None = None, cfg: CegisConfig | None = None,
               on_iteration: Callable[[CegisState], None] | None = None) -> SynthesisResult:
    cfg = cfg or CegisConfig()
    if backend is not None and backend != cfg.backend:
        cfg = CegisConfig(**{**cfg.__dict__, "backend": backend})
    check(target)
    check(inner)
    ctx = _Context(cfg)
    t0 = time.perf_counter()
    state = CegisState(default_adapter(fam, target.arity, inner.arity, cfg.identity_start),
                       stats=ctx.stats)
    seen: set[InputVector] = set()

    def finish(verdict, adapter=None, error=None):
        state.stats.total_secs = time.perf_counter() - t0
        return SynthesisResult(verdict, adapter, state, error)

    try:
        while True:
            ctx.tick()
            c0 = time.perf_counter()
            cex = check_adapter(target, inner, state.candidate, cfg.policy, ctx=ctx)
            if cex is None:
                cex = _replay_failure(target, inner, state.candidate, state.tests, cfg)
                if cex is not None:
                    state.stats.replay_counterexamples += 1
            elif concrete_equivalent(target, inner, state.candidate, cex, cfg.policy, cfg.step_cap):
                raise InvariantViolation(f"counterexample {cex} does not replay as a mismatch")
            state.stats.check_secs += time.perf_counter() - c0
            if cex is None:
                return finish(ADAPTED, state.candidate)
            if cex in seen:
                raise InvariantViolation(f"counterexample {cex} repeated")
            seen.add(cex)
            state.tests.append(cex)
            state.stats.counterexamples += 1
            state.iteration += 1
            state.stats.iterations = state.iteration
            s0 = time.perf_counter()
            if cfg.backend == "symbolic":
                a = synthesize_adapter_symbolic(state.tests, target, inner, fam, cfg.policy, ctx=ctx)
            else:
                a = synthesize_adapter_concrete(state.tests, target, inner, fam, cfg.seed,
                                                cfg.policy, ctx=ctx)
            state.stats.search_last_secs = time.perf_counter() - s0
            state.stats.search_secs += state.stats.search_last_secs
            if a is None:
                return finish(NOT_SUBSTITUTABLE)
            for inp in state.tests:
                if not concrete_equivalent(target, inner, a, inp, cfg.policy, cfg.step_cap):
                    raise InvariantViolation(f"candidate {a.describe()} fails test {inp}")
            state.candidate = a
            if on_iteration is not None:
                on_iteration(state)
    except SynthesisTimeout:
        return finish(TIMEOUT)
    except ExternalSolverFailure as e:
        return finish(FAILED, error=str(e))


IDENTITY_SOURCE = "func identity(x)\n{\nentry:\n  ret x\n}\n"


def triviality_filter(target: FunctionDef, fam: AdapterFamily, cfg: CegisConfig | None = None) -> bool:
    """True when the target is adaptable from the one-argument identity function."""
    from .ir import parse_function
    ident = parse_function(IDENTITY_SOURCE)
    return synthesize(target, ident, fam, cfg=cfg).adapted
