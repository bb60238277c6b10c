"""Satisfiability of conjunctions of i1 terms.

Two backends:

* ``internal``: backtracking over variable values, checking each conjunct as
  soon as all of its variables are bound. Exact when every variable has an
  explicit finite domain (or is at most 8 bits wide) and the search finishes
  within its node budget. Wider unconstrained variables are tried on a sample
  set (0, 1, -1, the signed extremes, constants appearing in the query and
  their neighbours, and 8 seeded random values); exhausting the samples gives
  Unknown.
* ``smtlib``: one external solver process per query speaking SMT-LIB v2 QF_BV.
* ``z3``: the same queries through the z3 Python bindings, in process.

``auto`` uses the internal backend when it is exact and small enough, and
otherwise tries a quick sampled search before calling z3. It prefers the
in-process bindings unless a solver path was configured explicitly, in which
case that executable is used.

Timeouts become Unsat under the default ``treat-as-unsat`` policy; every such
coercion is counted in ``SolverStats.coerced``.
"""
from __future__ import annotations

import math
import os
import random
import re
import shutil
import subprocess
import time
import zlib
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .bitvec import BitVecValue, mask
from .term import (Binop, Cmp, Const, Extend, Ite, Term, Trunc, Unop, Var, cmp,
                   compile_terms, eval_many, free_vars, postorder)

TREAT_AS_UNSAT = "treat-as-unsat"
REPORT_UNKNOWN = "report-unknown"

SOLVER_ENV = "ADAPTSYNTH_SOLVER"


class ExternalSolverFailure(RuntimeError):
    """The external solver crashed, printed garbage, or returned a bad model."""


# --- results ----------------------------------------------------------------

@dataclass(frozen=True)
class Sat:
    model: Mapping[str, BitVecValue]

    def __getitem__(self, name):
        return self.model[name]

    def bits(self) -> dict[str, int]:
        return {k: v.bits for k, v in self.model.items()}


@dataclass(frozen=True)
class Unsat:
    coerced: bool = False  # a timeout reported as unsat by policy


@dataclass(frozen=True)
class Unknown:
    reason: str = ""


SolveResult = Sat | Unsat | Unknown


@dataclass(frozen=True)
class Proved:
    pass


@dataclass(frozen=True)
class Refuted:
    model: Mapping[str, BitVecValue]


# --- configuration ----------------------------------------------------------

@dataclass(frozen=True)
class VarDomain:
    """A variable and its allowed values; ``values=None`` means full width."""

    name: str
    width: int
    values: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.values is not None:
            if not self.values:
                raise ValueError(f"empty domain for {self.name}")
            vals = tuple(dict.fromkeys(v & mask(self.width) for v in self.values))
            object.__setattr__(self, "values", vals)

    @property
    def size(self) -> int:
        return len(self.values) if self.values is not None else 1 << self.width

    @property
    def explicit(self) -> bool:
        return self.values is not None


@dataclass(frozen=True)
class SolveBudget:
    timeout_secs: float = 5.0
    policy: str = TREAT_AS_UNSAT

    def __post_init__(self):
        if self.timeout_secs <= 0:
            raise ValueError("timeout must be positive")
        if self.policy not in (TREAT_AS_UNSAT, REPORT_UNKNOWN):
            raise ValueError(f"unknown timeout policy {self.policy!r}")


@dataclass
class SolverStats:
    calls: int = 0
    internal: int = 0
    external: int = 0
    sat: int = 0
    unsat: int = 0
    unknown: int = 0
    coerced: int = 0
    seconds: float = 0.0

    def merge(self, other: SolverStats) -> None:
        for k in self.__dataclass_fields__:
            setattr(self, k, getattr(self, k) + getattr(other, k))

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def find_solver(path: str | None = None) -> str | None:
    """Resolve the external solver: env var, then explicit path, then z3 on PATH."""
    cand = os.environ.get(SOLVER_ENV) or path
    if cand:
        return shutil.which(cand) or (cand if os.path.exists(cand) else None)
    return shutil.which("z3")


# --- internal backend -------------------------------------------------------

INTERNAL_NODE_BUDGET = 400_000
_SAMPLE_SEED = 0x5EED


def _sample_values(d: VarDomain, consts: Iterable[int]) -> list[int]:
    w, m = d.width, mask(d.width)
    vals = [0, 1, m, 1 << (w - 1), m >> 1]
    for c in consts:
        vals += [c, (c + 1) & m, (c - 1) & m, (-c) & m, c ^ m]
    rng = random.Random(zlib.crc32(d.name.encode()) ^ _SAMPLE_SEED)
    vals += [rng.getrandbits(w) for _ in range(8)]
    return list(dict.fromkeys(vals))


@dataclass
class _Search:
    order: list[str]
    candidates: dict[str, list[int]]
    checks: dict[str, list]          # var -> conjunct evaluators completed by it
    nodes: int = 0
    budget: int = INTERNAL_NODE_BUDGET
    deadline: float = math.inf
    exhausted_budget: bool = False

    def run(self) -> dict[str, int] | None:
        env: dict[str, int] = {}
        return env if self._go(0, env) else None

    def _go(self, k: int, env: dict) -> bool:
        if k == len(self.order):
            return True
        name = self.order[k]
        checks = self.checks[name]
        for v in self.candidates[name]:
            self.nodes += 1
            if self.nodes > self.budget or (self.nodes & 1023 == 0 and time.monotonic() > self.deadline):
                self.exhausted_budget = True
                return False
            env[name] = v
            if all(f(env)[0] for f in checks) and self._go(k + 1, env):
                return True
            if self.exhausted_budget:
                return False
        del env[name]
        return False


def _plan(conjuncts: Sequence[Term], doms: dict[str, VarDomain]):
    """Variable order that binds the variables of small conjuncts first."""
    cvars = [set(free_vars(c)) for c in conjuncts]
    remaining = set(doms)
    order: list[str] = []
    bound: set[str] = set()
    while remaining:
        def score(v):
            completes = sum(1 for s in cvars if v in s and s - bound <= {v})
            touches = sum(1 for s in cvars if v in s)
            return (-completes, -touches, doms[v].size, v)
        best = min(remaining, key=score)
        order.append(best)
        bound.add(best)
        remaining.discard(best)
    return order, cvars


def solve_internal(conjuncts: Sequence[Term], doms: Mapping[str, VarDomain],
                   budget: SolveBudget = SolveBudget(),
                   node_budget: int = INTERNAL_NODE_BUDGET,
                   sample: bool = True) -> SolveResult:
    """Backtracking search; Unknown when sampling or the node budget made it incomplete."""
    conjuncts = list(conjuncts)
    for c in conjuncts:
        if isinstance(c, Const) and c.bits == 0:
            return Unsat()
    conjuncts = [c for c in conjuncts if not isinstance(c, Const)]
    doms = dict(doms)
    exact = True
    consts_by_width: dict[int, set[int]] = {}
    for t in postorder(conjuncts):
        if isinstance(t, Const):
            consts_by_width.setdefault(t.width, set()).add(t.bits)
    candidates = {}
    for name, d in doms.items():
        if d.explicit:
            candidates[name] = list(d.values)
        elif d.width <= 8:
            candidates[name] = list(range(1 << d.width))
        else:
            if not sample:
                return Unknown("full-width variable")
            exact = False
            candidates[name] = _sample_values(d, sorted(consts_by_width.get(d.width, ())))
    order, cvars = _plan(conjuncts, doms)
    pos = {v: i for i, v in enumerate(order)}
    checks: dict[str, list] = {v: [] for v in order}
    for c, vs in zip(conjuncts, cvars):
        f = compile_terms([c])
        if not vs:
            if not f({})[0]:
                return Unsat()
            continue
        last = max(vs, key=pos.__getitem__)
        checks[last].append(f)
    search = _Search(order, candidates, checks, budget=node_budget,
                     deadline=time.monotonic() + budget.timeout_secs)
    env = search.run()
    if env is not None:
        return Sat({k: BitVecValue(doms[k].width, env.get(k, candidates[k][0])) for k in doms})
    if search.exhausted_budget:
        return Unknown("internal search budget exhausted")
    if not exact:
        return Unknown("sampled values exhausted")
    return Unsat()


def iter_models(conjuncts: Sequence[Term], doms: Mapping[str, VarDomain]) -> Iterator[dict[str, int]]:
    """Every model over explicit (or <= 8-bit) domains; intended for small spaces."""
    conjuncts = [c for c in conjuncts if not (isinstance(c, Const) and c.bits)]
    if any(isinstance(c, Const) for c in conjuncts):
        return
    doms = dict(doms)
    for name, w in free_vars(*conjuncts).items():
        doms.setdefault(name, VarDomain(name, w))
    candidates = {}
    for name, d in doms.items():
        if not (d.explicit or d.width <= 8):
            raise ValueError(f"{name} has no finite domain")
        candidates[name] = list(d.values) if d.explicit else list(range(1 << d.width))
    order, cvars = _plan(conjuncts, doms)
    pos = {v: i for i, v in enumerate(order)}
    checks: dict[str, list] = {v: [] for v in order}
    for c, vs in zip(conjuncts, cvars):
        f = compile_terms([c])
        if not vs:
            if not f({})[0]:
                return
            continue
        checks[max(vs, key=pos.__getitem__)].append(f)
    env: dict[str, int] = {}

    def go(k):
        if k == len(order):
            yield dict(env)
            return
        name = order[k]
        for v in candidates[name]:
            env[name] = v
            if all(f(env)[0] for f in checks[name]):
                yield from go(k + 1)
        env.pop(name, None)

    yield from go(0)


# --- SMT-LIB backend --------------------------------------------------------

_BVOPS = {
    "add": "bvadd", "sub": "bvsub", "mul": "bvmul", "udiv": "bvudiv", "urem": "bvurem",
    "sdiv": "bvsdiv", "srem": "bvsrem", "and": "bvand", "or": "bvor", "xor": "bvxor",
    "shl": "bvshl", "lshr": "bvlshr", "ashr": "bvashr",
}
_CMPOPS = {"eq": "=", "ult": "bvult", "ule": "bvule", "slt": "bvslt", "sle": "bvsle"}


def _lit(bits: int, width: int) -> str:
    if width % 4 == 0:
        return "#x" + format(bits, f"0{width // 4}x")
    return "#b" + format(bits, f"0{width}b")


_SIMPLE_SYM = re.compile(r"[A-Za-z_][A-Za-z0-9_.$]*")


def _sym(name: str) -> str:
    return name if _SIMPLE_SYM.fullmatch(name) else f"|{name}|"


class _Emitter:
    def __init__(self, roots: Sequence[Term]):
        refs: dict[int, int] = {}
        self.order = postorder(roots)
        for t in self.order:
            for c in t.children():
                refs[id(c)] = refs.get(id(c), 0) + 1
        self.shared = {id(t) for t in self.order
                       if refs.get(id(t), 0) > 1 and t.children()}
        self.names: dict[int, str] = {}
        self.defs: list[str] = []
        for t in self.order:
            if id(t) in self.shared:
                name = f"!n{len(self.defs)}"  # cannot clash with a variable name
                body = self._bv(t, top=True)
                self.defs.append(f"(define-fun {name} () (_ BitVec {t.width}) {body})")
                self.names[id(t)] = name

    def _bv(self, t: Term, top=False) -> str:
        if not top and id(t) in self.names:
            return self.names[id(t)]
        if isinstance(t, Const):
            return _lit(t.bits, t.width)
        if isinstance(t, Var):
            return _sym(t.name)
        if isinstance(t, Binop):
            return f"({_BVOPS[t.op]} {self._bv(t.l)} {self._bv(t.r)})"
        if isinstance(t, Unop):
            return f"({'bvnot' if t.op == 'not' else 'bvneg'} {self._bv(t.a)})"
        if isinstance(t, Cmp):
            return f"(ite {self._cmp(t)} #b1 #b0)"
        if isinstance(t, Extend):
            k = t.width - t.a.width
            fn = "sign_extend" if t.kind == "sext" else "zero_extend"
            return f"((_ {fn} {k}) {self._bv(t.a)})"
        if isinstance(t, Trunc):
            return f"((_ extract {t.width - 1} 0) {self._bv(t.a)})"
        if isinstance(t, Ite):
            return f"(ite {self.boolean(t.c)} {self._bv(t.t)} {self._bv(t.e)})"
        raise TypeError(t)

    def _cmp(self, t: Cmp) -> str:
        a, b = self._bv(t.l), self._bv(t.r)
        if t.op == "ne":
            return f"(not (= {a} {b}))"
        return f"({_CMPOPS[t.op]} {a} {b})"

    def boolean(self, t: Term) -> str:
        if isinstance(t, Cmp) and id(t) not in self.names:
            return self._cmp(t)
        return f"(= {self._bv(t)} #b1)"


def emit_smtlib(conjuncts: Sequence[Term], domains: Iterable[VarDomain],
                timeout_secs: float | None = None) -> str:
    conjuncts = list(conjuncts)
    doms = {d.name: d for d in domains}
    for name, w in free_vars(*conjuncts).items():
        doms.setdefault(name, VarDomain(name, w))
    lines = ["(set-logic QF_BV)"]
    if timeout_secs is not None:
        lines.append(f"(set-option :timeout {max(1, int(timeout_secs * 1000))})")
    for name, d in doms.items():
        lines.append(f"(declare-const {_sym(name)} (_ BitVec {d.width}))")
    for d in doms.values():
        if d.explicit:
            opts = " ".join(f"(= {_sym(d.name)} {_lit(v, d.width)})" for v in d.values)
            lines.append(f"(assert (or {opts}))" if len(d.values) > 1 else f"(assert {opts})")
    em = _Emitter(conjuncts)
    lines.extend(em.defs)
    for c in conjuncts:
        lines.append(f"(assert {em.boolean(c)})")
    lines.append("(check-sat)")
    if doms:
        lines.append("(get-value (" + " ".join(_sym(n) for n in doms) + "))")
    return "\n".join(lines) + "\n"


_VALUE_RE = re.compile(r"\(\s*\|?([^\s|()]+)\|?\s+(#x[0-9a-fA-F]+|#b[01]+|\(_\s+bv(\d+)\s+\d+\))\s*\)")


def _parse_value(text: str) -> int:
    if text.startswith("#x"):
        return int(text[2:], 16)
    if text.startswith("#b"):
        return int(text[2:], 2)
    return int(re.match(r"\(_\s+bv(\d+)", text).group(1))


def solve_smtlib(conjuncts: Sequence[Term], doms: Mapping[str, VarDomain],
                 budget: SolveBudget, solver_path: str) -> SolveResult:
    script = emit_smtlib(conjuncts, doms.values(), budget.timeout_secs)
    hard = max(1, math.ceil(budget.timeout_secs))
    try:
        proc = subprocess.run([solver_path, "-in", "-smt2", f"-T:{hard + 1}"], input=script,
                              capture_output=True, text=True, timeout=budget.timeout_secs + 2)
    except subprocess.TimeoutExpired:
        return Unknown("timeout")
    except OSError as e:
        raise ExternalSolverFailure(f"cannot run {solver_path}: {e}") from e
    out = proc.stdout.strip().splitlines()
    if not out:
        raise ExternalSolverFailure(f"solver exited {proc.returncode}: {proc.stderr.strip()}")
    head = out[0].strip()
    if head == "unsat":
        return Unsat()
    if head in ("unknown", "timeout"):
        return Unknown("timeout")
    if head != "sat":
        raise ExternalSolverFailure(f"unexpected solver output: {head!r}")
    values = {m.group(1): _parse_value(m.group(2)) for m in _VALUE_RE.finditer(" ".join(out[1:]))}
    missing = set(doms) - set(values)
    if missing:
        raise ExternalSolverFailure(f"model lacks {sorted(missing)}")
    return Sat({k: BitVecValue(d.width, values[k]) for k, d in doms.items()})


# --- in-process z3 backend ---------------------------------------------------

try:
    import z3 as _z3
except ImportError:  # pragma: no cover - optional dependency
    _z3 = None


def z3_available() -> bool:
    return _z3 is not None


class _Z3Builder:
    def __init__(self, ctx):
        self.ctx = ctx
        # keyed by the (hash-consed) term itself so entries keep their keys alive
        self.memo: dict[Term, object] = {}
        self.vars: dict[str, object] = {}
        z = _z3
        self.bin = {
            "add": lambda a, b: a + b, "sub": lambda a, b: a - b, "mul": lambda a, b: a * b,
            "udiv": z.UDiv, "urem": z.URem, "sdiv": lambda a, b: a / b, "srem": z.SRem,
            "and": lambda a, b: a & b, "or": lambda a, b: a | b, "xor": lambda a, b: a ^ b,
            "shl": lambda a, b: a << b, "lshr": z.LShR, "ashr": lambda a, b: a >> b,
        }
        self.cmp = {
            "eq": lambda a, b: a == b, "ne": lambda a, b: a != b, "ult": z.ULT, "ule": z.ULE,
            "slt": lambda a, b: a < b, "sle": lambda a, b: a <= b,
        }

    def var(self, name: str, width: int):
        v = self.vars.get(name)
        if v is None:
            v = self.vars[name] = _z3.BitVec(name, width, self.ctx)
        return v

    def bv(self, root: Term):
        z, memo = _z3, self.memo
        if root in memo:
            return memo[root]
        for t in postorder([root]):
            if t in memo:
                continue
            if isinstance(t, Const):
                e = z.BitVecVal(t.bits, t.width, self.ctx)
            elif isinstance(t, Var):
                e = self.var(t.name, t.width)
            elif isinstance(t, Binop):
                e = self.bin[t.op](memo[t.l], memo[t.r])
            elif isinstance(t, Unop):
                e = ~memo[t.a] if t.op == "not" else -memo[t.a]
            elif isinstance(t, Cmp):
                e = z.If(self._cmp(t), z.BitVecVal(1, 1, self.ctx), z.BitVecVal(0, 1, self.ctx))
            elif isinstance(t, Extend):
                fn = z.SignExt if t.kind == "sext" else z.ZeroExt
                e = fn(t.width - t.a.width, memo[t.a])
            elif isinstance(t, Trunc):
                e = z.Extract(t.width - 1, 0, memo[t.a])
            elif isinstance(t, Ite):
                e = z.If(self.boolean(t.c), memo[t.t], memo[t.e])
            else:
                raise TypeError(t)
            memo[t] = e
        return memo[root]

    def _cmp(self, t: Cmp):
        return self.cmp[t.op](self.bv(t.l), self.bv(t.r))

    def boolean(self, t: Term):
        if isinstance(t, Cmp):
            return self._cmp(t)
        return self.bv(t) == _z3.BitVecVal(1, 1, self.ctx)


_BUILDER_CACHE_LIMIT = 200_000


def _z3_model(s, b: _Z3Builder, doms: Mapping[str, VarDomain]) -> Sat:
    m = s.model()
    return Sat({name: BitVecValue(d.width, m.eval(b.var(name, d.width), model_completion=True).as_long())
                for name, d in doms.items()})


def solve_z3(conjuncts: Sequence[Term], doms: Mapping[str, VarDomain],
             budget: SolveBudget) -> SolveResult:
    """One query through the bindings, in a fresh context."""
    if _z3 is None:
        raise ExternalSolverFailure("the z3 Python bindings are not installed")
    return _Z3Session().solve(conjuncts, doms, budget)


class _Z3Session:
    """Incremental z3 solver reused across queries.

    Symbolic execution asks DFS-ordered queries that share a path-condition
    prefix; each conjunct sits on its own push level so a new query only pops
    back to the longest common prefix.
    """

    def __init__(self):
        self.builder = _Z3Builder(_z3.Context())
        self._reset()

    def _reset(self):
        self.solver = _z3.Solver(ctx=self.builder.ctx)
        self.stack: list[Term] = []
        self.dom_key: frozenset | None = None
        self.timeout_ms: int | None = None

    def solve(self, conjuncts: Sequence[Term], doms: Mapping[str, VarDomain],
              budget: SolveBudget) -> SolveResult:
        b = self.builder
        key = frozenset(d for d in doms.values() if d.explicit)
        if key != self.dom_key or len(b.memo) > _BUILDER_CACHE_LIMIT:
            if len(b.memo) > _BUILDER_CACHE_LIMIT:
                b.memo.clear()
            self._reset()
            for d in key:
                v = b.var(d.name, d.width)
                self.solver.add(_z3.Or([v == _z3.BitVecVal(x, d.width, b.ctx) for x in d.values]))
            self.dom_key = key
        ms = max(1, int(budget.timeout_secs * 1000))
        if ms != self.timeout_ms:
            self.solver.set("timeout", ms)
            self.timeout_ms = ms
        k = 0
        for old, new in zip(self.stack, conjuncts):
            if old is not new:
                break
            k += 1
        if k < len(self.stack):
            self.solver.pop(len(self.stack) - k)
            del self.stack[k:]
        for c in conjuncts[k:]:
            self.solver.push()
            self.solver.add(b.boolean(c))
            self.stack.append(c)
        res = self.solver.check()
        if res == _z3.unsat:
            return Unsat()
        if res != _z3.sat:
            return Unknown(self.solver.reason_unknown() or "timeout")
        return _z3_model(self.solver, b, doms)


# --- front end --------------------------------------------------------------

INTERNAL_PRODUCT_LIMIT = 200_000
# evaluation work granted to a short exact attempt before deferring
LARGE_PRODUCT_WORK = 1_500_000
# domain product times query size above which exhaustive search defers to the external solver
INTERNAL_WORK_LIMIT = 20_000_000


class Solver:
    """Backend selection, model validation, timeout policy and statistics."""

    def __init__(self, backend: str = "auto", budget: SolveBudget = SolveBudget(),
                 solver_path: str | None = None, node_budget: int = INTERNAL_NODE_BUDGET):
        if backend not in ("auto", "internal", "smtlib", "z3"):
            raise ValueError(f"unknown solver backend {backend!r}")
        self.backend = backend
        self.budget = budget
        self.node_budget = node_budget
        self.path = find_solver(solver_path)
        explicit = bool(os.environ.get(SOLVER_ENV) or solver_path)
        # auto mode goes through the bindings unless an executable was named
        self.in_process = backend == "z3" or (backend == "auto" and _z3 is not None and not explicit)
        if backend == "smtlib" and self.path is None:
            raise ExternalSolverFailure("no external solver found (set ADAPTSYNTH_SOLVER or solver.path)")
        if backend == "z3" and _z3 is None:
            raise ExternalSolverFailure("the z3 Python bindings are not installed")
        self._session = None
        self.stats = SolverStats()

    def _domains(self, conjuncts, domains) -> dict[str, VarDomain]:
        doms = {d.name: d for d in domains}
        for name, w in free_vars(*conjuncts).items():
            d = doms.get(name)
            if d is None:
                doms[name] = VarDomain(name, w)
            elif d.width != w:
                raise ValueError(f"variable {name} is i{w} but its domain is i{d.width}")
        return doms

    def _external(self, conjuncts, doms) -> SolveResult:
        self.stats.external += 1
        if self.in_process:
            if self._session is None:
                self._session = _Z3Session()
            return self._session.solve(conjuncts, doms, self.budget)
        return solve_smtlib(conjuncts, doms, self.budget, self.path)

    def _dispatch(self, conjuncts, doms) -> SolveResult:
        if self.backend == "z3":
            return self._external(conjuncts, doms)
        if self.backend == "internal" or (self.backend == "auto" and self.path is None
                                          and not self.in_process):
            self.stats.internal += 1
            return solve_internal(conjuncts, doms, self.budget, self.node_budget)
        if self.backend == "smtlib":
            self.stats.external += 1
            return solve_smtlib(conjuncts, doms, self.budget, self.path)
        exact = all(d.explicit or d.width <= 8 for d in doms.values())
        if exact:
            # side conditions often prune far below the raw domain product, so
            # large products still get a short exact attempt
            product = math.prod(d.size for d in doms.values())
            size = len(postorder(conjuncts))
            if product <= INTERNAL_PRODUCT_LIMIT and product * size <= INTERNAL_WORK_LIMIT:
                nodes = self.node_budget
            else:
                nodes = max(0, LARGE_PRODUCT_WORK // size)
            res = Unknown("skipped")
            if nodes > 50:
                self.stats.internal += 1
                res = solve_internal(conjuncts, doms, self.budget, nodes)
            if not isinstance(res, Unknown):
                return res
        elif not self.in_process:
            # quick sampled attempt to save a process launch; only a model is trusted
            self.stats.internal += 1
            res = solve_internal(conjuncts, doms, self.budget, node_budget=2_000)
            if isinstance(res, Sat):
                return res
        return self._external(conjuncts, doms)

    def solve(self, conjuncts: Sequence[Term], domains: Iterable[VarDomain] = ()) -> SolveResult:
        conjuncts = list(conjuncts)
        doms = self._domains(conjuncts, domains)
        t0 = time.perf_counter()
        self.stats.calls += 1
        try:
            res = self._dispatch(conjuncts, doms)
        finally:
            self.stats.seconds += time.perf_counter() - t0
        if isinstance(res, Sat):
            env = res.bits()
            for name, d in doms.items():
                if d.explicit and env[name] not in d.values:
                    raise ExternalSolverFailure(f"model puts {name} outside its domain")
            if not all(eval_many(conjuncts, env)):
                raise ExternalSolverFailure("model does not satisfy the query")
            self.stats.sat += 1
            return res
        if isinstance(res, Unknown):
            if self.budget.policy == TREAT_AS_UNSAT:
                self.stats.coerced += 1
                self.stats.unsat += 1
                return Unsat(coerced=True)
            self.stats.unknown += 1
            return res
        self.stats.unsat += 1
        return res

    def check_equal(self, a: Term, b: Term, pc: Sequence[Term] = (),
                    domains: Iterable[VarDomain] = ()) -> Proved | Refuted | Unknown:
        if a.width != b.width:
            raise ValueError("check_equal needs equal widths")
        res = self.solve([*pc, cmp("ne", a, b)], domains)
        if isinstance(res, Sat):
            return Refuted(res.model)
        if isinstance(res, Unknown):
            return res
        return Proved()


def solve(conjuncts: Sequence[Term], domains: Iterable[VarDomain] = (),
          budget: SolveBudget = SolveBudget(), backend: str = "auto",
          solver_path: str | None = None) -> SolveResult:
    return Solver(backend, budget, solver_path).solve(conjuncts, domains)


def check_equal(a: Term, b: Term, pc: Sequence[Term] = (), budget: SolveBudget = SolveBudget(),
                backend: str = "auto", domains: Iterable[VarDomain] = ()):
    return Solver(backend, budget).check_equal(a, b, pc, domains)
