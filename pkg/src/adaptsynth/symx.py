"""Depth-first symbolic execution of IR functions and the two-function harness.

Every state carries a witness: an assignment satisfying its path condition.
A branch direction the witness already satisfies needs no solver call; only
the other direction is sent to the solver, whose model becomes the witness of
the new state.

Symbolic load/store addresses are concretized by forking over their feasible
values (at most ``ExploreLimits.max_address_fork``); beyond that the path is
dropped and counted in ``ExploreStats.address_overflow``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .bitvec import mask
from .interp import DEFAULT_STEP_CAP, FAULTED, LIMIT, RETURNED
from .ir import (BinOp, Br, Cmp, Const, Emit, Extend, Fault, FunctionDef, Jmp, Load,
                 Ret, Store, Trunc, UnOp)
from .solver import Sat, Solver, VarDomain
from . import term as T
from .term import Term, eval_many, free_vars


@dataclass(frozen=True)
class ExploreLimits:
    step_cap: int = DEFAULT_STEP_CAP
    path_cap: int = 100_000
    wall_secs: float | None = None
    max_address_fork: int = 16

    def __post_init__(self):
        if self.step_cap < 1 or self.path_cap < 1 or self.max_address_fork < 1:
            raise ValueError("limits must be >= 1")
        if self.wall_secs is not None and self.wall_secs <= 0:
            raise ValueError("wall_secs must be positive")


@dataclass
class ExploreStats:
    paths: int = 0
    limit_paths: int = 0
    address_overflow: int = 0
    truncated: bool = False   # path cap or wall clock cut the stream short
    branch_queries: int = 0

    def merge(self, other: ExploreStats) -> None:
        self.paths += other.paths
        self.limit_paths += other.limit_paths
        self.address_overflow += other.address_overflow
        self.truncated = self.truncated or other.truncated
        self.branch_queries += other.branch_queries

    @property
    def incomplete(self) -> bool:
        return self.truncated or self.limit_paths > 0 or self.address_overflow > 0


@dataclass(frozen=True)
class SymOutcome:
    status: str
    fault_kind: str | None
    fault_tag: int | None
    return_term: Term | None
    final_store: Mapping[str, Mapping[int, Term]]   # written offsets only
    write_log: tuple[tuple[str, int, Term], ...]
    events: tuple[tuple[int, tuple[Term, ...]], ...]
    pc: tuple[Term, ...]
    steps: int
    witness: Mapping[str, int]

    @property
    def returned(self) -> bool:
        return self.status == RETURNED

    @property
    def faulted(self) -> bool:
        return self.status == FAULTED


@dataclass
class _State:
    label: str
    index: int
    regs: dict
    store: dict          # region -> {offset: Term}
    log: list
    events: list
    pc: list
    steps: int
    witness: dict

    def fork(self) -> _State:
        return _State(self.label, self.index, dict(self.regs),
                      {r: dict(m) for r, m in self.store.items()}, list(self.log),
                      list(self.events), list(self.pc), self.steps, self.witness)


def symbolic_args(n: int, prefix: str = "arg_") -> list[Term]:
    return [T.var(f"{prefix}{i}", 64) for i in range(n)]


def symbolic_region(name: str, size: int, prefix: str = "init_") -> list[Term]:
    return [T.var(f"{prefix}{name}_{off}", 8) for off in range(size)]


def concrete_region(data: bytes) -> list[Term]:
    return [T.const(b, 8) for b in data]


class Explorer:
    """Symbolic executor bound to a solver, variable domains and limits."""

    def __init__(self, solver: Solver, domains: Sequence[VarDomain] = (),
                 limits: ExploreLimits = ExploreLimits(), deadline: float | None = None):
        self.solver = solver
        self.domains = {d.name: d for d in domains}
        self.limits = limits
        self.deadline = deadline
        self.stats = ExploreStats()

    # -- witnesses --------------------------------------------------------

    def _default(self, name: str) -> int:
        d = self.domains.get(name)
        return d.values[0] if d is not None and d.explicit else 0

    def _env_for(self, witness: dict, terms: Sequence[Term]) -> dict:
        env = dict(witness)
        for name in free_vars(*terms):
            if name not in env:
                env[name] = self._default(name)
        return env

    def initial_witness(self, pc0: Sequence[Term]) -> dict | None:
        if not pc0:
            return {}
        env = self._env_for({}, pc0)
        if all(eval_many(pc0, env)):
            return env
        res = self.solver.solve(pc0, self.domains.values())
        return res.bits() if isinstance(res, Sat) else None

    def _feasible(self, st: _State, cond: Term) -> dict | None:
        """Witness for pc ∧ cond, or None if infeasible."""
        if isinstance(cond, T.Const):
            return st.witness if cond.bits else None
        env = self._env_for(st.witness, [cond])
        if eval_many([cond], env)[0]:
            return env
        self.stats.branch_queries += 1
        res = self.solver.solve([*st.pc, cond], self.domains.values())
        return res.bits() if isinstance(res, Sat) else None

    def _split(self, st: _State, cond: Term) -> list[tuple[_State, bool]]:
        """Feasible successors for cond true (first) and false."""
        out = []
        for want, c in ((True, cond), (False, T.bool_not(cond))):
            w = self._feasible(st, c)
            if w is None:
                continue
            s = st.fork()
            if not isinstance(c, T.Const):
                s.pc.append(c)
            s.witness = w
            out.append((s, want))
        return out

    def _address_values(self, st: _State, addr: Term) -> list[tuple[_State, int]] | None:
        """Fork st over the feasible concrete values of addr (None on overflow)."""
        if isinstance(addr, T.Const):
            return [(st, addr.bits)]
        values: list[tuple[int, dict]] = []
        w0 = self._env_for(st.witness, [addr])
        first = eval_many([addr], w0)[0]
        values.append((first, w0))
        while len(values) <= self.limits.max_address_fork:
            excl = [T.cmp("ne", addr, T.const(v, addr.width)) for v, _ in values]
            self.stats.branch_queries += 1
            res = self.solver.solve([*st.pc, *excl], self.domains.values())
            if not isinstance(res, Sat):
                break
            env = res.bits()
            values.append((eval_many([addr], self._env_for(env, [addr]))[0], env))
        else:
            self.stats.address_overflow += 1
            return None
        if len(values) == 1:
            return [(st, first)]
        out = []
        for v, w in values:
            s = st.fork()
            s.pc.append(T.cmp("eq", addr, T.const(v, addr.width)))
            s.witness = w
            out.append((s, v))
        return out

    # -- memory -----------------------------------------------------------

    @staticmethod
    def _read_byte(st: _State, init: Mapping[str, list], sizes, region: str, off: int) -> Term:
        if off >= sizes[region]:
            return T.const(0, 8)
        written = st.store[region].get(off)
        return written if written is not None else init[region][off]

    # -- main loop --------------------------------------------------------

    def explore(self, f: FunctionDef, args: Sequence[Term], init: Mapping[str, list],
                pc0: Sequence[Term] = (), witness: dict | None = None) -> Iterator[SymOutcome]:
        """Yield one SymOutcome per feasible path, DFS with the then-branch first."""
        if len(args) != f.arity:
            raise ValueError(f"{f.name} takes {f.arity} args, got {len(args)}")
        sizes = f.region_sizes()
        for r, n in sizes.items():
            if len(init[r]) != n:
                raise ValueError(f"region {r}: init has {len(init[r])} bytes, declared {n}")
        if witness is None:
            witness = self.initial_witness(pc0)
            if witness is None:
                return
        blocks = {b.label: b.instrs for b in f.blocks}
        root = _State(f.entry, 0, dict(zip(f.params, args)), {r: {} for r in sizes},
                      [], [], list(pc0), 0, dict(witness))
        stack = [root]
        produced = 0
        cap = self.limits.step_cap
        while stack:
            if produced >= self.limits.path_cap or (
                    self.deadline is not None and time.monotonic() > self.deadline):
                self.stats.truncated = True
                return
            st = stack.pop()
            if isinstance(st, _State):
                st = self._run(st, blocks, init, sizes, cap)
            if isinstance(st, SymOutcome):
                produced += 1
                self.stats.paths += 1
                if st.status == LIMIT:
                    self.stats.limit_paths += 1
                yield st
            else:
                stack.extend(reversed(st))

    def _finish(self, st: _State, status, kind=None, tag=None, ret=None) -> SymOutcome:
        final = {r: dict(m) for r, m in st.store.items() if m}
        return SymOutcome(status, kind, tag, ret, final, tuple(st.log), tuple(st.events),
                          tuple(st.pc), st.steps, st.witness)

    def _run(self, st: _State, blocks, init, sizes, cap):
        """Advance st until it terminates (SymOutcome) or forks (list of states)."""
        regs = st.regs
        while True:
            instrs = blocks[st.label]
            ins = instrs[st.index]
            if st.steps >= cap:
                st.steps = cap
                return self._finish(st, LIMIT)
            st.steps += 1
            st.index += 1
            if isinstance(ins, Const):
                regs[ins.dst] = T.const(ins.value, ins.width)
            elif isinstance(ins, BinOp):
                a, b = regs[ins.a], regs[ins.b]
                if ins.op in ("udiv", "urem", "sdiv", "srem") and not isinstance(b, T.Const) \
                        or ins.op == "sdiv":
                    w = ins.width
                    faults = [("div0", T.cmp("eq", b, T.const(0, w)))]
                    if ins.op == "sdiv":
                        faults.append(("ovf", T.bool_and(T.cmp("eq", a, T.const(1 << (w - 1), w)),
                                                         T.cmp("eq", b, T.const(mask(w), w)))))
                    done, st = self._fault_forks(st, faults)
                    if st is not None:
                        regs = st.regs
                        regs[ins.dst] = T.binop(ins.op, a, b)
                    if done:
                        return done + ([st] if st is not None else [])
                    if st is None:
                        return []
                    continue
                if ins.op in ("udiv", "urem", "srem") and b.bits == 0:
                    return self._finish(st, FAULTED, "div0")
                regs[ins.dst] = T.binop(ins.op, a, b)
            elif isinstance(ins, UnOp):
                regs[ins.dst] = T.unop(ins.op, regs[ins.a])
            elif isinstance(ins, Cmp):
                regs[ins.dst] = T.cmp(ins.op, regs[ins.a], regs[ins.b])
            elif isinstance(ins, Extend):
                regs[ins.dst] = T.extend(ins.kind, ins.to_width, regs[ins.src])
            elif isinstance(ins, Trunc):
                regs[ins.dst] = T.trunc(ins.to_width, regs[ins.src])
            elif isinstance(ins, Load):
                addr = regs[ins.addr]
                size = sizes[ins.region]
                if not isinstance(addr, T.Const):
                    if size <= mask(addr.width):
                        # reads entirely past the region are zero
                        splits = self._split(st, T.cmp("ule", T.const(size, addr.width), addr))
                    else:
                        splits = [(st, False)]
                    out = []
                    for s, outside in splits:
                        if outside:
                            s.regs[ins.dst] = T.const(0, 8 * ins.size)
                            out.append(s)
                        else:
                            out.extend(self._concretize(s, ins.addr))
                    return out
                off = addr.bits
                parts = [self._read_byte(st, init, sizes, ins.region, off + i) for i in range(ins.size)]
                regs[ins.dst] = _concat(parts)
            elif isinstance(ins, Store):
                addr = regs[ins.addr]
                size = sizes[ins.region]
                if not isinstance(addr, T.Const):
                    limit = size - ins.size
                    if limit < 0:
                        oob = T.TRUE
                    elif limit >= mask(addr.width):
                        oob = T.FALSE
                    else:
                        oob = T.cmp("ult", T.const(limit, addr.width), addr)
                    done, rest = self._fault_forks(st, [("oob", oob)])
                    if rest is not None:
                        done = done + self._concretize(rest, ins.addr)
                    return done
                off = addr.bits
                if off + ins.size > size:
                    return self._finish(st, FAULTED, "oob")
                value = regs[ins.value]
                for i in range(ins.size):
                    byte = value if ins.size == 1 else T.trunc(8, T.binop("lshr", value, T.const(8 * i, value.width)))
                    st.store[ins.region][off + i] = byte
                    st.log.append((ins.region, off + i, byte))
            elif isinstance(ins, Emit):
                st.events.append((ins.tag, tuple(regs[r] for r in ins.srcs)))
            elif isinstance(ins, Br):
                cond = regs[ins.cond]
                if isinstance(cond, T.Const):
                    self._goto(st, ins.then if cond.bits else ins.orelse)
                    continue
                succ = self._split(st, cond)
                for s, taken in succ:
                    self._goto(s, ins.then if taken else ins.orelse)
                if len(succ) == 1:
                    st = succ[0][0]
                    regs = st.regs
                    continue
                return [s for s, _ in succ]
            elif isinstance(ins, Jmp):
                self._goto(st, ins.label)
            elif isinstance(ins, Ret):
                return self._finish(st, RETURNED, ret=regs[ins.src])
            elif isinstance(ins, Fault):
                return self._finish(st, FAULTED, "explicit", ins.tag)

    @staticmethod
    def _goto(st: _State, label: str) -> None:
        st.label = label
        st.index = 0

    def _fault_forks(self, st: _State, faults):
        """Split off fault paths, fault branch first.

        Returns (fault outcomes, surviving no-fault state or None).
        """
        outcomes: list = []
        cur = st
        for kind, cond in faults:
            nxt = None
            for s, taken in self._split(cur, cond):
                if taken:
                    outcomes.append(self._finish(s, FAULTED, kind))
                else:
                    nxt = s
            if nxt is None:
                return outcomes, None
            cur = nxt
        return outcomes, cur

    def _concretize(self, st: _State, reg: str) -> list[_State]:
        """Fork over the feasible values of an address register and re-run the
        current instruction with that register made concrete."""
        forks = self._address_values(st, st.regs[reg])
        if forks is None:
            return []
        out = []
        for s, v in forks:
            s.index -= 1
            s.steps -= 1
            s.regs[reg] = T.const(v, s.regs[reg].width)
            out.append(s)
        return out


def _concat(parts: list[Term]) -> Term:
    """Little-endian byte terms -> one term of width 8*len(parts)."""
    if len(parts) == 1:
        return parts[0]
    w = 8 * len(parts)
    acc = T.extend("zext", w, parts[0])
    for i, p in enumerate(parts[1:], start=1):
        acc = T.binop("or", acc, T.binop("shl", T.extend("zext", w, p), T.const(8 * i, w)))
    return acc


@dataclass(frozen=True)
class HarnessOutcome:
    """One target path followed by one inner path under the shared pc.

    ``inner`` is None when the target path did not return; such a pair ends at
    the target.
    """

    target: SymOutcome
    inner: SymOutcome | None
    pc: tuple[Term, ...]


def run_harness(explorer: Explorer, target: FunctionDef, inner: FunctionDef,
                target_args: Sequence[Term], target_init: Mapping[str, list],
                inner_args: Sequence[Term], inner_init: Mapping[str, list],
                pc0: Sequence[Term] = ()) -> Iterator[HarnessOutcome]:
    """Run the target, then the adapted inner function on every target path."""
    for t_out in explorer.explore(target, target_args, target_init, pc0):
        if not t_out.returned:
            yield HarnessOutcome(t_out, None, t_out.pc)
            continue
        for i_out in explorer.explore(inner, inner_args, inner_init, t_out.pc,
                                      witness=dict(t_out.witness)):
            yield HarnessOutcome(t_out, i_out, i_out.pc)
