"""Concrete execution of IR functions.

``execute`` compiles each FunctionDef once into a Python closure (cached per
function object) and runs blocks straight-line. When a block would cross the
step cap it hands the live state to the instruction-at-a-time reference
interpreter, which is also exposed as ``execute_reference`` for differential
testing.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import bitvec as bv
from .bitvec import BitVecValue, mask
from .ir import (BinOp, Br, Cmp, Const, Emit, Extend, Fault, FunctionDef, Jmp, Load,
                 Ret, Store, Trunc, UnOp)

RETURNED = "Returned"
FAULTED = "Faulted"
LIMIT = "LimitExceeded"

DEFAULT_STEP_CAP = 4000


@dataclass(frozen=True)
class ExecLimits:
    step_cap: int = DEFAULT_STEP_CAP

    def __post_init__(self):
        if self.step_cap < 1:
            raise ValueError("step_cap must be >= 1")


@dataclass(frozen=True)
class InputVector:
    """Arguments (i64) and initial region contents; absent regions are zero."""

    args: tuple[BitVecValue, ...]
    region_bytes: Mapping[str, bytes] = field(default_factory=dict)

    @classmethod
    def of(cls, args: Sequence[int | BitVecValue], regions: Mapping[str, bytes] | None = None) -> InputVector:
        vals = tuple(a if isinstance(a, BitVecValue) else BitVecValue.of(a) for a in args)
        return cls(vals, {k: bytes(v) for k, v in (regions or {}).items()})

    @property
    def arg_bits(self) -> tuple[int, ...]:
        return tuple(a.bits for a in self.args)

    def __hash__(self):
        return hash((self.args, tuple(sorted(self.region_bytes.items()))))

    def __eq__(self, other):
        if not isinstance(other, InputVector):
            return NotImplemented
        return self.args == other.args and dict(self.region_bytes) == dict(other.region_bytes)

    def to_json(self) -> dict:
        return {"args": [a.bits for a in self.args],
                "regions": {k: bytes(v).hex() for k, v in sorted(self.region_bytes.items())}}

    @classmethod
    def from_json(cls, d: dict) -> InputVector:
        return cls.of(d["args"], {k: bytes.fromhex(v) for k, v in d.get("regions", {}).items()})

    def __repr__(self):
        parts = [", ".join(f"{a.bits:#x}" for a in self.args)]
        for k, v in sorted(self.region_bytes.items()):
            parts.append(f"{k}={bytes(v).hex()}")
        return f"InputVector({'; '.join(parts)})"


Event = tuple[int, tuple[BitVecValue, ...]]


@dataclass(frozen=True)
class ExecutionOutcome:
    status: str
    fault_kind: str | None = None  # div0 | ovf | oob | explicit
    fault_tag: int | None = None
    return_value: BitVecValue | None = None
    final_writes: Mapping[tuple[str, int], int] = field(default_factory=dict)
    write_log: tuple[tuple[str, int, int], ...] = ()
    events: tuple[Event, ...] = ()
    steps: int = 0
    final_memory: Mapping[str, bytes] = field(default_factory=dict, compare=False)

    @property
    def returned(self) -> bool:
        return self.status == RETURNED

    @property
    def faulted(self) -> bool:
        return self.status == FAULTED

    def status_label(self) -> str:
        if self.status == FAULTED:
            if self.fault_kind == "explicit":
                return f"Faulted(explicit({self.fault_tag}))"
            return f"Faulted({self.fault_kind})"
        return self.status

    def __hash__(self):
        return hash(outcome_digest(self))


def outcome_digest(o: ExecutionOutcome) -> bytes:
    """SHA-256 over a canonical rendering of the observable fields.

    The step count is left out: it is bookkeeping rather than behaviour.
    """
    doc = {
        "status": o.status,
        "fault": [o.fault_kind, o.fault_tag],
        "ret": None if o.return_value is None else [o.return_value.width, o.return_value.bits],
        "writes": sorted([r, off, b] for (r, off), b in o.final_writes.items()),
        "log": [list(x) for x in o.write_log],
        "events": [[tag, [[v.width, v.bits] for v in vals]] for tag, vals in o.events],
    }
    text = json.dumps(doc, separators=(",", ":"), sort_keys=True)
    return hashlib.sha256(text.encode()).digest()


# --- shared helpers ---------------------------------------------------------

def _init_memory(f: FunctionDef, inp: InputVector) -> dict[str, bytearray]:
    mem = {}
    for r in f.regions:
        data = inp.region_bytes.get(r.name)
        if data is None:
            mem[r.name] = bytearray(r.size)
        else:
            if len(data) != r.size:
                raise ValueError(f"region {r.name}: {len(data)} bytes supplied, {r.size} declared")
            mem[r.name] = bytearray(data)
    return mem


def _outcome(status, kind, tag, ret, steps, mem, log, events) -> ExecutionOutcome:
    writes = {}
    flat = []
    for region, addr, size, value in log:
        for i in range(size):
            byte = (value >> (8 * i)) & 0xFF
            flat.append((region, addr + i, byte))
            writes[(region, addr + i)] = byte
    return ExecutionOutcome(
        status=status, fault_kind=kind, fault_tag=tag,
        return_value=None if ret is None else BitVecValue(64, ret),
        final_writes=writes, write_log=tuple(flat), events=tuple(events), steps=steps,
        final_memory={k: bytes(v) for k, v in mem.items()},
    )


def _load(buf: bytearray, addr: int, size: int) -> int:
    n = len(buf)
    if addr + size <= n:
        return int.from_bytes(buf[addr:addr + size], "little")
    out = 0
    for i in range(size):
        if addr + i < n:
            out |= buf[addr + i] << (8 * i)
    return out


def check_arity(f: FunctionDef, inp: InputVector) -> None:
    if len(inp.args) != f.arity:
        raise ValueError(f"{f.name} takes {f.arity} args, got {len(inp.args)}")


# --- reference interpreter --------------------------------------------------

def _run_from(f: FunctionDef, regs: dict, mem: dict, log: list, events: list,
              steps: int, label: str, cap: int) -> ExecutionOutcome:
    blocks = {b.label: b.instrs for b in f.blocks}
    widths = f.register_widths()
    while True:
        nxt = None
        for ins in blocks[label]:
            if steps >= cap:
                return _outcome(LIMIT, None, None, None, cap, mem, log, events)
            steps += 1
            if isinstance(ins, Const):
                regs[ins.dst] = ins.value
            elif isinstance(ins, BinOp):
                a, b, w = regs[ins.a], regs[ins.b], ins.width
                if ins.op in bv.DIV_OPS and b == 0:
                    return _outcome(FAULTED, "div0", None, None, steps, mem, log, events)
                if ins.op == "sdiv" and bv.is_sdiv_overflow(a, b, w):
                    return _outcome(FAULTED, "ovf", None, None, steps, mem, log, events)
                regs[ins.dst] = bv.binop(ins.op, a, b, w)
            elif isinstance(ins, UnOp):
                regs[ins.dst] = bv.unop(ins.op, regs[ins.a], ins.width)
            elif isinstance(ins, Cmp):
                regs[ins.dst] = bv.cmp(ins.op, regs[ins.a], regs[ins.b], ins.width)
            elif isinstance(ins, Extend):
                if ins.kind == "sext":
                    regs[ins.dst] = bv.sext(regs[ins.src], ins.from_width, ins.to_width)
                else:
                    regs[ins.dst] = regs[ins.src]
            elif isinstance(ins, Trunc):
                regs[ins.dst] = regs[ins.src] & mask(ins.to_width)
            elif isinstance(ins, Load):
                regs[ins.dst] = _load(mem[ins.region], regs[ins.addr], ins.size)
            elif isinstance(ins, Store):
                buf, addr = mem[ins.region], regs[ins.addr]
                if addr + ins.size > len(buf):
                    return _outcome(FAULTED, "oob", None, None, steps, mem, log, events)
                v = regs[ins.value]
                buf[addr:addr + ins.size] = v.to_bytes(ins.size, "little")
                log.append((ins.region, addr, ins.size, v))
            elif isinstance(ins, Emit):
                events.append((ins.tag, tuple(BitVecValue(widths[r], regs[r]) for r in ins.srcs)))
            elif isinstance(ins, Br):
                nxt = ins.then if regs[ins.cond] else ins.orelse
            elif isinstance(ins, Jmp):
                nxt = ins.label
            elif isinstance(ins, Ret):
                return _outcome(RETURNED, None, None, regs[ins.src], steps, mem, log, events)
            elif isinstance(ins, Fault):
                return _outcome(FAULTED, "explicit", ins.tag, None, steps, mem, log, events)
        label = nxt


def execute_reference(f: FunctionDef, inp: InputVector, lim: ExecLimits = ExecLimits()) -> ExecutionOutcome:
    check_arity(f, inp)
    regs = dict(zip(f.params, inp.arg_bits))
    return _run_from(f, regs, _init_memory(f, inp), [], [], 0, f.entry, lim.step_cap)


# --- compiled interpreter ---------------------------------------------------

def _compile(f: FunctionDef):
    widths = f.register_widths()
    sizes = f.region_sizes()
    regs = sorted(widths)
    rn = {r: f"r{i}" for i, r in enumerate(regs)}
    block_ix = {b.label: i for i, b in enumerate(f.blocks)}
    L = []
    emit = L.append

    emit("def _run(args, mem, cap):")
    emit("    log = []; events = []; steps = 0; lab = 0")
    for r in regs:
        emit(f"    {rn[r]} = 0")
    for i, p in enumerate(f.params):
        emit(f"    {rn[p]} = args[{i}]")
    for name in sizes:
        emit(f"    m_{name} = mem[{name!r}]")
    emit("    while True:")
    live = "{" + ", ".join(f"{r!r}: {rn[r]}" for r in regs) + "}"
    for bi, b in enumerate(f.blocks):
        n = len(b.instrs)
        kw = "if" if bi == 0 else "elif"
        emit(f"        {kw} lab == {bi}:")
        emit(f"            if steps + {n} > cap:")
        emit(f"                return _slow(_f, {live}, mem, log, events, steps, {b.label!r}, cap)")
        ind = "            "
        for k, ins in enumerate(b.instrs):
            at = f"steps + {k + 1}"

            def fault(kind, tag=None):
                return f"return _out('{FAULTED}', {kind!r}, {tag!r}, None, {at}, mem, log, events)"

            if isinstance(ins, Const):
                emit(f"{ind}{rn[ins.dst]} = {ins.value}")
            elif isinstance(ins, BinOp):
                w, m = ins.width, mask(ins.width)
                a, c, d = rn[ins.a], rn[ins.b], rn[ins.dst]
                s = 1 << (w - 1)
                op = ins.op
                if op in bv.DIV_OPS:
                    emit(f"{ind}if {c} == 0: {fault('div0')}")
                if op == "sdiv":
                    emit(f"{ind}if {a} == {s} and {c} == {m}: {fault('ovf')}")
                expr = {
                    "add": f"({a} + {c}) & {m}",
                    "sub": f"({a} - {c}) & {m}",
                    "mul": f"({a} * {c}) & {m}",
                    "and": f"{a} & {c}",
                    "or": f"{a} | {c}",
                    "xor": f"{a} ^ {c}",
                    "udiv": f"{a} // {c}",
                    "urem": f"{a} % {c}",
                    "sdiv": f"_sdiv({a}, {c}, {w})",
                    "srem": f"_srem({a}, {c}, {w})",
                    "shl": f"(({a} << {c}) & {m} if {c} < {w} else 0)",
                    "lshr": f"({a} >> {c} if {c} < {w} else 0)",
                    "ashr": f"((({a} ^ {s}) - {s}) >> ({c} if {c} < {w} else {w - 1})) & {m}",
                }[op]
                emit(f"{ind}{d} = {expr}")
            elif isinstance(ins, UnOp):
                m = mask(ins.width)
                a = rn[ins.a]
                expr = f"{a} ^ {m}" if ins.op == "not" else f"-{a} & {m}"
                emit(f"{ind}{rn[ins.dst]} = {expr}")
            elif isinstance(ins, Cmp):
                a, c = rn[ins.a], rn[ins.b]
                if ins.op in ("slt", "sle"):
                    s = 1 << (ins.width - 1)
                    a, c = f"({a} ^ {s})", f"({c} ^ {s})"
                sym = {"eq": "==", "ne": "!=", "ult": "<", "ule": "<=", "slt": "<", "sle": "<="}[ins.op]
                emit(f"{ind}{rn[ins.dst]} = 1 if {a} {sym} {c} else 0")
            elif isinstance(ins, Extend):
                a = rn[ins.src]
                if ins.kind == "sext":
                    s = 1 << (ins.from_width - 1)
                    emit(f"{ind}{rn[ins.dst]} = (({a} ^ {s}) - {s}) & {mask(ins.to_width)}")
                else:
                    emit(f"{ind}{rn[ins.dst]} = {a}")
            elif isinstance(ins, Trunc):
                emit(f"{ind}{rn[ins.dst]} = {rn[ins.src]} & {mask(ins.to_width)}")
            elif isinstance(ins, Load):
                a, size, buf = rn[ins.addr], ins.size, f"m_{ins.region}"
                emit(f"{ind}{rn[ins.dst]} = int.from_bytes({buf}[{a}:{a} + {size}], 'little') "
                     f"if {a} + {size} <= {sizes[ins.region]} else _load({buf}, {a}, {size})")
            elif isinstance(ins, Store):
                a, size, buf, v = rn[ins.addr], ins.size, f"m_{ins.region}", rn[ins.value]
                emit(f"{ind}if {a} + {size} > {sizes[ins.region]}: {fault('oob')}")
                emit(f"{ind}{buf}[{a}:{a} + {size}] = {v}.to_bytes({size}, 'little')")
                emit(f"{ind}log.append(({ins.region!r}, {a}, {size}, {v}))")
            elif isinstance(ins, Emit):
                vals = "".join(f"_BV({widths[r]}, {rn[r]}), " for r in ins.srcs)
                emit(f"{ind}events.append(({ins.tag}, ({vals})))")
            elif isinstance(ins, Br):
                emit(f"{ind}steps += {n}")
                emit(f"{ind}lab = {block_ix[ins.then]} if {rn[ins.cond]} else {block_ix[ins.orelse]}")
            elif isinstance(ins, Jmp):
                emit(f"{ind}steps += {n}")
                emit(f"{ind}lab = {block_ix[ins.label]}")
            elif isinstance(ins, Ret):
                emit(f"{ind}return _out('{RETURNED}', None, None, {rn[ins.src]}, {at}, mem, log, events)")
            elif isinstance(ins, Fault):
                emit(f"{ind}{fault('explicit', ins.tag)}")
    src = "\n".join(L)
    ns = {
        "_out": _outcome, "_load": _load, "_slow": _run_from, "_f": f, "_BV": BitVecValue,
        "_sdiv": bv.BINOP_FUNCS["sdiv"], "_srem": bv.BINOP_FUNCS["srem"],
    }
    exec(compile(src, f"<ir {f.name}>", "exec"), ns)
    return ns["_run"]


_CACHE: dict[int, tuple[FunctionDef, object]] = {}


def compiled(f: FunctionDef):
    hit = _CACHE.get(id(f))
    if hit is not None and hit[0] is f:
        return hit[1]
    fn = _compile(f)
    _CACHE[id(f)] = (f, fn)
    return fn


def execute(f: FunctionDef, inp: InputVector, lim: ExecLimits = ExecLimits()) -> ExecutionOutcome:
    check_arity(f, inp)
    return compiled(f)(inp.arg_bits, _init_memory(f, inp), lim.step_cap)


def run(f: FunctionDef, args: Sequence[int], regions: Mapping[str, bytes] | None = None,
        step_cap: int = DEFAULT_STEP_CAP) -> ExecutionOutcome:
    """Convenience wrapper taking plain ints."""
    return execute(f, InputVector.of(args, regions), ExecLimits(step_cap))
