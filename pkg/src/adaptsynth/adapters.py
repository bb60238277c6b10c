"""Adapter families: concrete adapters, counting, seeded enumeration and the
selector-variable encoding used by symbolic adapter search.

Argument expressions are ``ConstVal``, ``TargetArg``, ``TypeConv`` or an
``ArithNode`` tree. Memory mappings move arrays of entries between a target
region and an inner region, extending or truncating each entry.

Region correspondence, used for both inner-input construction and side-effect
comparison:

* an inner region that some mapping writes into gets the mapped spans and
  zeros elsewhere;
* any other inner region copies the same-named target region (truncated or
  zero-padded), or is zero if the target has none;
* a target region with neither an inner namesake nor a mapping out of it is
  compared against its own initial contents.
"""
from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence, Union

from . import term as T
from .bitvec import BitVecValue, mask, sext
from .interp import InputVector
from .ir import FunctionDef
from .solver import VarDomain
from .term import Term

CONV_OPS = ("identity", "sext8", "sext16", "sext32", "zext8", "zext16", "zext32", "tobool")
RET_KINDS = ("identity", "const0", "const1", "sext8", "zext8", "sext32", "zext32", "tobool")
ARITH_UNARY = ("not", "neg")
ARITH_BINARY = ("add", "sub", "mul", "and", "or", "xor", "shl", "lshr", "ashr")
ARITH_OPS = ARITH_UNARY + ARITH_BINARY
EXTENSIONS = ("zero", "sign", "truncate-low")
FAMILY_KINDS = ("argsub", "typeconv", "arith", "memsub")

M64 = mask(64)


class MappingOutOfRange(ValueError):
    pass


class SideConditionViolated(ValueError):
    pass


# --- adapter values ---------------------------------------------------------

@dataclass(frozen=True)
class ConstVal:
    value: int

    def __post_init__(self):
        object.__setattr__(self, "value", self.value & M64)


@dataclass(frozen=True)
class TargetArg:
    index: int


@dataclass(frozen=True)
class TypeConv:
    op: str
    index: int

    def __post_init__(self):
        if self.op not in CONV_OPS:
            raise ValueError(f"unknown conversion {self.op}")


@dataclass(frozen=True)
class ArithNode:
    op: str
    args: tuple  # of ArgExpr (ConstVal | TargetArg | ArithNode)

    def __post_init__(self):
        want = 1 if self.op in ARITH_UNARY else 2 if self.op in ARITH_BINARY else None
        if want is None or len(self.args) != want:
            raise ValueError(f"bad arithmetic node {self.op}/{len(self.args)}")


ArgExpr = Union[ConstVal, TargetArg, TypeConv, ArithNode]


@dataclass(frozen=True)
class MemMapping:
    t_region: str
    t_off: int
    i_region: str
    i_off: int
    n: int
    t_size: int
    i_size: int
    ext: str

    def __post_init__(self):
        if self.n < 1 or self.t_size not in (1, 2, 4, 8) or self.i_size not in (1, 2, 4, 8):
            raise ValueError(f"bad mapping {self}")
        if self.ext not in EXTENSIONS:
            raise ValueError(f"unknown extension {self.ext}")
        if self.i_size > self.t_size and self.ext == "truncate-low":
            raise ValueError("widening mapping needs zero or sign extension")
        if self.i_size <= self.t_size and self.ext != "truncate-low":
            raise ValueError("non-widening mapping must use truncate-low")

    @property
    def t_end(self) -> int:
        return self.t_off + self.n * self.t_size

    @property
    def i_end(self) -> int:
        return self.i_off + self.n * self.i_size

    def pairs(self) -> Iterator[tuple[int, int]]:
        """(target offset, inner offset) of every compared byte."""
        k = min(self.t_size, self.i_size)
        for e in range(self.n):
            for j in range(k):
                yield self.t_off + e * self.t_size + j, self.i_off + e * self.i_size + j


@dataclass(frozen=True)
class RetExpr:
    kind: str = "identity"

    def __post_init__(self):
        if self.kind not in RET_KINDS:
            raise ValueError(f"unknown return adapter {self.kind}")


@dataclass(frozen=True)
class AdapterSpec:
    args: tuple[ArgExpr, ...]
    mem: tuple[MemMapping, ...] = ()
    ret: RetExpr = RetExpr()

    def to_json(self) -> dict:
        return {"args": [_arg_json(a) for a in self.args],
                "mem": [{"tRegion": m.t_region, "tOff": m.t_off, "iRegion": m.i_region,
                         "iOff": m.i_off, "n": m.n, "tSize": m.t_size, "iSize": m.i_size,
                         "ext": m.ext} for m in self.mem],
                "ret": {"kind": self.ret.kind}}

    @classmethod
    def from_json(cls, d: dict) -> AdapterSpec:
        mem = tuple(MemMapping(m["tRegion"], m["tOff"], m["iRegion"], m["iOff"], m["n"],
                               m["tSize"], m["iSize"], m["ext"]) for m in d.get("mem", []))
        return cls(tuple(_arg_from_json(a) for a in d["args"]), mem,
                   RetExpr(d.get("ret", {}).get("kind", "identity")))

    def describe(self) -> str:
        args = ", ".join(describe_arg(a) for a in self.args)
        out = f"A = ({args})"
        if self.mem:
            out += "; mem = [" + ", ".join(
                f"{m.t_region}+{m.t_off}:{m.n}x{m.t_size} -> {m.i_region}+{m.i_off}:{m.n}x{m.i_size} {m.ext}"
                for m in self.mem) + "]"
        if self.ret.kind != "identity":
            out += f"; R = {self.ret.kind}"
        return out


def _arg_json(a: ArgExpr) -> dict:
    if isinstance(a, ConstVal):
        return {"kind": "const", "value": a.value}
    if isinstance(a, TargetArg):
        return {"kind": "arg", "index": a.index}
    if isinstance(a, TypeConv):
        return {"kind": "conv", "conv": a.op, "index": a.index}
    return {"kind": "arith", "tree": _tree_json(a)}


def _tree_json(a):
    if isinstance(a, ArithNode):
        return [a.op, *(_tree_json(c) for c in a.args)]
    if isinstance(a, ConstVal):
        return {"value": a.value}
    return {"index": a.index}


def _arg_from_json(d: dict) -> ArgExpr:
    kind = d["kind"]
    if kind == "const":
        return ConstVal(d["value"])
    if kind == "arg":
        return TargetArg(d["index"])
    if kind == "conv":
        return TypeConv(d["conv"], d["index"])
    return _tree_from_json(d["tree"])


def _tree_from_json(x):
    if isinstance(x, list):
        return ArithNode(x[0], tuple(_tree_from_json(c) for c in x[1:]))
    if "value" in x:
        return ConstVal(x["value"])
    return TargetArg(x["index"])


def describe_arg(a: ArgExpr) -> str:
    if isinstance(a, ConstVal):
        v = a.value
        return str(v) if v < 1 << 16 else str(v - (1 << 64)) if v >> 63 else hex(v)
    if isinstance(a, TargetArg):
        return f"x{a.index}"
    if isinstance(a, TypeConv):
        return f"x{a.index}" if a.op == "identity" else f"{a.op}(x{a.index})"
    if a.op in ARITH_UNARY:
        sym = "~" if a.op == "not" else "-"
        return f"{sym}{describe_arg(a.args[0])}"
    sym = {"add": "+", "sub": "-", "mul": "*", "and": "&", "or": "|", "xor": "^",
           "shl": "<<", "lshr": ">>", "ashr": ">>s"}[a.op]
    return f"({describe_arg(a.args[0])} {sym} {describe_arg(a.args[1])})"


# --- concrete semantics -----------------------------------------------------

def conv_value(op: str, v: int) -> int:
    if op == "identity":
        return v
    if op == "tobool":
        return 1 if v else 0
    w = int(op[4:])
    if op.startswith("sext"):
        return sext(v & mask(w), w, 64)
    return v & mask(w)


def ret_value(kind: str, v: int) -> int:
    if kind == "const0":
        return 0
    if kind == "const1":
        return 1
    return conv_value(kind, v)


def eval_arg(a: ArgExpr, args: Sequence[int]) -> int:
    if isinstance(a, ConstVal):
        return a.value
    if isinstance(a, TargetArg):
        return args[a.index]
    if isinstance(a, TypeConv):
        return conv_value(a.op, args[a.index])
    from .bitvec import binop, unop
    vals = [eval_arg(c, args) for c in a.args]
    if a.op in ARITH_UNARY:
        return unop(a.op, vals[0], 64)
    return binop(a.op, vals[0], vals[1], 64)


def _region_sizes_of(f: FunctionDef | None, inp: InputVector) -> dict[str, int]:
    if f is not None:
        return f.region_sizes()
    return {k: len(v) for k, v in inp.region_bytes.items()}


def check_mapping_ranges(mem: Sequence[MemMapping], t_sizes: Mapping[str, int],
                         i_sizes: Mapping[str, int]) -> None:
    for m in mem:
        if m.t_region not in t_sizes or m.t_end > t_sizes[m.t_region]:
            raise MappingOutOfRange(f"target span of {m} leaves region {m.t_region}")
        if m.i_region not in i_sizes or m.i_end > i_sizes[m.i_region]:
            raise MappingOutOfRange(f"inner span of {m} leaves region {m.i_region}")


def map_entries(src: bytes, m: MemMapping) -> bytes:
    """Inner bytes of one mapping's span, from the target region contents."""
    out = bytearray()
    for e in range(m.n):
        base = m.t_off + e * m.t_size
        v = int.from_bytes(src[base:base + m.t_size], "little")
        if m.ext == "sign":
            v = sext(v, 8 * m.t_size, 64)
        out += (v & mask(8 * m.i_size)).to_bytes(m.i_size, "little")
    return bytes(out)


def apply_concrete(a: AdapterSpec, target_in: InputVector, inner: FunctionDef,
                   target: FunctionDef | None = None) -> InputVector:
    """Inner-function input for a concrete adapter and target input."""
    args = target_in.arg_bits
    inner_args = [eval_arg(x, args) for x in a.args]
    if len(inner_args) != inner.arity:
        raise ValueError(f"adapter has {len(inner_args)} args, {inner.name} takes {inner.arity}")
    t_sizes = _region_sizes_of(target, target_in)
    i_sizes = inner.region_sizes()
    check_mapping_ranges(a.mem, t_sizes, i_sizes)

    def t_bytes(r):
        data = target_in.region_bytes.get(r)
        return bytes(data) if data is not None else bytes(t_sizes[r])

    regions = {}
    mapped_into = {m.i_region for m in a.mem}
    for r, size in i_sizes.items():
        if r in mapped_into:
            buf = bytearray(size)
            for m in a.mem:
                if m.i_region == r:
                    buf[m.i_off:m.i_end] = map_entries(t_bytes(m.t_region), m)
            regions[r] = bytes(buf)
        elif r in t_sizes:
            src = t_bytes(r)[:size]
            regions[r] = src + bytes(size - len(src))
        else:
            regions[r] = bytes(size)
    return InputVector(tuple(BitVecValue(64, v) for v in inner_args), regions)


def apply_to_ret(r: RetExpr, value):
    """Adapt an inner return value: BitVecValue, int or Term in, same kind out."""
    if isinstance(value, Term):
        return ret_term(r.kind, value)
    if isinstance(value, BitVecValue):
        return BitVecValue(64, ret_value(r.kind, value.bits))
    return ret_value(r.kind, value)


# --- term semantics ---------------------------------------------------------

def conv_term(op: str, v: Term) -> Term:
    if op == "identity":
        return v
    if op == "tobool":
        return T.extend("zext", 64, T.cmp("ne", v, T.const(0)))
    w = int(op[4:])
    return T.extend("sext" if op.startswith("sext") else "zext", 64, T.trunc(w, v))


def ret_term(kind: str, v: Term) -> Term:
    if kind == "const0":
        return T.const(0)
    if kind == "const1":
        return T.const(1)
    return conv_term(kind, v)


def arg_term(a: ArgExpr, args: Sequence[Term]) -> Term:
    if isinstance(a, ConstVal):
        return T.const(a.value)
    if isinstance(a, TargetArg):
        return args[a.index]
    if isinstance(a, TypeConv):
        return conv_term(a.op, args[a.index])
    kids = [arg_term(c, args) for c in a.args]
    if a.op in ARITH_UNARY:
        return T.unop(a.op, kids[0])
    return T.binop(a.op, kids[0], kids[1])


def _mapped_byte_term(src: Sequence[Term], m: MemMapping, i_off: int) -> Term:
    rel = i_off - m.i_off
    e, k = divmod(rel, m.i_size)
    base = m.t_off + e * m.t_size
    if k < m.t_size:
        return src[base + k]
    if m.ext == "zero":
        return T.const(0, 8)
    return T.binop("ashr", src[base + m.t_size - 1], T.const(7, 8))


@dataclass
class _MemChoice:
    """Per-slot guarded mapping alternatives (guards are i1 terms)."""

    slots: list[list[tuple[Term, MemMapping]]]

    @classmethod
    def of(cls, mem: Sequence[MemMapping]) -> _MemChoice:
        return cls([[(T.TRUE, m)] for m in mem])

    def into(self, region: str) -> Term:
        return T.disj(g for slot in self.slots for g, m in slot if m.i_region == region)

    def out_of(self, region: str) -> Term:
        return T.disj(g for slot in self.slots for g, m in slot if m.t_region == region)


def inner_init_terms(choice: _MemChoice, t_init: Mapping[str, Sequence[Term]],
                     inner: FunctionDef) -> dict[str, list[Term]]:
    out = {}
    zero = T.const(0, 8)
    for r in inner.regions:
        mapped = choice.into(r.name)
        src = t_init.get(r.name)
        cells = []
        for off in range(r.size):
            fallback = src[off] if src is not None and off < len(src) else zero
            byte = T.ite(mapped, zero, fallback)
            for slot in choice.slots:
                for g, m in slot:
                    if m.i_region == r.name and m.i_off <= off < m.i_end:
                        byte = T.ite(g, _mapped_byte_term(t_init[m.t_region], m, off), byte)
            cells.append(byte)
        out[r.name] = cells
    return out


@dataclass(frozen=True)
class MemPair:
    """A compared byte location. ``i_region`` None: compare against the target's initial byte."""

    guard: Term
    t_region: str
    t_off: int
    i_region: str | None
    i_off: int


def memory_pairs(choice: _MemChoice, target: FunctionDef, inner: FunctionDef) -> list[MemPair]:
    out = []
    t_sizes, i_sizes = target.region_sizes(), inner.region_sizes()
    for slot in choice.slots:
        for g, m in slot:
            for t_off, i_off in m.pairs():
                out.append(MemPair(g, m.t_region, t_off, m.i_region, i_off))
    for r, size in i_sizes.items():
        if r in t_sizes:
            g = T.bool_not(choice.into(r))
            for off in range(min(size, t_sizes[r])):
                out.append(MemPair(g, r, off, r, off))
    for r, size in t_sizes.items():
        if r not in i_sizes:
            g = T.bool_not(choice.out_of(r))
            for off in range(size):
                out.append(MemPair(g, r, off, None, off))
    return [p for p in out if not (isinstance(p.guard, T.Const) and p.guard.bits == 0)]


def concrete_memory_pairs(a: AdapterSpec, target: FunctionDef, inner: FunctionDef) -> list[MemPair]:
    return memory_pairs(_MemChoice.of(a.mem), target, inner)


def adapt_terms(a: AdapterSpec, target: FunctionDef, inner: FunctionDef,
                t_args: Sequence[Term], t_init: Mapping[str, Sequence[Term]]):
    """Inner (args, region init) terms for a concrete adapter."""
    check_mapping_ranges(a.mem, target.region_sizes(), inner.region_sizes())
    args = [arg_term(x, t_args) for x in a.args]
    return args, inner_init_terms(_MemChoice.of(a.mem), t_init, inner)


# --- families ---------------------------------------------------------------

@dataclass(frozen=True)
class AdapterFamily:
    kind: str = "argsub"
    constants: tuple[int, ...] = ()
    allow_ret: bool = False
    depth: int = 2
    ops: tuple[str, ...] = ARITH_OPS
    # each target argument feeds at most one inner argument
    distinct_args: bool = False
    # count-only override for the number of constants (e.g. 2**32)
    const_count: int | None = None
    mem_slots: int = 2
    mem_sizes: tuple[int, ...] = (1, 2, 4, 8)
    mem_align: int = 4
    pow2: bool = True

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        object.__setattr__(self, "constants", tuple(dict.fromkeys(c & M64 for c in self.constants)))
        bad = set(self.ops) - set(ARITH_OPS)
        if bad:
            raise ValueError(f"unknown arithmetic ops {sorted(bad)}")
        if self.depth < 0 or self.mem_slots < 0 or self.mem_align < 1:
            raise ValueError("depth, mem_slots and mem_align must be non-negative")

    @property
    def n_constants(self) -> int:
        return self.const_count if self.const_count is not None else len(self.constants)

    @property
    def ret_kinds(self) -> tuple[str, ...]:
        return RET_KINDS if self.allow_ret else ("identity",)

    @property
    def countable_only(self) -> bool:
        return self.const_count is not None and self.const_count != len(self.constants)


def default_adapter(fam: AdapterFamily, t_arity: int, i_arity: int, identity: bool = False) -> AdapterSpec:
    """All-zero arguments, or the positional identity when ``identity`` and arities allow."""
    if identity and i_arity <= t_arity:
        return AdapterSpec(tuple(TargetArg(i) for i in range(i_arity)))
    return AdapterSpec(tuple(ConstVal(0) for _ in range(i_arity)))


def _leaf_options(fam: AdapterFamily, t_arity: int) -> list[ArgExpr]:
    return [TargetArg(j) for j in range(t_arity)] + [ConstVal(c) for c in fam.constants]


def _tree_counts(fam: AdapterFamily, t_arity: int) -> list[int]:
    leaves = t_arity + fam.n_constants
    u = sum(1 for o in fam.ops if o in ARITH_UNARY)
    b = sum(1 for o in fam.ops if o in ARITH_BINARY)
    counts = [leaves]
    for _ in range(fam.depth):
        prev = counts[-1]
        counts.append(leaves + u * prev + b * prev * prev)
    return counts


def per_arg_count(fam: AdapterFamily, t_arity: int) -> int:
    if fam.kind == "typeconv":
        return fam.n_constants + len(CONV_OPS) * t_arity
    if fam.kind == "arith":
        return _tree_counts(fam, t_arity)[-1]
    return fam.n_constants + t_arity


def _tree_nth(fam: AdapterFamily, t_arity: int, depth: int, idx: int, counts) -> ArgExpr:
    leaves = _leaf_options(fam, t_arity)
    if idx < len(leaves):
        return leaves[idx]
    idx -= len(leaves)
    prev = counts[depth - 1]
    unary = [o for o in fam.ops if o in ARITH_UNARY]
    binary = [o for o in fam.ops if o in ARITH_BINARY]
    if idx < len(unary) * prev:
        op, k = divmod(idx, prev)
        return ArithNode(unary[op], (_tree_nth(fam, t_arity, depth - 1, k, counts),))
    idx -= len(unary) * prev
    op, rest = divmod(idx, prev * prev)
    l, r = divmod(rest, prev)
    return ArithNode(binary[op], (_tree_nth(fam, t_arity, depth - 1, l, counts),
                                  _tree_nth(fam, t_arity, depth - 1, r, counts)))


def arg_option(fam: AdapterFamily, t_arity: int, idx: int) -> ArgExpr:
    """The idx-th option for one inner argument (non-distinct families)."""
    if fam.kind == "typeconv":
        if idx < len(CONV_OPS) * t_arity:
            op, j = divmod(idx, t_arity)
            return TargetArg(j) if op == 0 else TypeConv(CONV_OPS[op], j)
        return ConstVal(fam.constants[idx - len(CONV_OPS) * t_arity])
    if fam.kind == "arith":
        counts = _tree_counts(fam, t_arity)
        return _tree_nth(fam, t_arity, fam.depth, idx, counts)
    return _leaf_options(fam, t_arity)[idx]


def _arg_uses(a: ArgExpr) -> set[int]:
    if isinstance(a, (TargetArg, TypeConv)):
        return {a.index}
    if isinstance(a, ArithNode):
        return set().union(*(_arg_uses(c) for c in a.args))
    return set()


def mapping_options(fam: AdapterFamily, target: FunctionDef, inner: FunctionDef) -> list[MemMapping]:
    """Every single mapping of the family, sorted by inner region then offset."""
    if fam.kind != "memsub":
        return []
    out = []
    for tr in target.regions:
        for ir_ in inner.regions:
            for ts in fam.mem_sizes:
                for is_ in fam.mem_sizes:
                    exts = ("zero", "sign") if is_ > ts else ("truncate-low",)
                    for t_off in range(0, tr.size, fam.mem_align):
                        for i_off in range(0, ir_.size, fam.mem_align):
                            n_max = min((tr.size - t_off) // ts, (ir_.size - i_off) // is_)
                            ns = range(1, n_max + 1)
                            if fam.pow2:
                                ns = [n for n in ns if n & (n - 1) == 0]
                            for n in ns:
                                for ext in exts:
                                    out.append(MemMapping(tr.name, t_off, ir_.name, i_off,
                                                          n, ts, is_, ext))
    region_rank = {r.name: i for i, r in enumerate(inner.regions)}
    out.sort(key=lambda m: (region_rank[m.i_region], m.i_off, m.t_region, m.t_off, m.n,
                            m.t_size, m.i_size, m.ext))
    return out


def _compatible(a: MemMapping, b: MemMapping, rank) -> bool:
    """b may follow a in a canonical (sorted, non-overlapping) mapping list."""
    ka, kb = rank[a.i_region], rank[b.i_region]
    if ka != kb:
        return ka < kb
    return a.i_end <= b.i_off


def mapping_sets(fam: AdapterFamily, target: FunctionDef, inner: FunctionDef) -> list[tuple[MemMapping, ...]]:
    if fam.kind != "memsub":
        return [()]
    opts = mapping_options(fam, target, inner)
    rank = {r.name: i for i, r in enumerate(inner.regions)}
    out: list[tuple[MemMapping, ...]] = [()]
    frontier = [((), -1)]
    for _ in range(fam.mem_slots):
        nxt = []
        for chosen, last in frontier:
            for k in range(last + 1, len(opts)):
                if chosen and not _compatible(chosen[-1], opts[k], rank):
                    continue
                c = chosen + (opts[k],)
                out.append(c)
                nxt.append((c, k))
        frontier = nxt
    return out


def mapping_set_count(fam: AdapterFamily, target: FunctionDef | None, inner: FunctionDef | None) -> int:
    if fam.kind != "memsub":
        return 1
    if target is None or inner is None:
        raise ValueError("memory substitution families need both functions to count")
    return len(mapping_sets(fam, target, inner))


def arg_space_count(fam: AdapterFamily, t_arity: int, i_arity: int) -> int:
    if fam.distinct_args:
        if fam.kind == "arith":
            raise ValueError("distinct-argument counting is defined for substitution families only")
        per_target = len(CONV_OPS) if fam.kind == "typeconv" else 1
        c = fam.n_constants
        return sum(math.comb(i_arity, k) * math.perm(t_arity, k) * per_target ** k * c ** (i_arity - k)
                   for k in range(min(i_arity, t_arity) + 1))
    return per_arg_count(fam, t_arity) ** i_arity


def family_size(fam: AdapterFamily, t_arity: int, i_arity: int,
                target: FunctionDef | None = None, inner: FunctionDef | None = None) -> int:
    """Exact number of distinct adapters in the family."""
    return (arg_space_count(fam, t_arity, i_arity) * len(fam.ret_kinds)
            * mapping_set_count(fam, target, inner))


class FamilySpace:
    """Index <-> adapter bijection for one family and function pair."""

    def __init__(self, fam: AdapterFamily, t_arity: int, i_arity: int,
                 target: FunctionDef | None = None, inner: FunctionDef | None = None):
        if fam.countable_only:
            raise ValueError("family has a count-only constant set and cannot be enumerated")
        self.fam, self.t_arity, self.i_arity = fam, t_arity, i_arity
        self.mem_sets = mapping_sets(fam, target, inner) if fam.kind == "memsub" else [()]
        self.rets = fam.ret_kinds
        self._distinct: list | None = None
        if fam.distinct_args:
            per = per_arg_count(fam, t_arity)
            combos = []
            for idxs in itertools.product(range(per), repeat=i_arity):
                opts = [arg_option(fam, t_arity, k) for k in idxs]
                used = [u for o in opts for u in _arg_uses(o)]
                if len(used) == len(set(used)):
                    combos.append(tuple(opts))
            self._distinct = combos
            self.arg_count = len(combos)
        else:
            self.per_arg = per_arg_count(fam, t_arity)
            self.arg_count = self.per_arg ** i_arity
        self.size = self.arg_count * len(self.rets) * len(self.mem_sets)

    def __len__(self):
        return self.size

    def nth(self, idx: int) -> AdapterSpec:
        if not 0 <= idx < self.size:
            raise IndexError(idx)
        idx, r = divmod(idx, len(self.rets))
        idx, m = divmod(idx, len(self.mem_sets))
        if self._distinct is not None:
            args = self._distinct[idx]
        else:
            args = []
            for _ in range(self.i_arity):
                idx, k = divmod(idx, self.per_arg)
                args.append(arg_option(self.fam, self.t_arity, k))
            args = tuple(args)
        return AdapterSpec(args, self.mem_sets[m], RetExpr(self.rets[r]))


SHUFFLE_LIMIT = 1 << 20


def permutation(n: int, seed: int) -> Iterator[int]:
    """Seeded pseudorandom permutation of range(n), lazily for large n."""
    if n <= SHUFFLE_LIMIT:
        order = list(range(n))
        random.Random(seed).shuffle(order)
        yield from order
        return
    # balanced Feistel network over the next even power of two, cycle-walking
    # values that fall outside [0, n)
    bits = max(2, (n - 1).bit_length())
    bits += bits & 1
    half = bits // 2
    hmask = (1 << half) - 1
    rng = random.Random(seed)
    keys = [rng.getrandbits(64) for _ in range(4)]

    def enc(x):
        l, r = x >> half, x & hmask
        for k in keys:
            l, r = r, l ^ (hash((r, k)) & hmask)
        return (l << half) | r

    for i in range(n):
        x = enc(i)
        while x >= n:
            x = enc(x)
        yield x


def enumerate_family(fam: AdapterFamily, t_arity: int, i_arity: int, seed: int = 0,
                     target: FunctionDef | None = None,
                     inner: FunctionDef | None = None) -> Iterator[AdapterSpec]:
    space = FamilySpace(fam, t_arity, i_arity, target, inner)
    for idx in permutation(space.size, seed):
        yield space.nth(idx)


# --- symbolic encoding ------------------------------------------------------

def _sel(v: Term, k: int) -> Term:
    return T.cmp("eq", v, T.const(k, v.width))


def _in_set(v: Term, values) -> Term:
    return T.disj(_sel(v, c) for c in values)


def _select_arg(val: Term, args: Sequence[Term]) -> Term:
    out = args[-1] if args else T.const(0)
    for j in range(len(args) - 2, -1, -1):
        out = T.ite(_sel(val, j), args[j], out)
    return out


@dataclass
class SymbolicAdapter:
    """Selector variables, side conditions and the terms they induce."""

    fam: AdapterFamily
    t_arity: int
    i_arity: int
    domains: list[VarDomain]
    side_conditions: list[Term]
    arg_terms: list[Term]
    ret_fn: object                     # Term -> Term
    mem_choice: _MemChoice
    mem_options: list[MemMapping]
    decoders: list = field(default_factory=list)
    target_args: list[Term] = field(default_factory=list)

    @property
    def variables(self) -> list[str]:
        return [d.name for d in self.domains]

    def ret_term(self, inner_ret: Term) -> Term:
        return self.ret_fn(inner_ret)

    def inner_inputs(self, target: FunctionDef, inner: FunctionDef,
                     t_init: Mapping[str, Sequence[Term]]):
        return list(self.arg_terms), inner_init_terms(self.mem_choice, t_init, inner)

    def memory_pairs(self, target: FunctionDef, inner: FunctionDef) -> list[MemPair]:
        return memory_pairs(self.mem_choice, target, inner)

    def check(self, model: Mapping[str, int]) -> bool:
        for d in self.domains:
            if d.name not in model or (model[d.name] & mask(d.width)) not in d.values:
                return False
        return all(T.eval_many(self.side_conditions, model))

    def decode(self, model) -> AdapterSpec:
        m = {k: (v.bits if isinstance(v, BitVecValue) else v) for k, v in model.items()}
        if not self.check(m):
            raise SideConditionViolated("model violates the side conditions")
        args = tuple(dec(m) for dec in self.decoders[:self.i_arity])
        mem = self.decoders[self.i_arity](m)
        ret = self.decoders[self.i_arity + 1](m)
        return AdapterSpec(args, mem, ret)

    def encode(self, a: AdapterSpec) -> dict[str, int]:
        """The unique satisfying model for a family member (inverse of decode)."""
        return _encode(self, a)


def encode_symbolic(fam: AdapterFamily, t_arity: int, i_arity: int,
                    target_args: Sequence[Term], target: FunctionDef | None = None,
                    inner: FunctionDef | None = None) -> SymbolicAdapter:
    """Selector-variable encoding of the family over the given target-argument terms.

    Argument i (1-based in variable names) uses ``y_{i}_type`` and
    ``y_{i}_val``: type 1 takes the constant ``val``; type 0 takes target
    argument number ``val``; types 2..8 (type-conversion families) apply the
    corresponding non-identity conversion to target argument ``val``.
    Arithmetic families give every node of a complete binary tree of the
    family depth its own ``op``/``val`` pair.
    """
    if fam.countable_only:
        raise ValueError("family has a count-only constant set")
    if fam.distinct_args:
        raise ValueError("symbolic encoding does not support distinct-argument families")
    doms: list[VarDomain] = []
    side: list[Term] = []
    decoders = []
    arg_terms = []
    positions = list(range(t_arity))
    consts = list(fam.constants)
    val_values = sorted(set(consts) | set(positions)) or [0]
    targs = list(target_args)
    for i in range(1, i_arity + 1):
        if fam.kind == "arith":
            term, dec = _encode_tree(fam, f"y_{i}", targs, doms, side, val_values)
        else:
            term, dec = _encode_leaf(fam, f"y_{i}", targs, doms, side, val_values)
        arg_terms.append(term)
        decoders.append(dec)

    # memory slots
    opts = mapping_options(fam, target, inner) if fam.kind == "memsub" else []
    slots = []
    sel_vars = []
    if opts:
        for s in range(1, fam.mem_slots + 1):
            v = T.var(f"mem_{s}_sel", 16 if len(opts) < 1 << 16 else 32)
            doms.append(VarDomain(v.name, v.width, tuple(range(len(opts) + 1))))
            sel_vars.append(v)
            slots.append([(_sel(v, k + 1), m) for k, m in enumerate(opts)])
        side.extend(_slot_order_conditions(sel_vars, opts, inner))

    def dec_mem(m, sel_vars=sel_vars, opts=opts):
        return tuple(opts[m[v.name] - 1] for v in sel_vars if m[v.name])
    decoders.append(dec_mem)

    # return adapter
    if fam.allow_ret:
        rv = T.var("r_type", 8)
        doms.append(VarDomain(rv.name, 8, tuple(range(len(RET_KINDS)))))

        def ret_fn(x, rv=rv):
            out = ret_term(RET_KINDS[-1], x)
            for k in range(len(RET_KINDS) - 2, -1, -1):
                out = T.ite(_sel(rv, k), ret_term(RET_KINDS[k], x), out)
            return out
        decoders.append(lambda m: RetExpr(RET_KINDS[m["r_type"]]))
    else:
        def ret_fn(x):
            return x
        decoders.append(lambda m: RetExpr("identity"))
    return SymbolicAdapter(fam, t_arity, i_arity, doms, side, arg_terms, ret_fn,
                           _MemChoice(slots), opts, decoders, targs)


def _leaf_types(fam: AdapterFamily) -> list[int]:
    if fam.kind == "typeconv":
        return list(range(len(CONV_OPS) + 1))   # 0 arg, 1 const, 2..8 conversions
    return [0, 1]


def _leaf_valid(fam, ty: Term, val: Term, t_arity: int, consts) -> Term:
    cases = []
    if t_arity:
        arg_like = _sel(ty, 0)
        if fam.kind == "typeconv":
            arg_like = T.disj([arg_like] + [_sel(ty, k) for k in range(2, len(CONV_OPS) + 1)])
        cases.append(T.bool_and(arg_like, T.cmp("ult", val, T.const(t_arity))))
    if consts:
        cases.append(T.bool_and(_sel(ty, 1), _in_set(val, consts)))
    return T.disj(cases)


def _leaf_term(fam, ty: Term, val: Term, targs) -> Term:
    picked = _select_arg(val, targs)
    out = T.ite(_sel(ty, 1), val, picked)
    if fam.kind == "typeconv":
        for k in range(len(CONV_OPS) - 1, 0, -1):
            out = T.ite(_sel(ty, k + 1), conv_term(CONV_OPS[k], picked), out)
    return out


def _decode_leaf(ty: int, val: int) -> ArgExpr:
    if ty == 1:
        return ConstVal(val)
    if ty == 0:
        return TargetArg(val)
    return TypeConv(CONV_OPS[ty - 1], val)


def _encode_leaf(fam, prefix, targs, doms, side, val_values):
    ty = T.var(f"{prefix}_type", 8)
    val = T.var(f"{prefix}_val", 64)
    doms.append(VarDomain(ty.name, 8, tuple(_leaf_types(fam))))
    doms.append(VarDomain(val.name, 64, tuple(val_values)))
    side.append(_leaf_valid(fam, ty, val, len(targs), fam.constants))
    return _leaf_term(fam, ty, val, targs), (lambda m, a=ty.name, b=val.name: _decode_leaf(m[a], m[b]))


def _encode_tree(fam, prefix, targs, doms, side, val_values):
    """Complete binary tree of depth fam.depth; node 0 is the root, children 2k+1, 2k+2."""
    unary = [o for o in fam.ops if o in ARITH_UNARY]
    binary = [o for o in fam.ops if o in ARITH_BINARY]
    ops = unary + binary
    depth = fam.depth
    n_nodes = 2 ** (depth + 1) - 1
    ops_vars, val_vars = [], []
    for k in range(n_nodes):
        level = (k + 1).bit_length() - 1
        op_vals = [0, 1] + ([2 + j for j in range(len(ops))] if level < depth else [])
        o = T.var(f"{prefix}_n{k}_op", 8)
        v = T.var(f"{prefix}_n{k}_val", 64)
        doms.append(VarDomain(o.name, 8, tuple(op_vals)))
        doms.append(VarDomain(v.name, 64, tuple(val_values)))
        ops_vars.append(o)
        val_vars.append(v)
    canon_op, canon_val = 0, val_values[0]
    t_arity = len(targs)

    def present_children(k):
        o = ops_vars[k]
        has_left = T.cmp("ule", T.const(2, 8), o) if ops else T.FALSE
        has_right = T.cmp("ule", T.const(2 + len(unary), 8), o) if binary else T.FALSE
        return has_left, has_right

    present = [None] * n_nodes
    present[0] = T.TRUE
    for k in range(n_nodes):
        o, v = ops_vars[k], val_vars[k]
        leaf_ok = _leaf_valid(fam, o, v, t_arity, fam.constants)
        internal = T.bool_and(T.cmp("ule", T.const(2, 8), o), _sel(v, canon_val))
        valid = T.bool_or(leaf_ok, internal)
        canonical = T.bool_and(_sel(o, canon_op), _sel(v, canon_val))
        side.append(T.ite(present[k], valid, canonical))
        if 2 * k + 2 < n_nodes:
            hl, hr = present_children(k)
            present[2 * k + 1] = T.bool_and(present[k], hl)
            present[2 * k + 2] = T.bool_and(present[k], hr)

    def node_term(k):
        o, v = ops_vars[k], val_vars[k]
        out = _leaf_term(fam, o, v, targs)
        if 2 * k + 2 < n_nodes:
            left, right = node_term(2 * k + 1), node_term(2 * k + 2)
            for j in range(len(ops) - 1, -1, -1):
                op = ops[j]
                val = T.unop(op, left) if op in ARITH_UNARY else T.binop(op, left, right)
                out = T.ite(_sel(o, 2 + j), val, out)
        return out

    def decode(m, k=0):
        o = m[ops_vars[k].name]
        if o < 2:
            return _decode_leaf(o, m[val_vars[k].name])
        op = ops[o - 2]
        if op in ARITH_UNARY:
            return ArithNode(op, (decode(m, 2 * k + 1),))
        return ArithNode(op, (decode(m, 2 * k + 1), decode(m, 2 * k + 2)))

    return node_term(0), decode


def _table(v: Term, values: Sequence[int], width: int = 64) -> Term:
    """Term for values[v] (v ranging over indices of values)."""
    out = T.const(values[-1], width)
    for k in range(len(values) - 2, -1, -1):
        out = T.ite(_sel(v, k), T.const(values[k], width), out)
    return out


def _slot_order_conditions(sel_vars, opts, inner) -> list[Term]:
    """Used slots come first, in option order, with disjoint inner spans."""
    rank = {r.name: i for i, r in enumerate(inner.regions)}
    region = [0] + [rank[m.i_region] for m in opts]
    start = [0] + [m.i_off for m in opts]
    end = [0] + [m.i_end for m in opts]
    out = []
    for a, b in zip(sel_vars, sel_vars[1:]):
        zero_b = _sel(b, 0)
        ordered = T.bool_and(T.bool_not(_sel(a, 0)), T.cmp("ult", a, b))
        reg_a, reg_b = _table(a, region, 16), _table(b, region, 16)
        disjoint = T.bool_or(T.cmp("ne", reg_a, reg_b),
                             T.cmp("ule", _table(a, end, 16), _table(b, start, 16)))
        out.append(T.bool_or(zero_b, T.bool_and(ordered, disjoint)))
    return out


def _encode(sym: SymbolicAdapter, a: AdapterSpec) -> dict[str, int]:
    fam = sym.fam
    m: dict[str, int] = {}
    val_values = sorted(set(fam.constants) | set(range(sym.t_arity))) or [0]

    def leaf(prefix_type, prefix_val, x):
        if isinstance(x, ConstVal):
            m[prefix_type], m[prefix_val] = 1, x.value
        elif isinstance(x, TargetArg):
            m[prefix_type], m[prefix_val] = 0, x.index
        elif isinstance(x, TypeConv):
            m[prefix_type] = 0 if x.op == "identity" else CONV_OPS.index(x.op) + 1
            m[prefix_val] = x.index
        else:
            raise ValueError(f"{x} is not a leaf")

    for i, x in enumerate(a.args, start=1):
        if fam.kind == "arith":
            unary = [o for o in fam.ops if o in ARITH_UNARY]
            ops = unary + [o for o in fam.ops if o in ARITH_BINARY]
            n_nodes = 2 ** (fam.depth + 1) - 1
            for k in range(n_nodes):
                m[f"y_{i}_n{k}_op"], m[f"y_{i}_n{k}_val"] = 0, val_values[0]

            def put(k, node):
                if isinstance(node, ArithNode):
                    m[f"y_{i}_n{k}_op"] = 2 + ops.index(node.op)
                    put(2 * k + 1, node.args[0])
                    if len(node.args) > 1:
                        put(2 * k + 2, node.args[1])
                else:
                    leaf(f"y_{i}_n{k}_op", f"y_{i}_n{k}_val", node)
            put(0, x)
        else:
            leaf(f"y_{i}_type", f"y_{i}_val", x)
    sel_names = [d.name for d in sym.domains if d.name.startswith("mem_")]
    for s, name in enumerate(sel_names):
        m[name] = sym.mem_options.index(a.mem[s]) + 1 if s < len(a.mem) else 0
    if fam.allow_ret:
        m["r_type"] = RET_KINDS.index(a.ret.kind)
    return m


def adapter_json(a: AdapterSpec) -> str:
    return json.dumps(a.to_json(), sort_keys=True)
