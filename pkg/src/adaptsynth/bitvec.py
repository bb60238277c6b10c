"""Fixed-width bitvector values and the integer-level semantics shared by the
interpreter, the term evaluator and the symbolic executor.

All helpers operate on unsigned Python ints already reduced modulo 2**width.
Division by zero and oversized shifts follow SMT-LIB QF_BV conventions so that
term evaluation agrees with an external solver; the interpreter checks its
fault conditions (div0, sdiv overflow) before calling into these.
"""
from __future__ import annotations

from dataclasses import dataclass

WIDTHS = (1, 8, 16, 32, 64)
ACCESS_SIZES = (1, 2, 4, 8)

BINOPS = ("add", "sub", "mul", "udiv", "urem", "sdiv", "srem",
          "and", "or", "xor", "shl", "lshr", "ashr")
UNOPS = ("not", "neg")
CMPOPS = ("eq", "ne", "ult", "ule", "slt", "sle")
DIV_OPS = frozenset(("udiv", "urem", "sdiv", "srem"))


def mask(width: int) -> int:
    return (1 << width) - 1


def to_signed(bits: int, width: int) -> int:
    if bits >> (width - 1):
        return bits - (1 << width)
    return bits


def from_signed(value: int, width: int) -> int:
    return value & ((1 << width) - 1)


def _udiv(a, b, w):
    if b == 0:
        return mask(w)
    return a // b


def _urem(a, b, w):
    if b == 0:
        return a
    return a % b


def _sdiv(a, b, w):
    sa, sb = to_signed(a, w), to_signed(b, w)
    if sb == 0:
        return 1 if sa < 0 else mask(w)
    q = abs(sa) // abs(sb)
    if (sa < 0) != (sb < 0):
        q = -q
    return q & mask(w)


def _srem(a, b, w):
    sa, sb = to_signed(a, w), to_signed(b, w)
    if sb == 0:
        return a
    r = abs(sa) % abs(sb)
    if sa < 0:
        r = -r
    return r & mask(w)


def _shl(a, b, w):
    return (a << b) & mask(w) if b < w else 0


def _lshr(a, b, w):
    return a >> b if b < w else 0


def _ashr(a, b, w):
    s = to_signed(a, w)
    return (s >> min(b, w - 1)) & mask(w)


BINOP_FUNCS = {
    "add": lambda a, b, w: (a + b) & mask(w),
    "sub": lambda a, b, w: (a - b) & mask(w),
    "mul": lambda a, b, w: (a * b) & mask(w),
    "udiv": _udiv,
    "urem": _urem,
    "sdiv": _sdiv,
    "srem": _srem,
    "and": lambda a, b, w: a & b,
    "or": lambda a, b, w: a | b,
    "xor": lambda a, b, w: a ^ b,
    "shl": _shl,
    "lshr": _lshr,
    "ashr": _ashr,
}

UNOP_FUNCS = {
    "not": lambda a, w: a ^ mask(w),
    "neg": lambda a, w: (-a) & mask(w),
}

CMP_FUNCS = {
    "eq": lambda a, b, w: a == b,
    "ne": lambda a, b, w: a != b,
    "ult": lambda a, b, w: a < b,
    "ule": lambda a, b, w: a <= b,
    "slt": lambda a, b, w: to_signed(a, w) < to_signed(b, w),
    "sle": lambda a, b, w: to_signed(a, w) <= to_signed(b, w),
}


def binop(op: str, a: int, b: int, width: int) -> int:
    return BINOP_FUNCS[op](a, b, width)


def unop(op: str, a: int, width: int) -> int:
    return UNOP_FUNCS[op](a, width)


def cmp(op: str, a: int, b: int, width: int) -> int:
    return 1 if CMP_FUNCS[op](a, b, width) else 0


def sext(bits: int, from_width: int, to_width: int) -> int:
    return to_signed(bits, from_width) & mask(to_width)


def zext(bits: int, from_width: int, to_width: int) -> int:
    return bits


def trunc(bits: int, to_width: int) -> int:
    return bits & mask(to_width)


def is_sdiv_overflow(a: int, b: int, width: int) -> bool:
    return a == 1 << (width - 1) and b == mask(width)


@dataclass(frozen=True, slots=True)
class BitVecValue:
    """An unsigned bit pattern of a fixed width."""

    width: int
    bits: int

    def __post_init__(self):
        if self.width not in WIDTHS:
            raise ValueError(f"unsupported width {self.width}")
        if not 0 <= self.bits <= mask(self.width):
            object.__setattr__(self, "bits", self.bits & mask(self.width))

    @classmethod
    def of(cls, value: int, width: int = 64) -> BitVecValue:
        """Build from any Python int, reducing modulo 2**width (negatives wrap)."""
        return cls(width, value & mask(width))

    @property
    def signed(self) -> int:
        return to_signed(self.bits, self.width)

    @property
    def unsigned(self) -> int:
        return self.bits

    def _check(self, other: BitVecValue) -> None:
        if other.width != self.width:
            raise ValueError(f"width mismatch {self.width} vs {other.width}")

    def binop(self, op: str, other: BitVecValue) -> BitVecValue:
        self._check(other)
        return BitVecValue(self.width, binop(op, self.bits, other.bits, self.width))

    def unop(self, op: str) -> BitVecValue:
        return BitVecValue(self.width, unop(op, self.bits, self.width))

    def cmp(self, op: str, other: BitVecValue) -> BitVecValue:
        self._check(other)
        return BitVecValue(1, cmp(op, self.bits, other.bits, self.width))

    def sext(self, width: int) -> BitVecValue:
        return BitVecValue(width, sext(self.bits, self.width, width))

    def zext(self, width: int) -> BitVecValue:
        return BitVecValue(width, self.bits)

    def trunc(self, width: int) -> BitVecValue:
        return BitVecValue(width, trunc(self.bits, width))

    def __add__(self, other):
        return self.binop("add", other)

    def __sub__(self, other):
        return self.binop("sub", other)

    def __mul__(self, other):
        return self.binop("mul", other)

    def __and__(self, other):
        return self.binop("and", other)

    def __or__(self, other):
        return self.binop("or", other)

    def __xor__(self, other):
        return self.binop("xor", other)

    def __invert__(self):
        return self.unop("not")

    def __neg__(self):
        return self.unop("neg")

    def __int__(self):
        return self.bits

    def __repr__(self):
        return f"BitVecValue(i{self.width}, {self.bits:#x})"
