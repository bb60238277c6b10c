"""Symbolic bitvector terms.

Terms are hash-consed: building a node that already exists returns the existing
object, so structural equality is identity and DAG sharing comes for free.
The class constructors (``Binop(...)`` etc.) build raw nodes; the lower-case
builders (``binop``, ``ite``, ...) fold constants and drop identities as they
go, and are what the rest of the package uses.
"""
from __future__ import annotations

import weakref
from typing import Iterable, Mapping, Union

from . import bitvec as bv
from .bitvec import BitVecValue, mask

__all__ = [
    "Term", "Var", "Const", "Binop", "Unop", "Cmp", "Extend", "Trunc", "Ite",
    "MissingVariable", "const", "var", "binop", "unop", "cmp", "extend", "trunc",
    "ite", "bool_and", "bool_or", "bool_not", "conj", "disj", "TRUE", "FALSE",
    "eval_term", "simplify", "substitute", "free_vars", "postorder", "compile_terms",
    "term_size",
]


class MissingVariable(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name


_TABLE: "weakref.WeakValueDictionary[tuple, Term]" = weakref.WeakValueDictionary()


def _interned(cls, key, **fields):
    t = _TABLE.get(key)
    if t is None:
        t = object.__new__(cls)
        for k, v in fields.items():
            object.__setattr__(t, k, v)
        _TABLE[key] = t
    return t


class Term:
    __slots__ = ("width", "__weakref__")

    def __setattr__(self, name, value):
        raise AttributeError("terms are immutable")

    def children(self) -> tuple[Term, ...]:
        return ()

    def rebuild(self, kids: tuple[Term, ...]) -> Term:
        """Same node kind over new children, through the simplifying builders."""
        return self

    # width-1 terms double as booleans in the solver interfaces
    @property
    def is_bool(self) -> bool:
        return self.width == 1


class Var(Term):
    __slots__ = ("name",)

    def __new__(cls, name: str, width: int):
        if width not in bv.WIDTHS:
            raise TypeError(f"bad width {width}")
        return _interned(cls, ("var", name, width), name=name, width=width)

    def __reduce__(self):
        return (Var, (self.name, self.width))

    def __repr__(self):
        return f"{self.name}:i{self.width}"


class Const(Term):
    __slots__ = ("bits",)

    def __new__(cls, width: int, bits: int):
        if width not in bv.WIDTHS:
            raise TypeError(f"bad width {width}")
        bits &= mask(width)
        return _interned(cls, ("const", width, bits), width=width, bits=bits)

    @property
    def value(self) -> BitVecValue:
        return BitVecValue(self.width, self.bits)

    def __reduce__(self):
        return (Const, (self.width, self.bits))

    def __repr__(self):
        return f"{self.bits:#x}:i{self.width}"


class Binop(Term):
    __slots__ = ("op", "l", "r")

    def __new__(cls, op: str, l: Term, r: Term):
        if op not in bv.BINOP_FUNCS:
            raise TypeError(f"unknown binop {op}")
        if l.width != r.width:
            raise TypeError(f"{op}: width mismatch i{l.width} vs i{r.width}")
        return _interned(cls, ("binop", op, l, r), op=op, l=l, r=r, width=l.width)

    def children(self):
        return (self.l, self.r)

    def rebuild(self, kids):
        return binop(self.op, *kids)

    def __reduce__(self):
        return (Binop, (self.op, self.l, self.r))

    def __repr__(self):
        return f"({self.op} {self.l!r} {self.r!r})"


class Unop(Term):
    __slots__ = ("op", "a")

    def __new__(cls, op: str, a: Term):
        if op not in bv.UNOP_FUNCS:
            raise TypeError(f"unknown unop {op}")
        return _interned(cls, ("unop", op, a), op=op, a=a, width=a.width)

    def children(self):
        return (self.a,)

    def rebuild(self, kids):
        return unop(self.op, kids[0])

    def __reduce__(self):
        return (Unop, (self.op, self.a))

    def __repr__(self):
        return f"({self.op} {self.a!r})"


class Cmp(Term):
    __slots__ = ("op", "l", "r")

    def __new__(cls, op: str, l: Term, r: Term):
        if op not in bv.CMP_FUNCS:
            raise TypeError(f"unknown comparison {op}")
        if l.width != r.width:
            raise TypeError(f"{op}: width mismatch i{l.width} vs i{r.width}")
        return _interned(cls, ("cmp", op, l, r), op=op, l=l, r=r, width=1)

    def children(self):
        return (self.l, self.r)

    def rebuild(self, kids):
        return cmp(self.op, *kids)

    def __reduce__(self):
        return (Cmp, (self.op, self.l, self.r))

    def __repr__(self):
        return f"({self.op} {self.l!r} {self.r!r})"


class Extend(Term):
    __slots__ = ("kind", "a")

    def __new__(cls, kind: str, width: int, a: Term):
        if kind not in ("sext", "zext"):
            raise TypeError(f"unknown extension {kind}")
        if not width > a.width or width not in bv.WIDTHS:
            raise TypeError(f"{kind} must widen: i{a.width} -> i{width}")
        return _interned(cls, ("ext", kind, width, a), kind=kind, a=a, width=width)

    def children(self):
        return (self.a,)

    def rebuild(self, kids):
        return extend(self.kind, self.width, kids[0])

    def __reduce__(self):
        return (Extend, (self.kind, self.width, self.a))

    def __repr__(self):
        return f"({self.kind}{self.width} {self.a!r})"


class Trunc(Term):
    __slots__ = ("a",)

    def __new__(cls, width: int, a: Term):
        if not width < a.width or width not in bv.WIDTHS:
            raise TypeError(f"trunc must narrow: i{a.width} -> i{width}")
        return _interned(cls, ("trunc", width, a), a=a, width=width)

    def children(self):
        return (self.a,)

    def rebuild(self, kids):
        return trunc(self.width, kids[0])

    def __reduce__(self):
        return (Trunc, (self.width, self.a))

    def __repr__(self):
        return f"(trunc{self.width} {self.a!r})"


class Ite(Term):
    __slots__ = ("c", "t", "e")

    def __new__(cls, c: Term, t: Term, e: Term):
        if c.width != 1:
            raise TypeError("ite condition must be i1")
        if t.width != e.width:
            raise TypeError(f"ite arms differ: i{t.width} vs i{e.width}")
        return _interned(cls, ("ite", c, t, e), c=c, t=t, e=e, width=t.width)

    def children(self):
        return (self.c, self.t, self.e)

    def rebuild(self, kids):
        return ite(*kids)

    def __reduce__(self):
        return (Ite, (self.c, self.t, self.e))

    def __repr__(self):
        return f"(ite {self.c!r} {self.t!r} {self.e!r})"


TRUE = Const(1, 1)
FALSE = Const(1, 0)


# --- builders ---------------------------------------------------------------

def const(value: int | BitVecValue, width: int | None = None) -> Const:
    if isinstance(value, BitVecValue):
        return Const(value.width, value.bits)
    return Const(64 if width is None else width, value)


def var(name: str, width: int = 64) -> Var:
    return Var(name, width)


_COMMUTATIVE = frozenset(("add", "mul", "and", "or", "xor"))


def binop(op: str, a: Term, b: Term) -> Term:
    w = a.width
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(w, bv.binop(op, a.bits, b.bits, w))
    if op in _COMMUTATIVE and isinstance(a, Const):
        a, b = b, a
    m = mask(w)
    if isinstance(b, Const):
        k = b.bits
        if k == 0:
            if op in ("add", "sub", "or", "xor", "shl", "lshr", "ashr"):
                return a
            if op in ("mul", "and"):
                return b
        if k == m and op == "and":
            return a
        if k == m and op == "or":
            return b
        if k == 1 and op in ("mul", "udiv", "sdiv"):
            return a
        if k == 1 and op in ("urem", "srem") or (k == m and op == "srem"):
            return Const(w, 0)
        if op in ("shl", "lshr") and k >= w:
            return Const(w, 0)
        if k == m and op == "xor":
            return unop("not", a)
    if isinstance(a, Const) and a.bits == 0 and op in ("shl", "lshr", "ashr", "urem", "srem"):
        return a
    if a is b:
        if op in ("and", "or"):
            return a
        if op in ("xor", "sub"):
            return Const(w, 0)
    return Binop(op, a, b)


def unop(op: str, a: Term) -> Term:
    if isinstance(a, Const):
        return Const(a.width, bv.unop(op, a.bits, a.width))
    if isinstance(a, Unop) and a.op == op:
        return a.a
    if op == "not" and a.width == 1 and isinstance(a, Cmp) and a.op in ("eq", "ne"):
        return Cmp("ne" if a.op == "eq" else "eq", a.l, a.r)
    return Unop(op, a)


def cmp(op: str, a: Term, b: Term) -> Term:
    w = a.width
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(1, bv.cmp(op, a.bits, b.bits, w))
    if a is b:
        return TRUE if op in ("eq", "ule", "sle") else FALSE
    if op in ("eq", "ne"):
        if isinstance(a, Const):
            a, b = b, a
        if isinstance(b, Const):
            if w == 1:
                positive = (b.bits == 1) == (op == "eq")
                return a if positive else unop("not", a)
            # comparisons against an ite with constant arms fold per arm
            if isinstance(a, Ite) and isinstance(a.t, Const) and isinstance(a.e, Const):
                return ite(a.c, cmp(op, a.t, b), cmp(op, a.e, b))
    elif isinstance(b, Const):
        if op == "ult" and b.bits == 0:
            return FALSE
        if op == "ule" and b.bits == mask(w):
            return TRUE
    elif isinstance(a, Const):
        if op == "ule" and a.bits == 0:
            return TRUE
        if op == "ult" and a.bits == mask(w):
            return FALSE
    return Cmp(op, a, b)


def extend(kind: str, width: int, a: Term) -> Term:
    if width == a.width:
        return a
    if isinstance(a, Const):
        f = bv.sext if kind == "sext" else bv.zext
        return Const(width, f(a.bits, a.width, width))
    if kind == "zext" and isinstance(a, Trunc) and a.a.width == width:
        return binop("and", a.a, Const(width, mask(a.width)))
    if isinstance(a, Extend) and (a.kind == kind or a.kind == "zext"):
        # sext(zext x) == zext x (the widened value has a clear sign bit)
        return Extend(a.kind, width, a.a)
    return Extend(kind, width, a)


def trunc(width: int, a: Term) -> Term:
    if width == a.width:
        return a
    if isinstance(a, Const):
        return Const(width, a.bits)
    if isinstance(a, Extend):
        inner = a.a
        if inner.width == width:
            return inner
        if inner.width > width:
            return trunc(width, inner)
        return extend(a.kind, width, inner)
    if isinstance(a, Trunc):
        return trunc(width, a.a)
    return Trunc(width, a)


def ite(c: Term, t: Term, e: Term) -> Term:
    if isinstance(c, Const):
        return t if c.bits else e
    if t is e:
        return t
    if t.width == 1 and isinstance(t, Const) and isinstance(e, Const):
        return c if t.bits else unop("not", c)
    if isinstance(c, Unop) and c.op == "not":
        return ite(c.a, e, t)
    return Ite(c, t, e)


def bool_not(a: Term) -> Term:
    return unop("not", a)


def bool_and(a: Term, b: Term) -> Term:
    return binop("and", a, b)


def bool_or(a: Term, b: Term) -> Term:
    return binop("or", a, b)


def conj(ts: Iterable[Term]) -> Term:
    out = TRUE
    for t in ts:
        out = bool_and(out, t)
        if out is FALSE:
            break
    return out


def disj(ts: Iterable[Term]) -> Term:
    out = FALSE
    for t in ts:
        out = bool_or(out, t)
        if out is TRUE:
            break
    return out


# --- traversal, evaluation, rewriting --------------------------------------

def postorder(roots: Iterable[Term]) -> list[Term]:
    """Every distinct node reachable from roots, children before parents."""
    seen: set[int] = set()
    order: list[Term] = []
    stack = [(r, False) for r in reversed(list(roots))]
    while stack:
        t, done = stack.pop()
        if done:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        for c in reversed(t.children()):
            if id(c) not in seen:
                stack.append((c, False))
    return order


def term_size(t: Term) -> int:
    return len(postorder([t]))


def free_vars(*roots: Term) -> dict[str, int]:
    return {t.name: t.width for t in postorder(roots) if isinstance(t, Var)}


def _bits(v) -> int:
    return v.bits if isinstance(v, BitVecValue) else int(v)


def _eval_node(t: Term, vals: dict, env: Mapping) -> int:
    if isinstance(t, Const):
        return t.bits
    if isinstance(t, Var):
        try:
            v = env[t.name]
        except KeyError:
            raise MissingVariable(t.name) from None
        return _bits(v) & mask(t.width)
    if isinstance(t, Binop):
        return bv.binop(t.op, vals[id(t.l)], vals[id(t.r)], t.width)
    if isinstance(t, Unop):
        return bv.unop(t.op, vals[id(t.a)], t.width)
    if isinstance(t, Cmp):
        return bv.cmp(t.op, vals[id(t.l)], vals[id(t.r)], t.l.width)
    if isinstance(t, Extend):
        if t.kind == "sext":
            return bv.sext(vals[id(t.a)], t.a.width, t.width)
        return vals[id(t.a)]
    if isinstance(t, Trunc):
        return vals[id(t.a)] & mask(t.width)
    if isinstance(t, Ite):
        return vals[id(t.t)] if vals[id(t.c)] else vals[id(t.e)]
    raise TypeError(t)


def eval_many(roots: Iterable[Term], env: Mapping) -> list[int]:
    roots = list(roots)
    vals: dict[int, int] = {}
    for t in postorder(roots):
        vals[id(t)] = _eval_node(t, vals, env)
    return [vals[id(r)] for r in roots]


def eval_term(t: Term, env: Mapping) -> BitVecValue:
    """Evaluate under an assignment (name -> BitVecValue or int)."""
    return BitVecValue(t.width, eval_many([t], env)[0])


def _rewrite(roots: list[Term], leaf) -> list[Term]:
    new: dict[int, Term] = {}
    for t in postorder(roots):
        if isinstance(t, (Var, Const)):
            new[id(t)] = leaf(t)
        else:
            new[id(t)] = t.rebuild(tuple(new[id(c)] for c in t.children()))
    return [new[id(r)] for r in roots]


def simplify(t: Term) -> Term:
    """Rebuild bottom-up through the folding builders until nothing changes."""
    for _ in range(8):
        (s,) = _rewrite([t], lambda x: x)
        if s is t:
            break
        t = s
    return t


TermLike = Union[Term, BitVecValue, int]


def substitute(t: Term, partial: Mapping[str, TermLike]) -> Term:
    """Replace variables by values or terms, then simplify."""
    def leaf(x):
        if isinstance(x, Var) and x.name in partial:
            v = partial[x.name]
            if isinstance(v, Term):
                if v.width != x.width:
                    raise TypeError(f"substituting i{v.width} for {x!r}")
                return v
            return Const(x.width, _bits(v))
        return x
    return simplify(_rewrite([t], leaf)[0])


def substitute_many(ts: list[Term], partial: Mapping[str, TermLike]) -> list[Term]:
    def leaf(x):
        if isinstance(x, Var) and x.name in partial:
            v = partial[x.name]
            return v if isinstance(v, Term) else Const(x.width, _bits(v))
        return x
    return _rewrite(ts, leaf)


# --- compilation to Python --------------------------------------------------

def _ashr(a, b, w):
    return bv.binop("ashr", a, b, w)


_HELPERS = {
    "_udiv": bv.BINOP_FUNCS["udiv"], "_urem": bv.BINOP_FUNCS["urem"],
    "_sdiv": bv.BINOP_FUNCS["sdiv"], "_srem": bv.BINOP_FUNCS["srem"],
    "_ashr": _ashr,
}


def _py_expr(t: Term, name) -> str:
    if isinstance(t, Const):
        return str(t.bits)
    if isinstance(t, Var):
        return f"env[{t.name!r}]"
    w = t.width
    m = mask(w)
    if isinstance(t, Binop):
        a, b = name(t.l), name(t.r)
        op = t.op
        if op == "add":
            return f"({a} + {b}) & {m}"
        if op == "sub":
            return f"({a} - {b}) & {m}"
        if op == "mul":
            return f"({a} * {b}) & {m}"
        if op in ("and", "or", "xor"):
            sym = {"and": "&", "or": "|", "xor": "^"}[op]
            return f"{a} {sym} {b}"
        if op == "shl":
            return f"(({a} << {b}) & {m} if {b} < {w} else 0)"
        if op == "lshr":
            return f"({a} >> {b} if {b} < {w} else 0)"
        return f"_{op}({a}, {b}, {w})"
    if isinstance(t, Unop):
        a = name(t.a)
        return f"{a} ^ {m}" if t.op == "not" else f"-{a} & {m}"
    if isinstance(t, Cmp):
        a, b = name(t.l), name(t.r)
        s = 1 << (t.l.width - 1)
        op = t.op
        if op in ("slt", "sle"):
            a, b = f"({a} ^ {s})", f"({b} ^ {s})"
        sym = {"eq": "==", "ne": "!=", "ult": "<", "ule": "<=", "slt": "<", "sle": "<="}[op]
        return f"(1 if {a} {sym} {b} else 0)"
    if isinstance(t, Extend):
        a = name(t.a)
        if t.kind == "zext":
            return a
        s = 1 << (t.a.width - 1)
        return f"(({a} ^ {s}) - {s}) & {m}"
    if isinstance(t, Trunc):
        return f"{name(t.a)} & {m}"
    if isinstance(t, Ite):
        return f"({name(t.t)} if {name(t.c)} else {name(t.e)})"
    raise TypeError(t)


def compile_terms(roots: list[Term]):
    """Compile a list of terms into ``f(env) -> tuple of ints``.

    ``env`` maps variable names to ints already reduced to the variable width.
    A missing variable raises KeyError.
    """
    order = postorder(roots)
    names: dict[int, str] = {}
    lines = ["def _f(env):"]
    for i, t in enumerate(order):
        if isinstance(t, Const):
            names[id(t)] = str(t.bits)
            continue
        expr = _py_expr(t, lambda c: names[id(c)])
        names[id(t)] = f"t{i}"
        lines.append(f"    t{i} = {expr}")
    lines.append("    return (" + "".join(names[id(r)] + ", " for r in roots) + ")")
    ns = dict(_HELPERS)
    exec("\n".join(lines), ns)
    return ns["_f"]
