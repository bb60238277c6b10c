"""Random raw (unsimplified) terms and their straight-line IR rendering."""
import random

from adaptsynth import term as T
from adaptsynth.bitvec import BINOPS, CMPOPS, UNOPS

WIDTHS = (8, 16, 32, 64)
VARS = ("x", "y")


def random_term(r: random.Random, width: int = 64, depth: int = 4, ite: bool = True) -> T.Term:
    if depth == 0 or r.random() < 0.2:
        if r.random() < 0.6:
            v = T.Var(r.choice(VARS), 64)
            return v if width == 64 else T.Trunc(width, v)
        return T.Const(width, r.choice((0, 1, 2, 0x80, r.getrandbits(width))))
    k = r.random()
    if k < 0.5:
        return T.Binop(r.choice(BINOPS), random_term(r, width, depth - 1, ite),
                       random_term(r, width, depth - 1, ite))
    if k < 0.6:
        return T.Unop(r.choice(UNOPS), random_term(r, width, depth - 1, ite))
    if k < 0.75 and width < 64:
        hi = r.choice([w for w in WIDTHS if w > width])
        return T.Trunc(width, random_term(r, hi, depth - 1, ite))
    if k < 0.9 and width > 8:
        lo = r.choice([w for w in WIDTHS if w < width])
        return T.Extend(r.choice(("sext", "zext")), width, random_term(r, lo, depth - 1, ite))
    if ite:
        w = r.choice(WIDTHS)
        c = T.Cmp(r.choice(CMPOPS), random_term(r, w, depth - 1, ite), random_term(r, w, depth - 1, ite))
        return T.Ite(c, random_term(r, width, depth - 1, ite), random_term(r, width, depth - 1, ite))
    return T.Binop("xor", random_term(r, width, depth - 1, ite), T.Const(width, 1))


def to_ir(t: T.Term, name: str = "g") -> str:
    """Straight-line function over params x, y computing zext64(t); no Ite."""
    names: dict = {}
    lines = []
    for node in T.postorder([t]):
        if isinstance(node, T.Var):
            names[node] = node.name
            continue
        r = f"t{len(names)}"
        names[node] = r
        if isinstance(node, T.Const):
            lines.append(f"{r} = const.i{node.width} {node.bits}")
        elif isinstance(node, T.Binop):
            lines.append(f"{r} = {node.op}.i{node.width} {names[node.l]}, {names[node.r]}")
        elif isinstance(node, T.Unop):
            lines.append(f"{r} = {node.op}.i{node.width} {names[node.a]}")
        elif isinstance(node, T.Cmp):
            lines.append(f"{r} = {node.op}.i{node.l.width} {names[node.l]}, {names[node.r]}")
        elif isinstance(node, T.Extend):
            lines.append(f"{r} = {node.kind}.i{node.width} <- i{node.a.width} {names[node.a]}")
        elif isinstance(node, T.Trunc):
            lines.append(f"{r} = trunc.i{node.width} <- i{node.a.width} {names[node.a]}")
        else:
            raise TypeError(node)
    out = names[t]
    if t.width != 64:
        lines.append(f"res = zext.i64 <- i{t.width} {out}")
        out = "res"
    body = "\n  ".join(lines + [f"ret {out}"])
    return f"func {name}(x, y)\n{{\nentry:\n  {body}\n}}\n"
