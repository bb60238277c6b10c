"""Random well-formed IR functions for differential and round-trip testing.

Control flow is acyclic (blocks only jump forward), so every function
terminates well inside the default step cap. Load/store addresses are masked
to a handful of values, a few of which lie past the region's end.
"""
from __future__ import annotations

import random

from .bitvec import BINOPS, CMPOPS, DIV_OPS, UNOPS
from .ir import FunctionDef, parse_function

_SIZES = {8: 1, 16: 2, 32: 4, 64: 8}


class _Builder:
    def __init__(self, rng: random.Random, allow_faults: bool):
        self.rng = rng
        self.allow_faults = allow_faults
        self.lines: list[str] = []
        self.n = 0

    def fresh(self) -> str:
        self.n += 1
        return f"v{self.n}"

    def emit(self, text: str) -> None:
        self.lines.append("  " + text)


def random_function_source(rng: random.Random, name: str = "f", max_params: int = 3,
                           max_blocks: int = 4, allow_faults: bool = True,
                           allow_memory: bool = True, allow_events: bool = True) -> str:
    b = _Builder(rng, allow_faults)
    params = [f"p{i}" for i in range(rng.randint(0, max_params))]
    region = None
    if allow_memory and rng.random() < 0.6:
        region = ("m", rng.choice((4, 6, 8)))
    n_blocks = rng.randint(1, max_blocks)
    header = f"func {name}({', '.join(params)})"
    if region:
        header += f"\n  region {region[0]} {region[1]}"
    out = [header, "{"]
    shared: dict[int, list[str]] = {w: [] for w in (1, 8, 16, 32, 64)}
    shared[64].extend(params)

    def pools_copy():
        return {w: list(v) for w, v in shared.items()}

    for k in range(n_blocks):
        b.lines = []
        pools = shared if k == 0 else pools_copy()
        if not pools[64]:
            r = b.fresh()
            b.emit(f"{r} = const.i64 {rng.choice((0, 1, 5, 255, 2 ** 63))}")
            pools[64].append(r)
        for _ in range(rng.randint(1, 7)):
            _random_instr(b, pools, region, allow_events)
        # terminator
        later = [f"b{j}" for j in range(k + 1, n_blocks)]
        choice = rng.random()
        if later and choice < 0.55:
            c = _bool(b, pools)
            b.emit(f"br {c}, {rng.choice(later)}, {rng.choice(later)}")
        elif later and choice < 0.75:
            b.emit(f"jmp {rng.choice(later)}")
        elif allow_faults and choice > 0.95:
            b.emit(f"fault {rng.randint(0, 20)}")
        else:
            b.emit(f"ret {rng.choice(pools[64])}")
        out.append(f"b{k}:")
        out.extend(b.lines)
    out.append("}")
    return "\n".join(out) + "\n"


def _pick(b: _Builder, pools, w: int) -> str:
    if pools[w]:
        return b.rng.choice(pools[w])
    src = b.rng.choice(pools[64])
    r = b.fresh()
    if w == 64:
        b.emit(f"{r} = const.i64 {b.rng.getrandbits(8)}")
    else:
        b.emit(f"{r} = trunc.i{w} <- i64 {src}")
    pools[w].append(r)
    return r


def _bool(b: _Builder, pools) -> str:
    if pools[1] and b.rng.random() < 0.5:
        return b.rng.choice(pools[1])
    w = b.rng.choice((8, 16, 32, 64))
    x, y = _pick(b, pools, w), _pick(b, pools, w)
    if b.rng.random() < 0.4:
        y = b.fresh()
        b.emit(f"{y} = const.i{w} {b.rng.choice((0, 1, 3, 100))}")
    r = b.fresh()
    b.emit(f"{r} = {b.rng.choice(CMPOPS)}.i{w} {x}, {y}")
    pools[1].append(r)
    return r


def _address(b: _Builder, pools) -> str:
    src = _pick(b, pools, 64)
    m, r = b.fresh(), b.fresh()
    b.emit(f"{m} = const.i64 {b.rng.choice((3, 7, 7, 15))}")
    b.emit(f"{r} = and.i64 {src}, {m}")
    return r


def _random_instr(b: _Builder, pools, region, allow_events: bool) -> None:
    rng = b.rng
    kinds = ["const", "binop", "binop", "binop", "unop", "cmp", "ext", "trunc"]
    if region:
        kinds += ["load", "load", "store", "store"]
    if allow_events:
        kinds.append("emit")
    kind = rng.choice(kinds)
    w = rng.choice((8, 16, 32, 64, 64))
    r = b.fresh()
    if kind == "const":
        b.emit(f"{r} = const.i{w} {rng.choice((0, 1, 2, 7, 128, 255, rng.getrandbits(w)))}")
    elif kind == "binop":
        ops = [o for o in BINOPS if b.allow_faults or o not in DIV_OPS]
        op = rng.choice(ops)
        x, y = _pick(b, pools, w), _pick(b, pools, w)
        b.emit(f"{r} = {op}.i{w} {x}, {y}")
    elif kind == "unop":
        b.emit(f"{r} = {rng.choice(UNOPS)}.i{w} {_pick(b, pools, w)}")
    elif kind == "cmp":
        _bool(b, pools)
        return
    elif kind == "ext":
        lo = rng.choice([x for x in (1, 8, 16, 32) if x < w] or [8])
        if lo >= w:
            w = 64
        src = _pick(b, pools, lo) if lo != 1 else _bool(b, pools)
        b.emit(f"{r} = {rng.choice(('sext', 'zext'))}.i{w} <- i{lo} {src}")
    elif kind == "trunc":
        hi = rng.choice([x for x in (16, 32, 64) if x > w] or [64])
        if w >= hi:
            w = 8
        b.emit(f"{r} = trunc.i{w} <- i{hi} {_pick(b, pools, hi)}")
    elif kind == "load":
        addr = _address(b, pools)
        b.emit(f"{r} = load.{_SIZES[w]} {region[0]}[{addr}]")
    elif kind == "store":
        addr = _address(b, pools)
        b.emit(f"store.{_SIZES[w]} {region[0]}[{addr}], {_pick(b, pools, w)}")
        return
    else:
        ops = [_pick(b, pools, rng.choice((8, 64))) for _ in range(rng.randint(0, 2))]
        b.emit(f"emit {rng.randint(0, 3)}" + "".join(f", {o}" for o in ops))
        return
    pools[w].append(r)


def random_function(rng: random.Random, name: str = "f", **kw) -> FunctionDef:
    return parse_function(random_function_source(rng, name, **kw))
