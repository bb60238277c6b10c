"""Built-in IR functions used by the examples, tests and experiments."""
from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path

from .ir import Corpus, FunctionDef, load_corpus_dir, parse_corpus, parse_function

# shift amounts of the sketch, in program order, with their masks
POPCNT_STEPS = ((1, 0x5555), (2, 0x3333), (4, 0x0F0F), (8, 0x001F))


def data_dir() -> Path:
    return Path(str(resources.files("adaptsynth") / "data"))


def toy_corpus_dir() -> Path:
    return data_dir() / "toy_corpus"


@lru_cache(maxsize=None)
def builtins() -> Corpus:
    out = Corpus()
    for name in sorted(p.name for p in data_dir().glob("*.ir")):
        for f in parse_corpus((data_dir() / name).read_text()).values():
            out.add(f)
    for f in load_corpus_dir(toy_corpus_dir()).values():
        out.add(f)
    for k in range(len(POPCNT_STEPS) + 1):
        f = popcnt_sketch(k)
        out.add(f)
    return out


def get(name: str) -> FunctionDef:
    try:
        return builtins()[name]
    except KeyError:
        raise KeyError(f"no built-in function {name!r}") from None


def popcnt_sketch_source(k: int) -> str:
    """Tree-style 16-bit popcount whose first k shift amounts are parameters."""
    if not 0 <= k <= len(POPCNT_STEPS):
        raise ValueError(f"k must be in 0..{len(POPCNT_STEPS)}")
    params = ["x"] + [f"s{i + 1}" for i in range(k)]
    lines = [f"func popcnt_sketch{k}({', '.join(params)})", "{", "entry:",
             "  v = trunc.i16 <- i64 x"]
    sh = []
    for i, (amount, _) in enumerate(POPCNT_STEPS):
        if i < k:
            lines.append(f"  sh{i} = trunc.i16 <- i64 s{i + 1}")
        else:
            lines.append(f"  sh{i} = const.i16 {amount}")
        sh.append(f"sh{i}")
    for i, (_, m) in enumerate(POPCNT_STEPS):
        lines.append(f"  m{i} = const.i16 {m:#x}")
    lines += [
        # v - ((v >> s0) & m0)
        "  t = lshr.i16 v, sh0", "  t = and.i16 t, m0", "  v = sub.i16 v, t",
        # (v & m1) + ((v >> s1) & m1)
        "  lo = and.i16 v, m1", "  t = lshr.i16 v, sh1", "  t = and.i16 t, m1",
        "  v = add.i16 lo, t",
        # (v + (v >> s2)) & m2
        "  t = lshr.i16 v, sh2", "  v = add.i16 v, t", "  v = and.i16 v, m2",
        # (v + (v >> s3)) & m3
        "  t = lshr.i16 v, sh3", "  v = add.i16 v, t", "  v = and.i16 v, m3",
        "  r = zext.i64 <- i16 v", "  ret r", "}",
    ]
    return "\n".join(lines) + "\n"


@lru_cache(maxsize=None)
def popcnt_sketch(k: int) -> FunctionDef:
    return parse_function(popcnt_sketch_source(k))


def popcnt_pair(k: int) -> tuple[FunctionDef, FunctionDef]:
    """(target, inner) for the popcount benchmark with k parameterised shifts."""
    return get("popcnt_naive"), popcnt_sketch(k)
