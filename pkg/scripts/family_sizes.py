"""Exact adapter-family sizes for a few configurations, next to enumerated counts."""
import argparse

from adaptsynth.adapters import AdapterFamily, enumerate_family, family_size
from adaptsynth.cli import scientific
from adaptsynth.config import parse_family

LARGE = [
    ("wide-typeconv", 13, 13),
    ("arg-perm", 13, 13),
    ("typeconv+ret", 6, 6),
]

SMALL = [
    (AdapterFamily("argsub", constants=(0, 1)), 3, 1),
    (AdapterFamily("argsub", constants=(0, 255)), 1, 3),
    (AdapterFamily("typeconv", constants=(0,), allow_ret=True), 2, 2),
    (AdapterFamily("arith", constants=(1,), depth=2, ops=("not", "and", "add")), 1, 1),
]


def main():
    argparse.ArgumentParser(description=__doc__).parse_args()
    print(f"{'family':<28} {'t':>3} {'i':>3}  size")
    for name, t, i in LARGE:
        v = family_size(parse_family(name), t, i)
        print(f"{name:<28} {t:>3} {i:>3}  {scientific(v)}  ({len(str(v))} digits)")
    print()
    print(f"{'family':<28} {'t':>3} {'i':>3}  size  enumerated")
    for fam, t, i in SMALL:
        v = family_size(fam, t, i)
        n = sum(1 for _ in enumerate_family(fam, t, i))
        label = f"{fam.kind} consts={list(fam.constants)}"
        print(f"{label:<28} {t:>3} {i:>3}  {v:<5} {n}")


if __name__ == "__main__":
    main()
