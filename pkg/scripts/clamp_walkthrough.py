"""Step through CEGIS on the clamp pair, printing each candidate and test."""
import argparse

from adaptsynth import library
from adaptsynth.adapters import AdapterFamily
from adaptsynth.cegis import CegisConfig, synthesize


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--backend", choices=("symbolic", "concrete"), default="symbolic")
    p.add_argument("--constants", default="0,255")
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()

    target, inner = library.get("clamp_target"), library.get("clamp_reference")
    fam = AdapterFamily("argsub", constants=tuple(int(c) for c in a.constants.split(",")))
    cfg = CegisConfig(backend=a.backend, seed=a.seed)
    print("step 0: start from the all-constant-0 adapter")

    def show(state):
        x = state.tests[-1].args[0].signed
        print(f"step {state.iteration}: counterexample x = {x:>12}  ->  {state.candidate.describe()}")

    res = synthesize(target, inner, fam, cfg=cfg, on_iteration=show)
    s = res.state.stats
    print(f"verdict {res.verdict} after {s.iterations} iterations in {s.total_secs:.3f}s")
    if res.adapter:
        print(f"final adapter {res.adapter.describe()}")


if __name__ == "__main__":
    main()
