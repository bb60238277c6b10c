"""Random-function differential run: symbolic paths against the interpreter.

For each random function, every explored path is evaluated on random inputs.
Exactly one path condition must hold, and its outcome must agree with the
concrete run.
"""
import argparse
import random

from adaptsynth import term as T
from adaptsynth.interp import RETURNED, InputVector, execute
from adaptsynth.randgen import random_function
from adaptsynth.solver import Solver
from adaptsynth.symx import Explorer, symbolic_args, symbolic_region


def env_of(f, inp):
    env = {f"arg_{i}": a.bits for i, a in enumerate(inp.args)}
    for r in f.regions:
        data = inp.region_bytes.get(r.name, bytes(r.size))
        env.update({f"init_{r.name}_{k}": data[k] for k in range(r.size)})
    return env


def agrees(sym, conc, env):
    if (sym.status, sym.fault_kind, sym.fault_tag) != (conc.status, conc.fault_kind, conc.fault_tag):
        return False
    if sym.status == RETURNED and T.eval_term(sym.return_term, env).bits != conc.return_value.bits:
        return False
    writes = {(r, off): T.eval_term(t, env).bits for r, m in sym.final_store.items() for off, t in m.items()}
    return writes == dict(conc.final_writes)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--functions", type=int, default=200)
    p.add_argument("--inputs", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    a = p.parse_args()

    rng = random.Random(a.seed)
    pairs = bad = paths = 0
    for n in range(a.functions):
        f = random_function(rng, f"f{n}")
        ex = Explorer(Solver())
        init = {r.name: symbolic_region(r.name, r.size) for r in f.regions}
        outs = list(ex.explore(f, symbolic_args(f.arity), init))
        paths += len(outs)
        for _ in range(a.inputs):
            inp = InputVector.of([rng.choice((0, 1, -1, 255, rng.getrandbits(64))) for _ in f.params],
                                 {r.name: rng.randbytes(r.size) for r in f.regions})
            env = env_of(f, inp)
            live = [o for o in outs if all(T.eval_many(o.pc, env))]
            pairs += 1
            if len(live) != 1 or not agrees(live[0], execute(f, inp), env):
                bad += 1
                print(f"disagreement in f{n} on {inp}")
    print(f"{a.functions} functions, {paths} paths, {pairs} function/input pairs, {bad} disagreements")


if __name__ == "__main__":
    main()
