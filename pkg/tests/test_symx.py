import random

from adaptsynth import library
from adaptsynth import term as T
from adaptsynth.interp import LIMIT, RETURNED, InputVector, execute
from adaptsynth.ir import parse_function
from adaptsynth.randgen import random_function
from adaptsynth.solver import Solver
from adaptsynth.symx import ExploreLimits, Explorer, run_harness, symbolic_args, symbolic_region


def explore_all(f, limits=ExploreLimits()):
    ex = Explorer(Solver(), limits=limits)
    init = {r.name: symbolic_region(r.name, r.size) for r in f.regions}
    return ex, list(ex.explore(f, symbolic_args(f.arity), init))


def env_of(f, inp: InputVector):
    env = {f"arg_{i}": a.bits for i, a in enumerate(inp.args)}
    for r in f.regions:
        data = inp.region_bytes.get(r.name, bytes(r.size))
        env.update({f"init_{r.name}_{k}": data[k] for k in range(r.size)})
    return env


def assert_matches(sym, conc, env):
    assert sym.status == conc.status
    assert (sym.fault_kind, sym.fault_tag) == (conc.fault_kind, conc.fault_tag)
    if sym.status == RETURNED:
        assert T.eval_term(sym.return_term, env).bits == conc.return_value.bits
    writes = {(r, off): T.eval_term(t, env).bits for r, m in sym.final_store.items() for off, t in m.items()}
    assert writes == dict(conc.final_writes)
    log = tuple((r, off, T.eval_term(t, env).bits) for r, off, t in sym.write_log)
    assert log == tuple(conc.write_log)
    events = tuple((tag, tuple(T.eval_term(v, env) for v in vals)) for tag, vals in sym.events)
    assert events == tuple(conc.events)


def test_identity_single_path():
    f = parse_function("func id(x){ entry: ret x }")
    _, outs = explore_all(f)
    assert len(outs) == 1
    assert outs[0].return_term == T.var("arg_0") and outs[0].pc == ()


def test_clamp_three_paths():
    _, outs = explore_all(library.get("clamp_target"))
    assert len(outs) == 3 and all(o.status == RETURNED for o in outs)
    witnesses = sorted(T.eval_term(o.return_term, o.witness).bits for o in outs)
    assert witnesses[0] == 0 and witnesses[-1] == 255


def test_symbolic_loop_bound_hits_cap():
    f = parse_function("""func count(n)
    { entry: i = const.i64 0
      one = const.i64 1
      jmp head
    head: done = eq.i64 i, n
      br done, out, body
    body: i = add.i64 i, one
      jmp head
    out: ret i }""")
    ex, outs = explore_all(f, ExploreLimits(step_cap=4000, path_cap=2000))
    assert any(o.status == LIMIT for o in outs) or ex.stats.truncated
    assert ex.stats.incomplete


def test_paths_partition_width8_domain():
    f = parse_function("""func g(x)
    { entry: b = trunc.i8 <- i64 x
      c = const.i8 100
      lt = slt.i8 b, c
      br lt, small, big
    small: z = const.i8 0
      eqz = eq.i8 b, z
      br eqz, zero, pos
    zero: r = const.i64 7
      ret r
    pos: ret x
    big: d = const.i8 3
      q = udiv.i8 b, d
      r2 = zext.i64 <- i8 q
      ret r2 }""")
    _, outs = explore_all(f)
    hits = [0] * len(outs)
    for v in range(256):
        env = {"arg_0": v}
        truth = [all(T.eval_many(o.pc, env)) for o in outs]
        assert sum(truth) == 1
        hits[truth.index(True)] += 1
    assert all(hits)


def _random_input(f, r):
    return InputVector.of([r.choice((0, 1, 2, 3, 7, 255, -1, r.getrandbits(64))) for _ in f.params],
                          {reg.name: bytes(r.choice((0, 1, 0xFF, r.getrandbits(8))) for _ in range(reg.size))
                           for reg in f.regions})


def test_symbolic_vs_concrete_differential():
    r = random.Random(20240)
    pairs = 0
    functions = 0
    while pairs < 1200:
        f = random_function(r)
        ex, outs = explore_all(f)
        assert not ex.stats.incomplete
        functions += 1
        # each path's own witness reproduces it
        for o in outs:
            inp = InputVector.of([o.witness.get(f"arg_{i}", 0) for i in range(f.arity)],
                                 {reg.name: bytes(o.witness.get(f"init_{reg.name}_{k}", 0) for k in range(reg.size))
                                  for reg in f.regions})
            env = env_of(f, inp)
            assert all(T.eval_many(o.pc, env))
            assert_matches(o, execute(f, inp), env)
        for _ in range(12):
            inp = _random_input(f, r)
            env = env_of(f, inp)
            live = [o for o in outs if all(T.eval_many(o.pc, env))]
            assert len(live) == 1
            assert_matches(live[0], execute(f, inp), env)
            pairs += 1
    assert pairs >= 1000 and functions >= 100


def test_harness_identity():
    f = parse_function("func id(x){ entry: ret x }")
    ex = Explorer(Solver())
    a = symbolic_args(1)
    outs = list(run_harness(ex, f, f, a, {}, a, {}))
    assert len(outs) == 1
    assert outs[0].target.return_term == outs[0].inner.return_term == T.var("arg_0")


def test_harness_default_adapter_gives_constant_inner(clamp_pair):
    t, i = clamp_pair
    ex = Explorer(Solver())
    a = symbolic_args(1)
    zeros = [T.const(0, 64)] * 3
    outs = list(run_harness(ex, t, i, a, {}, zeros, {}))
    assert len(outs) == 3
    assert all(isinstance(o.inner.return_term, T.Const) and o.inner.return_term.bits == 0 for o in outs)


def test_harness_concrete_test_symbolic_adapter(clamp_pair):
    t, i = clamp_pair
    ex = Explorer(Solver())
    sel = [T.var(f"s{k}") for k in range(3)]
    outs = list(run_harness(ex, t, i, [T.const(1, 64)], {}, sel, {}))
    assert {o.target.return_term for o in outs} == {T.const(1, 64)}
    assert all(o.target.pc == () for o in outs)
    assert len(outs) > 1   # the inner side branches on the adapter variables
