import random
import subprocess

import pytest
from hypothesis import given, settings, strategies as st

from adaptsynth import term as T
from adaptsynth.solver import (REPORT_UNKNOWN, ExternalSolverFailure, Proved, Refuted, Sat,
                               SolveBudget, Solver, Unknown, Unsat, VarDomain, check_equal,
                               emit_smtlib, find_solver, iter_models, solve)
from termgen import random_term

needs_z3 = pytest.mark.skipif(find_solver() is None, reason="no external solver on PATH")

x8 = T.var("x", 8)


@pytest.mark.parametrize("backend", ["internal", "auto"])
def test_simple_sat(backend):
    res = solve([T.cmp("eq", x8, T.const(5, 8))], backend=backend)
    assert isinstance(res, Sat) and res["x"].bits == 5


@pytest.mark.parametrize("backend", ["internal", "auto"])
def test_contradiction_unsat(backend):
    res = solve([T.cmp("eq", x8, T.const(5, 8)), T.cmp("eq", x8, T.const(6, 8))], backend=backend)
    assert isinstance(res, Unsat) and not res.coerced


def test_selector_query():
    ty, val = T.var("y_1_type", 8), T.var("y_1_val")
    targs = [T.const(v, 64) for v in (10, 20, 30)]
    sub = T.ite(T.cmp("eq", val, T.const(0, 64)), targs[0],
                T.ite(T.cmp("eq", val, T.const(1, 64)), targs[1], targs[2]))
    arg = T.ite(T.cmp("eq", ty, T.const(1, 8)), val, sub)
    doms = [VarDomain("y_1_type", 8, (0, 1)), VarDomain("y_1_val", 64, (0, 1, 2))]
    res = solve([T.cmp("eq", arg, targs[2])], doms)
    assert isinstance(res, Sat)
    assert res["y_1_val"].bits == 2 and res["y_1_type"].bits == 0


def test_emit_shape():
    text = emit_smtlib([T.cmp("eq", x8, T.const(5, 8))], [])
    assert "(set-logic QF_BV)" in text
    assert "(assert (= x #x05))" in text


@needs_z3
def test_external_unsat_output():
    text = emit_smtlib([T.cmp("eq", x8, T.const(5, 8)), T.cmp("eq", x8, T.const(6, 8))], [])
    out = subprocess.run([find_solver(), "-in", "-smt2"], input=text, capture_output=True, text=True)
    assert out.stdout.splitlines()[0] == "unsat"


@needs_z3
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_external_backends_agree_and_models_check_out(seed):
    r = random.Random(seed)
    t = random_term(r, 64, depth=3)
    goal = [T.cmp("eq", t, T.const(r.choice((0, 1, 5)), 64))]
    verdicts = []
    # a timeout must not masquerade as Unsat here
    budget = SolveBudget(5.0, REPORT_UNKNOWN)
    for backend in ("smtlib", "z3"):
        res = solve(goal, budget=budget, backend=backend)
        if isinstance(res, Sat):
            assert T.eval_term(goal[0], res.bits()).bits == 1
        verdicts.append(type(res))
    if Unknown not in verdicts:
        assert verdicts[0] is verdicts[1]


def test_incremental_session_handles_shared_prefixes():
    s = Solver("z3")
    a = T.var("a", 16)
    pc = [T.cmp("ult", a, T.const(100, 16)), T.cmp("ne", a, T.const(5, 16))]
    assert isinstance(s.solve(pc + [T.cmp("eq", a, T.const(5, 16))]), Unsat)
    res = s.solve(pc + [T.cmp("eq", a, T.const(6, 16))])
    assert isinstance(res, Sat) and res["a"].bits == 6
    assert isinstance(s.solve(pc[:1] + [T.cmp("eq", a, T.const(5, 16))]), Sat)
    # a change of explicit domains resets the session
    assert isinstance(s.solve(pc[:1], [VarDomain("a", 16, (200, 300))]), Unsat)
    assert isinstance(s.solve(pc[:1]), Sat)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_internal_and_external_agree_on_byte_queries(seed):
    r = random.Random(seed)
    a, b = T.var("a", 8), T.var("b", 8)
    t = T.binop(r.choice(("add", "mul", "xor", "sub")), a, b)
    goal = T.cmp(r.choice(("eq", "ult", "slt")), t, T.const(r.getrandbits(8), 8))
    extra = T.cmp("ne", a, T.const(r.getrandbits(8), 8))
    truth = any(T.eval_many([goal, extra], {"a": i, "b": j}) == [1, 1]
                for i in range(256) for j in range(256))
    res = solve([goal, extra], backend="internal")
    assert isinstance(res, Sat) == truth


def test_check_equal():
    x, y = T.var("x"), T.var("y")
    assert isinstance(check_equal(x, x), Proved)
    ref = check_equal(x, y)
    assert isinstance(ref, Refuted) and ref.model["x"] != ref.model["y"]


def test_check_equal_trunc_mask():
    x = T.var("x")
    lhs = T.extend("zext", 64, T.trunc(16, x))
    rhs = T.binop("and", x, T.const(0xFFFF, 64))
    assert isinstance(check_equal(lhs, rhs), Proved)
    # the same identity at width 16, exhaustively through the internal search
    x16 = T.var("x", 16)
    lhs16 = T.extend("zext", 16, T.trunc(8, x16))
    rhs16 = T.binop("and", x16, T.const(0xFF, 16))
    assert isinstance(Solver("internal").check_equal(lhs16, rhs16), Proved)


def test_iter_models_enumerates_all():
    a = T.var("a", 8)
    models = list(iter_models([T.cmp("ult", a, T.const(10, 8))], {"a": VarDomain("a", 8)}))
    assert sorted(m["a"] for m in models) == list(range(10))


def test_timeout_policy():
    # full-width multiplication inverse: the tiny internal budget cannot decide it
    x = T.var("x")
    q = [T.cmp("eq", T.binop("mul", x, T.const(3, 64)), T.const(1, 64))]
    s = Solver("internal", SolveBudget(policy=REPORT_UNKNOWN), node_budget=10)
    res = s.solve(q)
    assert isinstance(res, (Unknown, Sat))
    coerced = Solver("internal", node_budget=10).solve(q)
    assert isinstance(coerced, (Unsat, Sat))
    if isinstance(coerced, Unsat):
        assert coerced.coerced


def test_domain_width_mismatch():
    with pytest.raises(ValueError):
        solve([T.cmp("eq", x8, T.const(1, 8))], [VarDomain("x", 16)])


def test_missing_external_solver():
    with pytest.raises(ExternalSolverFailure):
        Solver("smtlib", solver_path="/nonexistent/solver")
