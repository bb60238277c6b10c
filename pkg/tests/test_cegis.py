import random
import re

import pytest

from adaptsynth import library
from adaptsynth.adapters import AdapterFamily, AdapterSpec, ConstVal, RetExpr, TargetArg, family_size
from adaptsynth.cegis import (ADAPTED, NOT_SUBSTITUTABLE, TIMEOUT, CegisConfig, check_adapter,
                              concrete_equivalent, synthesize, synthesize_adapter_concrete,
                              synthesize_adapter_symbolic, triviality_filter)
from adaptsynth.interp import InputVector
from adaptsynth.ir import parse_function
from adaptsynth.randgen import random_function_source
from conftest import checked_synthesize, modulo_cfg, quick_cfg

ARGSUB_CLAMP = AdapterFamily("argsub", constants=(0, 255))
X1 = AdapterFamily("argsub", constants=(0, 1))
IDENT = parse_function("func id(x){ entry: ret x }")


def clamp_equiv(a, xs):
    t, i = library.get("clamp_target"), library.get("clamp_reference")
    return all(concrete_equivalent(t, i, a, InputVector.of([x])) for x in xs)


# --- check_adapter ---------------------------------------------------------

def test_check_final_clamp_adapter(clamp_pair):
    t, i = clamp_pair
    assert check_adapter(t, i, AdapterSpec((TargetArg(0), ConstVal(0), ConstVal(255)))) is None


def test_check_default_clamp_adapter(clamp_pair):
    t, i = clamp_pair
    a = AdapterSpec((ConstVal(0),) * 3)
    cex = check_adapter(t, i, a)
    assert cex is not None
    assert not concrete_equivalent(t, i, a, cex)
    assert not concrete_equivalent(t, i, a, InputVector.of([1]))


def test_check_identity():
    assert check_adapter(IDENT, IDENT, AdapterSpec((TargetArg(0),))) is None


# --- adapter search ---------------------------------------------------------

@pytest.mark.parametrize("tests", [[1], [1, 509, -2147483393]])
@pytest.mark.parametrize("backend", ["symbolic", "concrete"])
def test_search_matches_tests(clamp_pair, tests, backend):
    t, i = clamp_pair
    inputs = [InputVector.of([x]) for x in tests]
    if backend == "symbolic":
        a = synthesize_adapter_symbolic(inputs, t, i, ARGSUB_CLAMP)
    else:
        a = synthesize_adapter_concrete(inputs, t, i, ARGSUB_CLAMP, seed=3)
    assert a is not None and clamp_equiv(a, tests)


def test_intermediate_clamp_adapters_are_valid_answers():
    assert clamp_equiv(AdapterSpec((ConstVal(0), TargetArg(0), TargetArg(0))), [1])
    assert clamp_equiv(AdapterSpec((TargetArg(0), ConstVal(0), ConstVal(255))), [1, 509, -2147483393])


@pytest.mark.parametrize("backend", ["symbolic", "concrete"])
def test_x_plus_one_single_test_has_no_adapter(backend):
    t, i = library.get("plus_one"), library.get("times_two")
    tests = [InputVector.of([0])]
    # independent check over the 3-member family at the test point
    assert family_size(X1, 1, 1) == 3
    assert all(2 * v % 2 ** 64 != 1 for v in (0, 0, 1))
    if backend == "symbolic":
        assert synthesize_adapter_symbolic(tests, t, i, X1) is None
    else:
        assert synthesize_adapter_concrete(tests, t, i, X1) is None


def test_concrete_search_seed_determinism(clamp_pair):
    t, i = clamp_pair
    tests = [InputVector.of([1])]
    picks = {synthesize_adapter_concrete(tests, t, i, ARGSUB_CLAMP, seed=s) for s in (5, 5, 5)}
    assert len(picks) == 1


def test_synthesize_seed_determinism(clamp_pair):
    t, i = clamp_pair
    runs = [synthesize(t, i, ARGSUB_CLAMP, "concrete", quick_cfg("concrete", seed=9)) for _ in range(2)]
    assert runs[0].adapter == runs[1].adapter
    assert runs[0].trail == runs[1].trail


# --- full loop -------------------------------------------------------------

@pytest.mark.parametrize("backend", ["symbolic", "concrete"])
def test_clamp(clamp_pair, backend):
    res = checked_synthesize(*clamp_pair, ARGSUB_CLAMP, backend)
    assert res.verdict == ADAPTED
    r = random.Random(0)
    xs = [r.getrandbits(64) for _ in range(2000)] + list(range(-300, 600))
    assert clamp_equiv(res.adapter, xs)


@pytest.mark.parametrize("backend", ["symbolic", "concrete"])
def test_isalpha(backend):
    t, i = library.get("musl_isalpha"), library.get("glibc_isalpha")
    res = checked_synthesize(t, i, AdapterFamily("argsub", constants=(0,), allow_ret=True), backend)
    assert res.verdict == ADAPTED and res.adapter.ret == RetExpr("tobool")


@pytest.mark.parametrize("backend", ["symbolic", "concrete"])
def test_plus_one_times_two(backend):
    t, i = library.get("plus_one"), library.get("times_two")
    assert checked_synthesize(t, i, X1, backend).verdict == NOT_SUBSTITUTABLE


@pytest.mark.parametrize("backend", ["symbolic", "concrete"])
def test_palindrome_not_substitutable(backend):
    res = checked_synthesize(library.get("isP2"), library.get("isP1"),
                             AdapterFamily("argsub", constants=(0, 1, 2, 3, 4)), backend)
    assert res.verdict == NOT_SUBSTITUTABLE


def test_lookup_fault_modulo():
    t, i = library.get("l1"), library.get("l2")
    fam = AdapterFamily("argsub", constants=(0,))
    mod = checked_synthesize(t, i, fam, "symbolic", modulo_cfg())
    assert mod.verdict == ADAPTED and mod.adapter.args == (TargetArg(0), TargetArg(1))
    assert checked_synthesize(t, i, fam, "symbolic").verdict != ADAPTED


def test_timeout_verdict():
    t, i = library.popcnt_pair(3)
    fam = AdapterFamily("argsub", constants=tuple(range(64)))
    res = synthesize(t, i, fam, "concrete", CegisConfig(backend="concrete", timeout_secs=0.05))
    assert res.verdict == TIMEOUT


def test_identity_start_adapts_immediately():
    res = synthesize(IDENT, IDENT, X1, "symbolic", CegisConfig(identity_start=True))
    assert res.verdict == ADAPTED and res.state.iteration == 0


# --- triviality filter ------------------------------------------------------

def test_triviality_identity():
    assert triviality_filter(IDENT, AdapterFamily())


def test_triviality_clamp():
    assert not triviality_filter(library.get("clamp_target"),
                                 AdapterFamily("argsub", constants=(0, 255), allow_ret=True))


def test_triviality_constant():
    f = library.get("const42")
    assert triviality_filter(f, AdapterFamily("argsub", constants=(42,)))
    assert not triviality_filter(f, AdapterFamily("argsub", constants=(41,)))


# --- backend agreement ------------------------------------------------------

def _permuted_twin(src: str) -> str:
    """Same body, parameters listed in reverse order."""
    m = re.match(r"func f\(([^)]*)\)", src)
    params = [p.strip() for p in m.group(1).split(",") if p.strip()]
    return src.replace(m.group(0), f"func g({', '.join(reversed(params))})", 1)


def agreement_pairs():
    r = random.Random(4242)
    pairs = []
    while len(pairs) < 12:
        # fault-free: under the strict policy a faulting target matches nothing
        src = random_function_source(r, "f", max_blocks=3, allow_memory=False, allow_faults=False)
        f = parse_function(src)
        if f.arity >= 2:
            pairs.append((f, parse_function(_permuted_twin(src))))
    while len(pairs) < 24:
        f = parse_function(random_function_source(r, "f", max_blocks=3, allow_memory=False))
        g = parse_function(random_function_source(r, "g", max_blocks=3, allow_memory=False))
        pairs.append((f, g))
    return pairs


def test_backends_agree_on_small_pairs():
    fam = AdapterFamily("argsub", constants=(0, 1))
    verdicts = []
    for f, g in agreement_pairs():
        a = checked_synthesize(f, g, fam, "symbolic", quick_cfg(timeout_secs=60)).verdict
        b = checked_synthesize(f, g, fam, "concrete", quick_cfg("concrete", timeout_secs=60)).verdict
        assert a == b, (f, g)
        verdicts.append(a)
    assert len(verdicts) >= 20
    assert verdicts.count(ADAPTED) >= 12
