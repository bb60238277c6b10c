import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from adaptsynth import library
from adaptsynth import term as T
from adaptsynth.adapters import (AdapterFamily, AdapterSpec, ArithNode, ConstVal, MappingOutOfRange,
                                 MemMapping, RetExpr, SideConditionViolated, TargetArg, TypeConv,
                                 apply_concrete, apply_to_ret, arg_term, default_adapter,
                                 encode_symbolic, enumerate_family, eval_arg, family_size,
                                 permutation)
from adaptsynth.bitvec import BitVecValue
from adaptsynth.interp import InputVector
from adaptsynth.ir import parse_function
from adaptsynth.solver import iter_models
from adaptsynth.symx import symbolic_args

SMALL_T = parse_function("func st()\n  region a 8\n{ e: z = const.i64 0\n ret z }")
SMALL_I = parse_function("func si()\n  region a 8\n  region b 4\n{ e: z = const.i64 0\n ret z }")


def dummy(n):
    params = ", ".join(f"p{i}" for i in range(n))
    return parse_function(f"func d{n}({params}){{ e: z = const.i64 0\n ret z }}")


# --- default adapter, application -----------------------------------------

def test_default_adapter_all_zero():
    assert default_adapter(AdapterFamily(), 1, 3) == AdapterSpec((ConstVal(0),) * 3)


def test_identity_start():
    a = default_adapter(AdapterFamily(), 2, 2, identity=True)
    assert a.args == (TargetArg(0), TargetArg(1))


def test_empty_inner_arity():
    a = default_adapter(AdapterFamily(), 3, 0)
    assert a.args == () and a.ret == RetExpr()


def test_apply_clamp_adapter():
    a = AdapterSpec((TargetArg(0), ConstVal(0), ConstVal(255)))
    inp = apply_concrete(a, InputVector.of([509]), library.get("clamp_reference"))
    assert inp.arg_bits == (509, 0, 255)


def test_apply_widening_memory_mapping():
    t = parse_function("func t()\n  region r 4\n{ e: z = const.i64 0\n ret z }")
    i = parse_function("func i()\n  region r 16\n{ e: z = const.i64 0\n ret z }")
    m = MemMapping("r", 0, "r", 0, 4, 1, 4, "zero")
    inp = apply_concrete(AdapterSpec((), (m,)), InputVector.of([], {"r": bytes([1, 2, 3, 4])}), i, t)
    assert inp.region_bytes["r"] == bytes([1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 4, 0, 0, 0])
    s = MemMapping("r", 0, "r", 0, 4, 1, 4, "sign")
    inp = apply_concrete(AdapterSpec((), (s,)), InputVector.of([], {"r": bytes([0x80, 1, 0xFF, 0])}), i, t)
    assert inp.region_bytes["r"][:8] == bytes([0x80, 0xFF, 0xFF, 0xFF, 1, 0, 0, 0])


def test_narrowing_mapping_keeps_low_bytes():
    t = parse_function("func t()\n  region r 8\n{ e: z = const.i64 0\n ret z }")
    i = parse_function("func i()\n  region r 2\n{ e: z = const.i64 0\n ret z }")
    m = MemMapping("r", 0, "r", 0, 2, 4, 1, "truncate-low")
    inp = apply_concrete(AdapterSpec((), (m,)), InputVector.of([], {"r": bytes(range(1, 9))}), i, t)
    assert inp.region_bytes["r"] == bytes([1, 5])


def test_mapping_out_of_range():
    m = MemMapping("a", 4, "a", 4, 2, 4, 4, "truncate-low")
    with pytest.raises(MappingOutOfRange):
        apply_concrete(AdapterSpec((), (m,)), InputVector.of([]), SMALL_T, SMALL_T)


def test_mapping_rules():
    with pytest.raises(ValueError):
        MemMapping("a", 0, "a", 0, 1, 1, 4, "truncate-low")
    with pytest.raises(ValueError):
        MemMapping("a", 0, "a", 0, 1, 4, 1, "zero")


def test_to_bool_conversion():
    assert eval_arg(TypeConv("tobool", 0), [1024]) == 1
    assert eval_arg(TypeConv("tobool", 0), [0]) == 0


@pytest.mark.parametrize("kind,inp,out", [
    ("tobool", 1024, 1), ("identity", 77, 77), ("sext8", 0x80, 0xFFFFFFFFFFFFFF80),
    ("zext8", 0x1FF, 0xFF), ("const0", 5, 0), ("const1", 5, 1),
])
def test_apply_to_ret(kind, inp, out):
    r = RetExpr(kind)
    assert apply_to_ret(r, inp) == out
    assert apply_to_ret(r, BitVecValue.of(inp)).bits == out
    assert T.eval_term(apply_to_ret(r, T.const(inp, 64)), {}).bits == out


def test_arith_term_matches_value():
    a = ArithNode("and", (ArithNode("not", (TargetArg(0),)), ArithNode("add", (TargetArg(0), ConstVal(1)))))
    r = random.Random(3)
    for _ in range(200):
        v = r.getrandbits(64)
        assert eval_arg(a, [v]) == T.eval_term(arg_term(a, [T.const(v, 64)]), {}).bits == (~v & (v + 1)) % 2 ** 64


def test_json_round_trip():
    a = AdapterSpec((TargetArg(0), ConstVal(255), TypeConv("sext16", 1),
                     ArithNode("neg", (TargetArg(2),))),
                    (MemMapping("a", 0, "b", 0, 1, 4, 4, "truncate-low"),), RetExpr("tobool"))
    assert AdapterSpec.from_json(a.to_json()) == a


# --- symbolic encoding ------------------------------------------------------

def test_selector_side_conditions():
    fam = AdapterFamily("argsub", constants=(0, 1))
    sym = encode_symbolic(fam, 3, 1, symbolic_args(3))
    assert sym.check({"y_1_type": 0, "y_1_val": 2})
    assert not sym.check({"y_1_type": 0, "y_1_val": 3})
    assert not sym.check({"y_1_type": 1, "y_1_val": 2})
    assert sym.check({"y_1_type": 1, "y_1_val": 1})


def test_typeconv_selector_uses_substitution_index():
    fam = AdapterFamily("typeconv", constants=(0,))
    sym = encode_symbolic(fam, 2, 1, symbolic_args(2))
    ty = 2 + ["sext8", "sext16", "sext32", "zext8", "zext16", "zext32", "tobool"].index("sext16")
    model = {"y_1_type": ty, "y_1_val": 1}
    assert sym.decode(model).args == (TypeConv("sext16", 1),)
    env = {**model, "arg_0": 5, "arg_1": 0x18000}
    assert T.eval_term(sym.arg_terms[0], env).bits == 0xFFFFFFFFFFFF8000


def test_decode_examples():
    fam = AdapterFamily("argsub", constants=(0, 255))
    sym = encode_symbolic(fam, 3, 1, symbolic_args(3))
    assert sym.decode({"y_1_type": 1, "y_1_val": 255}).args == (ConstVal(255),)
    assert sym.decode({"y_1_type": 0, "y_1_val": 2}).args == (TargetArg(2),)
    with pytest.raises(SideConditionViolated):
        sym.decode({"y_1_type": 0, "y_1_val": 7})


def test_clamp_adapter_encode_round_trip():
    fam = AdapterFamily("argsub", constants=(0, 255))
    sym = encode_symbolic(fam, 1, 3, symbolic_args(1))
    a = AdapterSpec((TargetArg(0), ConstVal(0), ConstVal(255)))
    assert sym.decode(sym.encode(a)) == a


BIJECTION_FAMILIES = [
    (AdapterFamily("argsub", constants=(0, 1)), 2, 2, None, None),
    (AdapterFamily("argsub", constants=(7,), allow_ret=True), 1, 1, None, None),
    (AdapterFamily("argsub", constants=(0, 255)), 1, 3, None, None),
    (AdapterFamily("argsub"), 3, 0, None, None),
    (AdapterFamily("typeconv", constants=(0,), allow_ret=True), 1, 1, None, None),
    (AdapterFamily("typeconv", constants=(0, 1)), 2, 2, None, None),
    (AdapterFamily("arith", constants=(1,), depth=2, ops=("not", "and", "add")), 1, 1, None, None),
    (AdapterFamily("arith", constants=(0, 1), depth=1, ops=("neg", "sub", "xor")), 2, 1, None, None),
    (AdapterFamily("memsub", mem_sizes=(4,), mem_slots=1), 0, 0, SMALL_T, SMALL_I),
    (AdapterFamily("memsub", mem_sizes=(1, 4), mem_slots=2, allow_ret=True), 0, 0, SMALL_T, SMALL_I),
]


@pytest.mark.parametrize("fam,t,i,tf,inf", BIJECTION_FAMILIES)
def test_encode_decode_bijection(fam, t, i, tf, inf):
    size = family_size(fam, t, i, tf, inf)
    assert size <= 10 ** 4
    members = set(enumerate_family(fam, t, i, 0, tf, inf))
    assert len(members) == size
    sym = encode_symbolic(fam, t, i, symbolic_args(t), tf, inf)
    doms = {d.name: d for d in sym.domains}
    decoded = []
    for model in iter_models(sym.side_conditions, doms):
        decoded.append(sym.decode(model))
    assert len(decoded) == len(set(decoded)) == size
    assert set(decoded) == members
    for a in list(members)[:200]:
        assert sym.decode(sym.encode(a)) == a


# --- counting and enumeration ----------------------------------------------

def test_argsub_size_example():
    assert family_size(AdapterFamily("argsub", constants=(0, 1)), 3, 1) == 5


def test_single_constant_enumeration():
    got = set(enumerate_family(AdapterFamily("argsub", constants=(7,)), 1, 1, seed=5))
    assert got == {AdapterSpec((TargetArg(0),)), AdapterSpec((ConstVal(7),))}


def test_distinct_count_formula():
    fam = AdapterFamily("argsub", constants=(0, 1, 2), distinct_args=True)
    expected = sum(math.comb(2, k) * math.perm(5, k) * 3 ** (2 - k) for k in range(3))
    assert family_size(fam, 5, 2) == expected == len(set(enumerate_family(fam, 5, 2)))


def test_seeds_permute_same_set():
    # 5 target args + 10 constants, all 8 return variants: 15 * 8 = 120
    fam = AdapterFamily("argsub", constants=tuple(range(10)), allow_ret=True)
    assert family_size(fam, 5, 1) == 120
    a = list(enumerate_family(fam, 5, 1, seed=1))
    b = list(enumerate_family(fam, 5, 1, seed=2))
    assert set(a) == set(b) and len(a) == len(set(a)) == 120
    assert a != b
    assert a == list(enumerate_family(fam, 5, 1, seed=1))


def test_wide_typeconv_formula():
    fam = AdapterFamily("typeconv", allow_ret=True, distinct_args=True, const_count=2 ** 32)
    expected = 8 * sum((2 ** 32) ** (13 - k) * math.comb(13, k) * math.perm(13, k) * 8 ** k
                       for k in range(14))
    assert family_size(fam, 13, 13) == expected


def test_popcnt_sizes_increase_with_bound():
    sizes = [family_size(AdapterFamily("argsub", constants=tuple(range(b + 1))), 1, 3)
             for b in (1, 2, 4, 8, 11, 16)]
    assert sizes == sorted(set(sizes))


def random_family(r: random.Random):
    kind = r.choice(("argsub", "typeconv", "arith", "memsub"))
    consts = tuple(r.sample(range(300), r.randint(0, 3)))
    ret = r.random() < 0.3
    if kind == "memsub":
        return (AdapterFamily("memsub", mem_sizes=tuple(sorted(r.sample((1, 2, 4), r.randint(1, 2)))),
                              mem_slots=r.randint(0, 2), allow_ret=ret), 0, 0, SMALL_T, SMALL_I)
    t, i = r.randint(0, 3), r.randint(0, 2)
    if kind == "arith":
        fam = AdapterFamily("arith", constants=consts[:1], depth=r.randint(0, 1),
                            ops=tuple(r.sample(("not", "neg", "add", "and", "xor"), 2)), allow_ret=ret)
        return fam, max(t, 1), min(i, 1), None, None
    return AdapterFamily(kind, constants=consts, allow_ret=ret,
                         distinct_args=r.random() < 0.3), t, i, None, None


def test_enumerate_length_matches_size_on_random_families():
    r = random.Random(77)
    done = 0
    while done < 20:
        fam, t, i, tf, inf = random_family(r)
        size = family_size(fam, t, i, tf, inf)
        if size > 20_000:
            continue
        got = list(enumerate_family(fam, t, i, r.randint(0, 99), tf, inf))
        assert len(got) == len(set(got)) == size
        done += 1


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3000), st.integers(0, 2 ** 32))
def test_permutation_is_a_permutation(n, seed):
    assert sorted(permutation(n, seed)) == list(range(n))


def test_large_permutation_prefix_distinct():
    n = (1 << 40) + 12345
    seen = set()
    for k, x in zip(range(5000), permutation(n, 3)):
        assert 0 <= x < n
        seen.add(x)
    assert len(seen) == 5000


def test_count_only_family_cannot_enumerate():
    fam = AdapterFamily("typeconv", const_count=2 ** 32)
    with pytest.raises(ValueError):
        next(enumerate_family(fam, 1, 1))
