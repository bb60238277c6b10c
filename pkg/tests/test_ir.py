import random

import pytest
from hypothesis import given, settings, strategies as st

from adaptsynth import library
from adaptsynth.bitvec import BitVecValue, sext, to_signed, binop, is_sdiv_overflow
from adaptsynth.ir import (ArityError, Block, FunctionDef, IRSyntaxError, IRValidationError,
                           Br, UndefinedLabel, WidthMismatch, parse_corpus, parse_function,
                           print_function, validate)
from adaptsynth.randgen import random_function_source

ID_SRC = "func id(x){ entry: ret x }"


def test_parse_identity():
    f = parse_function(ID_SRC)
    assert f.params == ("x",)
    assert len(f.blocks) == 1


def test_clamp_has_four_blocks_with_branches():
    f = library.get("clamp_target")
    assert len(f.blocks) == 4
    assert any(isinstance(b.instrs[-1], Br) for b in f.blocks)
    assert validate(f) == []


def test_seven_params_rejected():
    with pytest.raises(ArityError):
        parse_function("func bad(a,b,c,d,e,f,g){ entry: ret a }")


def test_round_trip_identity():
    f = parse_function(ID_SRC)
    assert parse_function(print_function(f)) == f


def test_round_trip_keeps_structure_of_clamp():
    f = library.get("clamp_target")
    g = parse_function(print_function(f))
    assert [b.label for b in g.blocks] == [b.label for b in f.blocks]
    assert g == f


def test_round_trip_keeps_regions():
    f = library.get("l1")
    g = parse_function(print_function(f))
    assert [(r.name, r.size) for r in g.regions] == [(r.name, r.size) for r in f.regions]


def test_missing_terminator():
    f = FunctionDef("f", ("x",), (), (Block("entry", ()),))
    rules = [v.rule for v in validate(f)]
    assert rules == ["MissingTerminator"]
    with pytest.raises(IRValidationError):
        parse_function("func f(x){ entry: y = add.i64 x, x }")


def test_extend_to_same_width():
    with pytest.raises(WidthMismatch):
        parse_function("func f(x){ entry: y = zext.i64 <- i64 x\n ret y }")


def test_undefined_label():
    f = FunctionDef("f", ("x",), (), (Block("entry", (Br("x", "nowhere", "entry"),)),))
    assert "UndefinedLabel" in [v.rule for v in validate(f)]
    with pytest.raises(UndefinedLabel):
        parse_function("func f(x){ entry: jmp nowhere }")


def test_return_must_be_i64():
    with pytest.raises(WidthMismatch):
        parse_function("func f(x){ entry: y = trunc.i8 <- i64 x\n ret y }")


def test_syntax_error():
    with pytest.raises(IRSyntaxError):
        parse_function("func f(x){ entry: y = frob.i64 x, x\n ret y }")


def test_corpus_keeps_order_and_rejects_duplicates():
    c = parse_corpus(ID_SRC + "\nfunc a(x){ e: ret x }")
    assert list(c) == ["id", "a"]
    with pytest.raises(Exception):
        parse_corpus(ID_SRC + "\n" + ID_SRC)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_random_functions_round_trip(seed):
    src = random_function_source(random.Random(seed))
    f = parse_function(src)
    assert validate(f) == []
    assert parse_function(print_function(f)) == f


# bitvec helpers live here too: they are the IR's value domain

def test_sext_of_0x80():
    assert sext(0x80, 8, 64) == 0xFFFFFFFFFFFFFF80


@given(st.integers(-2 ** 70, 2 ** 70))
def test_bitvec_of_wraps(v):
    b = BitVecValue.of(v)
    assert b.bits == v % 2 ** 64
    assert to_signed(b.bits, 64) == (v + 2 ** 63) % 2 ** 64 - 2 ** 63


@given(st.integers(0, 255), st.integers(1, 255))
def test_signed_division_truncates_toward_zero(a, b):
    sa, sb = to_signed(a, 8), to_signed(b, 8)
    if is_sdiv_overflow(a, b, 8):
        return
    q = to_signed(binop("sdiv", a, b, 8), 8)
    r = to_signed(binop("srem", a, b, 8), 8)
    assert q == int(sa / sb)
    assert q * sb + r == sa
