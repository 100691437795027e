"""Exact dyadic arithmetic and the prefix-free pair code."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from fiberlab import (
    R_MAX,
    Bitstring,
    Box,
    DyadicScalar,
    DyadicVector,
    MalformedHeader,
    OutOfBox,
    PrecisionOverflow,
    decode_fixed,
    decode_pair,
    encode_fixed,
    encode_pair,
    header_length,
    refine_consistency,
    truncate,
    truncate_scalar,
)

finite_reals = st.floats(min_value=-4.0, max_value=4.0,
                         allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------- truncation


@pytest.mark.parametrize(
    "x, r, mantissa",
    [
        (0.625, 3, 5),        # exactly dyadic at r=3
        (Fraction(1, 3), 2, 1),  # floor(4/3) = 1
        (-0.3, 1, -1),        # floor(-0.6) = -1, floor convention
    ],
)
def test_truncate_known_values(x, r, mantissa):
    v = truncate((x,), r)
    assert v.mantissas == (mantissa,)
    assert v.precision == r
    assert v.as_fractions()[0] == Fraction(mantissa, 2 ** r)


def test_truncate_rejects_overflow():
    with pytest.raises(PrecisionOverflow):
        truncate((0.5,), R_MAX + 1)


def test_truncate_rejects_nan():
    with pytest.raises(ValueError):
        truncate((float("nan"),), 4)


@given(st.lists(finite_reals, min_size=1, max_size=3), st.integers(0, 40))
def test_truncation_error_below_grid_step(xs, r):
    v = truncate(xs, r)
    for x, f in zip(xs, v.as_fractions()):
        err = Fraction(x) - f
        assert 0 <= err < Fraction(1, 2 ** r)


@given(
    st.lists(finite_reals, min_size=1, max_size=3),
    st.integers(0, 40),
    st.integers(0, 40),
)
def test_refine_consistency_always_true(xs, r, r2):
    lo, hi = sorted((r, r2))
    assert refine_consistency(xs, lo, hi)


def test_refine_consistency_examples():
    assert refine_consistency((1 / 3,), 2, 10)
    assert refine_consistency((0.625,), 1, 3)


@given(finite_reals, st.integers(0, 40), st.integers(1, 8))
def test_coarsen_matches_direct_truncation(x, r, extra):
    r2 = min(r + extra, 40)
    fine = truncate_scalar(x, r2)
    # coarsening the fine mantissa must agree with truncating directly
    assert fine.coarsen(r) == truncate_scalar(x, r)


def test_vector_components_share_precision():
    v = truncate((0.5, 0.25, 0.125), 6)
    assert v.dim == 3
    assert all(s.precision == 6 for s in (v.scalar(0), v.scalar(1), v.scalar(2)))


# ------------------------------------------------------------- fixed encoding


def test_encode_fixed_enumeration_oracle():
    # [0,1] at r=3 has 9 grid values, so each component takes 4 bits;
    # 0.625 sits at offset 5 -> "0101"
    v = truncate((0.625,), 3)
    bits = encode_fixed(v, Box.unit(1))
    assert bits.to01() == "0101"


def test_encode_fixed_zero_offset():
    v = truncate((0.0, 0.0), 2)
    bits = encode_fixed(v, Box.unit(2))
    assert bits.to01() == "0" * 6  # 2 components, 3 bits each (5 values)


def test_encode_fixed_out_of_box():
    v = truncate((1.5,), 3)
    with pytest.raises(OutOfBox):
        encode_fixed(v, Box.unit(1))


@given(
    st.integers(0, 10),
    st.lists(st.integers(-3, 3), min_size=1, max_size=3),
    st.data(),
)
def test_encode_fixed_round_trip(r, corners, data):
    lo = tuple(Fraction(c) for c in corners)
    hi = tuple(c + 2 for c in lo)
    box = Box(lo, hi)
    lo_m, hi_m = box.corner_mantissas(r)
    ms = tuple(
        data.draw(st.integers(a, b), label=f"m{k}")
        for k, (a, b) in enumerate(zip(lo_m, hi_m))
    )
    v = DyadicVector(ms, r)
    assert decode_fixed(encode_fixed(v, box), box, r, len(ms)) == v


def test_decode_fixed_length_mismatch():
    box = Box.unit(1)
    with pytest.raises(MalformedHeader):
        decode_fixed(Bitstring.from_str("01"), box, 3, 1)  # needs 4 bits


# ----------------------------------------------------------------- pair code


def test_pair_header_budget_example():
    p = Bitstring.from_str("10110")
    q = Bitstring.from_str("0011010")
    both = encode_pair(p, q)
    assert len(both) == 5 + 7 + 6  # header is 2*ceil(log2(5+1)) = 6
    assert header_length(5) == 6


def test_pair_of_empties_costs_two_bits():
    assert len(encode_pair(Bitstring(), Bitstring())) == 2
    assert header_length(0) == 2


@given(st.integers(1, 2 ** 12))
def test_header_length_closed_form(n):
    assert header_length(n) == 2 * math.ceil(math.log2(n + 1))


@settings(max_examples=300)
@given(st.integers(0, 2 ** 40), st.integers(0, 60), st.integers(0, 2 ** 40), st.integers(0, 60))
def test_pair_round_trip(pv, pl, qv, ql):
    p = Bitstring(pv & ((1 << pl) - 1), pl)
    q = Bitstring(qv & ((1 << ql) - 1), ql)
    assert decode_pair(encode_pair(p, q)) == (p, q)


def test_truncated_pair_raises():
    p = Bitstring.from_str("101")
    q = Bitstring.from_str("0")
    whole = encode_pair(p, q)
    with pytest.raises(MalformedHeader):
        decode_pair(whole[: len(whole) - len(q) - 1])  # cut into p


@given(st.integers(0, 2 ** 24), st.integers(0, 24))
def test_pair_fuzz_decodes_or_raises(value, length):
    bits = Bitstring(value & ((1 << length) - 1), length)
    try:
        p, q = decode_pair(bits)
    except MalformedHeader:
        return
    # whatever decoded must re-encode to the input itself
    assert encode_pair(p, q) == bits


# ------------------------------------------------------------- bitstring ops


def test_bitstring_slicing_and_concat():
    b = Bitstring.from_str("1100101")
    assert b[0] == 1 and b[6] == 1
    assert (b[:3] + b[3:]) == b
    assert b.to01() == "1100101"


def test_bitstring_from_int_width():
    b = Bitstring.from_int(5, 4)
    assert b.to01() == "0101"
    assert b.value == 5


def test_serialization_round_trips():
    b = Bitstring.from_str("011010111001010101")
    assert Bitstring.deserialize(b.serialize()) == b
    v = truncate((0.625, -0.3), 5)
    assert DyadicVector.deserialize(v.serialize()) == v
