"""Bookkeeping description-length estimators and the split diagnostic."""

import math

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from fiberlab import (
    BitStream,
    Bitstring,
    CATALOG_BITS,
    EstimatorHandle,
    InsufficientData,
    MissingLedger,
    SourceLedger,
    dim_slope,
    k_cond_est,
    k_est,
    make_identity,
    make_kakeya_linear,
    sample_ladder,
    sample_point,
    split_check,
)

IDEAL = EstimatorHandle.ideal()
PROXY = EstimatorHandle.proxy()


def _fresh(nbits, seed=0, name="src"):
    src = BitStream(seed, name)
    bits, entry = src.take(nbits, "payload")
    return bits, SourceLedger((entry,))


# ---------------------------------------------------------------- ideal k


def test_ideal_counts_ledgered_bits_plus_catalog():
    bits, ledger = _fresh(32)
    assert k_est(IDEAL, bits, ledger) == 32 + CATALOG_BITS


def test_ideal_requires_ledger():
    bits, _ = _fresh(8)
    with pytest.raises(MissingLedger):
        k_est(IDEAL, bits)


def test_derived_payload_charges_generator_bits_only():
    """A long payload computed from few random bits costs the few bits."""
    src = BitStream(3, "gen")
    seed_bits, entry = src.take(8, "seed")
    derived = Bitstring.from_int(seed_bits.value * 0x9E3779B1, 256)
    assert k_est(IDEAL, derived, SourceLedger((entry,))) == 8 + CATALOG_BITS


def test_conditional_on_everything_is_catalog_constant():
    bits, ledger = _fresh(40)
    assert k_cond_est(IDEAL, bits, ledger, side_payload=bits, side_ledger=ledger) == (
        CATALOG_BITS
    )


def test_conditional_on_nothing_is_unconditional():
    bits, ledger = _fresh(40)
    assert k_cond_est(IDEAL, bits, ledger) == k_est(IDEAL, bits, ledger)


def test_conditioning_never_raises_ideal_cost():
    src = BitStream(9, "gen")
    b1, e1 = src.take(24, "a")
    b2, e2 = src.take(24, "b")
    full = SourceLedger((e1, e2))
    k_plain = k_cond_est(IDEAL, b1 + b2, full)
    k_half = k_cond_est(IDEAL, b1 + b2, full, side_payload=b1, side_ledger=SourceLedger((e1,)))
    k_all = k_cond_est(IDEAL, b1 + b2, full, side_payload=b1 + b2, side_ledger=full)
    assert k_plain >= k_half >= k_all == CATALOG_BITS


# ---------------------------------------------------------------- proxy k


def test_proxy_flags_itself_approximate():
    assert PROXY.approximate
    assert not IDEAL.approximate


def test_proxy_compresses_constant_block():
    block = Bitstring.from_int(0, 4096)
    assert k_est(PROXY, block) < 4096 // 8


def test_proxy_conditional_nonnegative():
    bits, _ = _fresh(64, seed=5)
    side, _ = _fresh(64, seed=6)
    assert k_cond_est(PROXY, bits, side_payload=side) >= 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 64 - 1))
def test_proxy_conditional_on_self_is_small(v):
    bits = Bitstring.from_int(v, 64)
    assert k_cond_est(PROXY, bits, side_payload=bits) <= k_est(PROXY, bits)


# --------------------------------------------------------------- sampling


def test_sample_point_ledger_widths():
    fib = make_identity()
    sp = sample_point(fib, BitStream(11, "pts"), 16)
    assert sp.label_ledger.total_bits() == 16  # label_dim * r
    assert sp.fiber_ledger.total_bits() == 16
    assert sp.point_ledger.total_bits() == 32
    assert sp.label.precision == sp.fiber.precision == 16


def test_sample_point_same_seed_same_point():
    fib = make_kakeya_linear(2, "lipschitz:1/2")
    a = sample_point(fib, BitStream(77, "pts"), 12)
    b = sample_point(fib, BitStream(77, "pts"), 12)
    assert (a.label, a.fiber, a.payload.to01()) == (b.label, b.fiber, b.payload.to01())


def test_sample_point_distinct_seeds_differ():
    fib = make_identity()
    a = sample_point(fib, BitStream(1, "pts"), 20)
    b = sample_point(fib, BitStream(2, "pts"), 20)
    assert (a.label, a.fiber) != (b.label, b.fiber)


# ------------------------------------------------------------ split check


def test_split_gap_identity_constant():
    """Identifiable models: whole-point cost vs label + fiber|label differs
    by exactly one catalog charge, at every precision."""
    rep = split_check(make_identity(), IDEAL, seed=0, n_samples=6, rs=(4, 8, 16, 32))
    assert all(row.gap == -CATALOG_BITS for row in rep.rows)
    assert rep.identifiable


def test_split_gap_kakeya_within_allowance():
    fib = make_kakeya_linear(2, "lipschitz:1/2")
    rep = split_check(fib, IDEAL, seed=4, n_samples=5, rs=(4, 8, 16, 32))
    for row in rep.rows:
        assert abs(row.gap) <= 4 * math.log2(row.r) + 32


def test_split_gap_irregular_grows_linearly():
    fib = make_kakeya_linear(2, "irregular:7")
    rep = split_check(fib, IDEAL, seed=4, n_samples=5, rs=(4, 8, 16, 32))
    assert not rep.identifiable
    assert rep.gap_slope_r > 0.4


def test_split_needs_four_precisions():
    with pytest.raises(InsufficientData):
        split_check(make_identity(), IDEAL, seed=0, n_samples=2, rs=(4, 8, 16))


# ------------------------------------------------------------- dimension


def test_dim_slope_plane_is_two():
    ladder = sample_ladder(make_identity(), 31, (4, 8, 16, 32))
    assert dim_slope(IDEAL, list(ladder.values())) == pytest.approx(2.0, abs=1e-9)


def test_dim_slope_degenerate_fiber_is_one():
    ladder = sample_ladder(make_identity(), 31, (4, 8, 16, 32), degenerate_fiber=True)
    assert dim_slope(IDEAL, list(ladder.values())) == pytest.approx(1.0, abs=1e-9)


def test_dim_slope_needs_four_precisions():
    ladder = sample_ladder(make_identity(), 31, (4, 8, 16))
    with pytest.raises(InsufficientData):
        dim_slope(IDEAL, list(ladder.values()))
