"""Experiment drivers: ambiguity gain, chain-rule floor, minimax, garbling
monotonicity, box-count entropy and the schematic rate curves."""

import math
from fractions import Fraction

import numpy as np
import pytest

from fiberlab import (
    CoverageGap,
    EstimatorHandle,
    GarblingSpec,
    allowance,
    ambiguity_gain,
    chain_rule_floor,
    covering_entropy,
    covering_profile,
    crossing_ambiguity_sample,
    dense_image,
    dpi_check,
    family_ambiguity_sample,
    k_cond_est,
    make_crossing_2d,
    make_identity,
    make_kakeya_linear,
    make_parallel_2d,
    robust_minimax,
    schematic_curves,
)

IDEAL = EstimatorHandle.ideal()
PROXY = EstimatorHandle.proxy()
CROSSING = make_crossing_2d(Fraction(1, 2), Fraction(1, 2))
PARALLEL = make_parallel_2d((Fraction(1, 4), Fraction(3, 4)))


# ------------------------------------------------------------ ambiguity


def test_crossing_gamma_grows_one_bit_per_bit():
    rep = ambiguity_gain(CROSSING, IDEAL, seed=3, n_samples=4, rs=(8, 16, 24, 32))
    assert rep.gamma_slope == pytest.approx(1.0, abs=1e-9)
    for row in rep.rows:
        assert row.gamma == row.r  # redrawn side info shares nothing
        assert row.k_x == 2 * row.r + 16
        assert all(c == row.r + 16 for c in row.conds)


def test_family_gamma_is_member_name_width():
    rep = ambiguity_gain(PARALLEL, IDEAL, seed=3, n_samples=4, rs=(8, 16, 24, 32))
    assert abs(rep.gamma_slope) < 1e-9
    assert {row.gamma for row in rep.rows} == {1}  # one bit names two fibers


def test_gamma_recomputes_from_row_columns():
    rep = ambiguity_gain(CROSSING, IDEAL, seed=9, n_samples=3, rs=(8, 16, 24, 32))
    for row in rep.rows:
        assert row.gamma == row.k_x - min(row.conds)
        assert row.gamma >= 0


# ------------------------------------------------------- chain-rule floor


def test_crossing_floor_holds_with_room():
    sample = crossing_ambiguity_sample(5, 16)
    floor = chain_rule_floor(IDEAL, sample, member=0)
    assert floor == pytest.approx(-32.0)
    cond = k_cond_est(
        IDEAL,
        sample.joint_payload,
        sample.joint_ledger,
        side_payload=sample.member_payloads[0],
        side_ledger=sample.member_ledgers[0],
    )
    assert cond >= floor


def test_floor_on_shared_label_is_nonpositive():
    """When the member label was carved out of the same stream as the
    point, k_x - k_z stays at the catalog constant and the floor dips
    below zero by the whole allowance."""
    sample = family_ambiguity_sample(PARALLEL, 4, 16)
    member = sample.admissible.index(True)
    assert chain_rule_floor(IDEAL, sample, member) <= 0


def test_floor_rejects_proxy_estimator():
    sample = crossing_ambiguity_sample(5, 16)
    with pytest.raises(ValueError):
        chain_rule_floor(PROXY, sample, member=0)


def test_allowance_shape():
    assert allowance(16) == pytest.approx(4 * math.log2(16) + 32)
    with pytest.raises(ValueError):
        allowance(0)


# --------------------------------------------------------------- minimax


def test_minimax_crossing_prefers_full_side_information():
    samples = [crossing_ambiguity_sample(i, 16) for i in range(4)]
    rep = robust_minimax(("member:0", "member:1", "adaptive", "full"), IDEAL, samples)
    assert rep.value == 16
    assert rep.argmin == "full"
    assert rep.sups == (32, 32, 32, 16)


def test_minimax_candidate_order_is_cosmetic():
    samples = [crossing_ambiguity_sample(i, 16) for i in range(3)]
    a = robust_minimax(("member:0", "full"), IDEAL, samples)
    b = robust_minimax(("full", "member:0"), IDEAL, samples)
    assert a.value == b.value
    assert set(a.sups) == set(b.sups)


def test_minimax_fixed_member_fails_off_fiber():
    sample = family_ambiguity_sample(PARALLEL, 1, 8)
    assert sample.admissible == (False, True)
    with pytest.raises(CoverageGap):
        robust_minimax(("member:0",), IDEAL, [sample])


def test_minimax_rejects_mixed_precisions():
    samples = [crossing_ambiguity_sample(0, 8), crossing_ambiguity_sample(1, 16)]
    with pytest.raises(ValueError):
        robust_minimax(("full",), IDEAL, samples)


# ------------------------------------------------------------- garbling


@pytest.mark.parametrize("spec", ["identity", "bit-drop:8", "constant"])
def test_garbling_never_lowers_conditional_cost(spec):
    rep = dpi_check(
        make_identity(), GarblingSpec.parse(spec), IDEAL, seed=2, n_samples=40, r=16
    )
    assert rep.violation_count == 0
    assert rep.max_decrease_bits <= 0


def test_bit_drop_costs_exactly_dropped_bits():
    rep = dpi_check(
        make_identity(), GarblingSpec.parse("bit-drop:8"), IDEAL, seed=2,
        n_samples=20, r=16,
    )
    for row in rep.rows:
        assert row.cond_garbled - row.cond_plain == 8


def test_dpi_report_unpacks_as_verdict_pair():
    rep = dpi_check(
        make_identity(), GarblingSpec.parse("identity"), IDEAL, seed=2,
        n_samples=5, r=16,
    )
    violations, worst = rep
    assert (violations, worst) == (0, 0)


# ------------------------------------------------------ covering entropy


def test_covering_entropy_square_and_line():
    rng = np.random.default_rng(0)
    square = rng.random((60_000, 2))
    line = np.column_stack(
        [np.linspace(0.0, 0.999, 20_000), np.full(20_000, 0.25)]
    )
    assert covering_entropy(square, 5) == pytest.approx(10.0)
    assert covering_entropy(line, 5) == pytest.approx(5.0)


def test_covering_entropy_monotone_in_scale():
    rng = np.random.default_rng(4)
    pts = rng.random((5_000, 2))
    hs = [covering_entropy(pts, k) for k in range(0, 9)]
    assert hs == sorted(hs)
    assert hs[0] == 0.0


def test_kakeya_image_counts_like_a_surface():
    img = dense_image(make_kakeya_linear(2, "lipschitz:1/2"), 10)
    prof = covering_profile(img, (3, 4, 5, 6, 7))
    slope = np.polyfit([p[0] for p in prof], [p[1] for p in prof], 1)[0]
    assert 1.8 <= slope <= 2.1


def test_covering_entropy_input_guards():
    with pytest.raises(ValueError):
        covering_entropy(np.zeros((0, 2)), 4)
    with pytest.raises(ValueError):
        covering_entropy(np.zeros((4, 2)), 40)
    with pytest.raises(ValueError):
        dense_image(make_identity(), 0)


# ------------------------------------------------------------- schematic


def test_schematic_closed_forms():
    table = schematic_curves(3, 2.0)
    assert len(table.rows) == 50
    for row in table.rows:
        assert row.benchmark == pytest.approx(3 * row.r, rel=1e-9)
        assert row.l_reg == pytest.approx(3 * row.r + 2 * math.log2(1 + row.r), rel=1e-9)
        assert row.l_adapt_mild == pytest.approx(3 * row.r - math.sqrt(row.r), rel=1e-9)
        assert row.l_adapt_substantial == pytest.approx(3 * row.r - 0.2 * row.r, rel=1e-9)


def test_schematic_endpoints():
    last = schematic_curves(3, 2.0).rows[-1]
    assert last.r == 50
    assert last.benchmark == pytest.approx(150.0, abs=1e-6)
    assert last.l_reg == pytest.approx(161.344850683943, abs=1e-6)
    assert last.l_adapt_mild == pytest.approx(142.928932188135, abs=1e-6)
    assert last.l_adapt_substantial == pytest.approx(140.0, abs=1e-6)


def test_schematic_gain_shape_parsing():
    with pytest.raises(ValueError):
        schematic_curves(3, 2.0, gammas=("sqrt", "linear:abc"))
    with pytest.raises(ValueError):
        schematic_curves(3, 2.0, gammas=("sqrt",))
    with pytest.raises(ValueError):
        schematic_curves(3, 2.0, gammas=("sqrt", "cubic:1"))
    with pytest.raises(ValueError):
        schematic_curves(3, 2.0, r_range=())
