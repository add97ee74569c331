"""Growth-harness tests: predicted exponents, quadrature stability, reports.

The harnesses are their own oracles for the fitted slopes (the predictions
are closed-form exponent arithmetic), so the checks here concentrate on
quadrature convergence (doubling invariance, local-slope stabilization),
exactness of the structural zeros, and the report formats.
"""
from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skdvlab.counterex import (
    FAMILIES,
    GROWTH_CSV_HEADER,
    GrowthExperiment,
    cor41_modulation_sample,
    cor41_value,
    cor42_value,
    fit_growth,
    growth_csv_rows,
    growth_fit_json,
    local_slopes,
    predicted_exponent,
    rho_window,
    run_growth_experiment,
    sec6_u_iterate,
    sec6_v_iterate,
    sec6_v_kdv_contribution,
)
from skdvlab.grid import Regularity
from skdvlab.phases import PhaseId, phase_value

SLOPE_TOL_PAIRING = 0.1
SLOPE_TOL_ITERATE = 0.15

DYADIC_4_10 = tuple(2**j for j in range(4, 11))
DYADIC_3_9 = tuple(2**j for j in range(3, 10))
DYADIC_6_12 = tuple(2**j for j in range(6, 13))


@pytest.fixture(scope="module")
def cor41_sweep():
    exp = GrowthExperiment("cor41", DYADIC_4_10, Regularity(3.0, 0.0))
    return run_growth_experiment(exp)


@pytest.fixture(scope="module")
def cor42_sweep():
    exp = GrowthExperiment("cor42", DYADIC_4_10, Regularity(0.0, 1.5))
    return run_growth_experiment(exp)


# ---------------------------------------------------------------------------
# pairing families


def test_cor41_slope_matches_predicted_exponent(cor41_sweep):
    assert cor41_sweep.predicted == pytest.approx(-0.49 - 3 * 0.51 + 3.0)
    assert abs(cor41_sweep.fit.slope - cor41_sweep.predicted) < SLOPE_TOL_PAIRING
    assert cor41_sweep.fit.r_squared > 0.999


def test_cor42_slope_matches_predicted_exponent(cor42_sweep):
    assert cor42_sweep.predicted == pytest.approx(1.0 + 1.5 + 3 * (-0.49) - 0.51)
    assert abs(cor42_sweep.fit.slope - cor42_sweep.predicted) < SLOPE_TOL_PAIRING
    assert cor42_sweep.fit.r_squared > 0.999


@pytest.mark.parametrize("fixture", ["cor41_sweep", "cor42_sweep"])
def test_pairing_local_slopes_stabilize(fixture, request):
    sweep = request.getfixturevalue(fixture)
    slopes = local_slopes(sweep.experiment.N_values, sweep.values)
    # pairs indexed from N = 2^4; those at N >= 2^6 start at index 2
    settled = slopes[2:]
    diffs = [abs(a - b) for a, b in zip(settled, settled[1:])]
    assert max(diffs) < 0.02


def test_cor42_at_boundary_regularity_shows_no_divergence():
    exp = GrowthExperiment("cor42", DYADIC_4_10, Regularity(0.5, 1.5))
    sweep = run_growth_experiment(exp)
    assert sweep.predicted == pytest.approx(0.02)
    assert abs(sweep.fit.slope - sweep.predicted) < SLOPE_TOL_PAIRING
    assert sweep.fit.slope < 0.1


def test_empty_constraint_set_gives_exact_zero():
    shifted = ((3.0, 4.0), (0.0, 1.0))
    assert cor41_value(16, Regularity(3.0, 0.0), h1_support=shifted) == 0.0
    assert cor42_value(16, Regularity(0.0, 1.5), h1_support=shifted) == 0.0


def test_cor41_modulation_scale_separation():
    N = 256
    sample = cor41_modulation_sample(N)
    assert 0.125 < sample["input_low"] < 8.0
    assert 0.125 < sample["input_high"] / N**3 < 8.0
    assert 0.125 < sample["output"] / N < 8.0


# ---------------------------------------------------------------------------
# iterate families


def test_sec6_u_slope_matches_predicted_exponent():
    exp = GrowthExperiment("sec6_region1", DYADIC_3_9, Regularity(0.25, 3.0))
    sweep = run_growth_experiment(exp)
    assert sweep.predicted == pytest.approx(0.25 - 3.0)
    assert abs(sweep.fit.slope - sweep.predicted) < SLOPE_TOL_ITERATE


def test_sec6_u_slope_stable_under_c_time_sweep():
    slopes = []
    for c in (0.05, 0.1, 0.2):
        exp = GrowthExperiment(
            "sec6_region1", DYADIC_3_9, Regularity(0.25, 3.0), c_time=c
        )
        slopes.append(run_growth_experiment(exp).fit.slope)
    assert max(slopes) - min(slopes) < 0.01
    assert all(abs(m + 2.75) < SLOPE_TOL_ITERATE for m in slopes)


def test_sec6_u_ratio_grows_when_data_regularity_gap_exceeds_three():
    exp = GrowthExperiment("sec6_region1", DYADIC_3_9, Regularity(4.0, 0.5))
    sweep = run_growth_experiment(exp)
    ratios = [v / N**0.5 for N, v in zip(DYADIC_3_9, sweep.values)]
    assert ratios[-1] > 4.0 * ratios[0]


def test_sec6_u_ratio_bounded_when_gap_at_most_three():
    exp = GrowthExperiment("sec6_region1", DYADIC_3_9, Regularity(2.0, 0.0))
    sweep = run_growth_experiment(exp)
    ratios = [v / N**0.0 for N, v in zip(DYADIC_3_9, sweep.values)]
    assert ratios[-1] <= 1.05 * ratios[0]


def test_sec6_v_slope_matches_predicted_exponent():
    exp = GrowthExperiment(
        "sec6_region2", DYADIC_6_12, Regularity(0.25, 4.0), rho=2.0
    )
    sweep = run_growth_experiment(exp)
    assert sweep.predicted == pytest.approx(4.0 - 2.0 - 2.0 + 0.5)
    assert abs(sweep.fit.slope - sweep.predicted) < SLOPE_TOL_ITERATE
    slopes = local_slopes(exp.N_values, sweep.values)
    assert all(a > b for a, b in zip(slopes, slopes[1:]))
    assert abs(slopes[-1] - sweep.predicted) < 0.05


def test_iterates_vanish_at_time_zero():
    assert sec6_u_iterate(16, Regularity(0.25, 3.0), 0.0) == 0.0
    assert sec6_v_iterate(32, Regularity(0.25, 4.0), 2.0, 0.0) == 0.0


def test_kdv_self_interaction_contributes_exactly_zero():
    assert sec6_v_kdv_contribution(64, Regularity(0.25, 4.0)) == 0.0


def test_doubling_quadrature_resolution_changes_values_below_one_percent():
    reg_pair = Regularity(3.0, 0.0)
    reg_iter = Regularity(0.25, 4.0)
    pairs = [
        (cor41_value(64, reg_pair), cor41_value(64, reg_pair, quad_scale=2)),
        (cor42_value(64, reg_pair), cor42_value(64, reg_pair, quad_scale=2)),
        (
            sec6_u_iterate(64, reg_iter),
            sec6_u_iterate(64, reg_iter, quad_scale=2),
        ),
        (
            sec6_v_iterate(64, reg_iter, 2.0),
            sec6_v_iterate(64, reg_iter, 2.0, quad_scale=2),
        ),
    ]
    for coarse, fine in pairs:
        assert abs(fine - coarse) < 0.01 * abs(coarse)


@given(
    xi=st.floats(-100.0, 100.0),
    xi1=st.floats(-100.0, 100.0),
)
@settings(max_examples=50, deadline=None)
def test_sec6_v_phase_agrees_with_resonance_catalog(xi, xi1):
    xi2 = xi - xi1
    inline = xi**3 - xi1**2 + xi2**2
    catalog = -phase_value(PhaseId.PHI_V1, xi, (xi2, xi1))
    assert inline == pytest.approx(catalog, rel=1e-12, abs=1e-9)


# ---------------------------------------------------------------------------
# experiment validation


def test_unknown_family_rejected():
    with pytest.raises(ValueError, match="unknown family"):
        GrowthExperiment("cor43", (16, 32), Regularity(1.0, 0.0))


@pytest.mark.parametrize("bad", [(12, 16), (16, 8), (2, 4), ()])
def test_bad_N_values_rejected(bad):
    with pytest.raises(ValueError):
        GrowthExperiment("cor41", bad, Regularity(1.0, 0.0))


def test_c_time_outside_unit_interval_rejected():
    with pytest.raises(ValueError, match="c_time"):
        GrowthExperiment("sec6_region1", (8, 16), Regularity(1.0, 0.0), c_time=1.5)


def test_rho_window_enforced_by_constructor():
    reg = Regularity(0.25, 4.0)
    assert rho_window(reg) == (0.75, 2.5)
    with pytest.raises(ValueError, match="strictly inside"):
        GrowthExperiment("sec6_region2", (16, 32), reg, rho=2.5)
    with pytest.raises(ValueError, match="strictly inside"):
        GrowthExperiment("sec6_region2", (16, 32), reg, rho=None)
    exp = GrowthExperiment("sec6_region2", (16, 32), reg, rho=1.0)
    assert exp.rho_window_width() == pytest.approx(1.75)


def test_rho_rejected_for_other_families():
    with pytest.raises(ValueError, match="sec6_region2"):
        GrowthExperiment("cor41", (16, 32), Regularity(1.0, 0.0), rho=1.0)


def test_iterate_preconditions():
    with pytest.raises(ValueError, match="at least 8"):
        sec6_u_iterate(4, Regularity(1.0, 0.0))
    with pytest.raises(ValueError, match="at least 16"):
        sec6_v_iterate(8, Regularity(0.25, 4.0), 2.0)
    with pytest.raises(ValueError, match="strictly inside"):
        sec6_v_iterate(32, Regularity(0.25, 4.0), 0.5)
    with pytest.raises(ValueError, match="nonnegative"):
        sec6_u_iterate(16, Regularity(1.0, 0.0), -0.1)


# ---------------------------------------------------------------------------
# fits and reports


def test_fit_recovers_exact_power_law():
    Ns = (16, 32, 64, 128)
    values = [0.37 * N**1.7 for N in Ns]
    fit = fit_growth(Ns, values)
    assert fit.slope == pytest.approx(1.7, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log2(0.37), abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0)
    assert local_slopes(Ns, values) == pytest.approx((1.7, 1.7, 1.7))


def test_fit_rejects_degenerate_input():
    with pytest.raises(ValueError, match="at least two"):
        fit_growth((16,), (1.0,))
    with pytest.raises(ValueError, match="nonpositive"):
        fit_growth((16, 32), (1.0, 0.0))


def test_predicted_exponents_cover_all_families():
    reg = Regularity(1.0, 0.5)
    exps = {
        "cor41": GrowthExperiment("cor41", (16, 32), reg),
        "cor42": GrowthExperiment("cor42", (16, 32), reg),
        "sec6_region1": GrowthExperiment("sec6_region1", (16, 32), reg),
        "sec6_region2": GrowthExperiment(
            "sec6_region2", (16, 32), Regularity(0.25, 4.0), rho=2.0
        ),
    }
    assert set(exps) == set(FAMILIES)
    assert predicted_exponent(exps["cor41"]) == pytest.approx(-0.49 - 1.53 + 0.5)
    assert predicted_exponent(exps["cor42"]) == pytest.approx(1.0 + 0.5 - 1.0 - 1.47 - 0.51)
    assert predicted_exponent(exps["sec6_region1"]) == pytest.approx(-2.0)
    assert predicted_exponent(exps["sec6_region2"]) == pytest.approx(0.5)


def test_csv_rows_follow_declared_header():
    assert GROWTH_CSV_HEADER == "family,N,k,s,b,bprime,rho,c,value"
    exp = GrowthExperiment("cor41", (16, 32), Regularity(3.0, 0.0))
    rows = growth_csv_rows(exp, (1.5, 3.0))
    assert len(rows) == 2
    first = rows[0].split(",")
    assert first[0] == "cor41"
    assert first[1] == "16"
    assert float(first[2]) == 3.0 and float(first[3]) == 0.0
    assert first[6] == "" and first[7] == ""  # rho and c not meaningful
    assert float(first[8]) == 1.5

    exp_v = GrowthExperiment(
        "sec6_region2", (16, 32), Regularity(0.25, 4.0), rho=2.0
    )
    row_v = growth_csv_rows(exp_v, (0.25, 0.5))[0].split(",")
    assert float(row_v[6]) == 2.0
    assert float(row_v[7]) == 0.1


def test_csv_rows_require_matching_lengths():
    exp = GrowthExperiment("cor41", (16, 32), Regularity(3.0, 0.0))
    with pytest.raises(ValueError, match="one value per N"):
        growth_csv_rows(exp, (1.0,))


def test_fit_json_is_deterministic_and_reports_window():
    exp = GrowthExperiment(
        "sec6_region2", (64, 128, 256), Regularity(0.25, 4.0), rho=2.0
    )
    sweep = run_growth_experiment(exp)
    text = growth_fit_json(sweep)
    assert text == growth_fit_json(run_growth_experiment(exp))
    payload = json.loads(text)
    assert payload["family"] == "sec6_region2"
    assert payload["predicted_exponent"] == pytest.approx(0.5)
    assert payload["rho_window"] == [0.75, 2.5]
    assert payload["rho_window_width"] == pytest.approx(1.75)
    assert len(payload["values"]) == 3
    assert len(payload["local_slopes"]) == 2
