"""Resonance polynomial and region tests, with a symbolic expansion oracle."""

from __future__ import annotations

import json

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from skdvlab.phases import (
    COMPOSITION_TABLE,
    GuardCounter,
    PhaseId,
    RegionParams,
    arity,
    composed_phase,
    in_region,
    inverse_phase,
    inverse_phase_array,
    phase_catalog_json,
    phase_composition_check,
    phase_value,
)

IDENTITY_RTOL = 1e-9
N_RANDOM_TUPLES = 100_000


def test_phase_value_examples():
    assert phase_value(PhaseId.PHI_U1, 2.0, (1.0, 1.0)) == 4.0
    assert phase_value(PhaseId.PHI_V1, 1.0, (2.0, -1.0)) == -4.0
    with pytest.raises(ValueError):
        phase_value(PhaseId.PHI_U1, 2.0, (1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        phase_value(PhaseId.PHI_U2, 2.0, (1.0, 1.0))


def _random_split(rng, total, parts):
    cuts = rng.uniform(-100.0, 100.0, parts - 1)
    return (*cuts, total - np.sum(cuts))


def test_factored_forms_on_random_tuples():
    rng = np.random.default_rng(1)
    xi1 = rng.uniform(-100, 100, N_RANDOM_TUPLES)
    xi2 = rng.uniform(-100, 100, N_RANDOM_TUPLES)
    xi = xi1 + xi2
    relerr = lambda a, b: np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))

    phi_u1 = phase_value(PhaseId.PHI_U1, xi, (xi1, xi2))
    assert relerr(phi_u1, xi2 * (xi1 + xi + xi2**2)) < IDENTITY_RTOL

    phi_v1 = phase_value(PhaseId.PHI_V1, xi, (xi1, xi2))
    assert relerr(phi_v1, -xi * (xi**2 - xi2 + xi1)) < IDENTITY_RTOL

    phi_v2 = phase_value(PhaseId.PHI_V2, xi, (xi1, xi2))
    assert relerr(phi_v2, -3.0 * xi * xi1 * xi2) < IDENTITY_RTOL

    xi3 = rng.uniform(-100, 100, N_RANDOM_TUPLES)
    xi_c = xi1 + xi2 + xi3
    phi_u2 = phase_value(PhaseId.PHI_U2, xi_c, (xi1, xi2, xi3))
    assert relerr(phi_u2, 2.0 * (xi_c - xi1) * (xi_c - xi3)) < IDENTITY_RTOL


def test_all_eight_compositions_hold():
    for outer, inner, slot in COMPOSITION_TABLE:
        assert phase_composition_check(outer, inner, slot), (outer, inner, slot)


def test_illegal_composition_raises():
    for outer, inner, slot in [
        (PhaseId.PHI_U1, PhaseId.PHI_U1, 2),
        (PhaseId.PHI_U1, PhaseId.PHI_V1, 1),
        (PhaseId.PHI_U2, PhaseId.PHI_U1, 1),
        (PhaseId.PHI_V2, PhaseId.PHI_V1, 1),
        (PhaseId.PHI_V1, PhaseId.PHI_V1, 2),
    ]:
        with pytest.raises(ValueError):
            composed_phase(outer, inner, slot)
        with pytest.raises(ValueError):
            phase_composition_check(outer, inner, slot)


def _symbolic_phase(phase: PhaseId, xi, inputs):
    val = phase_value(phase, xi, tuple(inputs))
    return sp.expand(val)


def test_compositions_against_symbolic_oracle():
    # Expand Phi_outer + Phi_inner symbolically and compare with the stored Psi.
    for (outer, inner, slot), (result, conj) in COMPOSITION_TABLE.items():
        children = sp.symbols(f"c0:{arity(inner)}")
        others = sp.symbols(f"o0:{arity(outer) - 1}")
        parent = sum(children)
        if slot == 1:
            parents = (parent, *others)
            child_order = (*children, *others)
        else:
            parents = (*others, parent)
            child_order = (*others, *children)
        xi = sum(parents)
        outer_val = _symbolic_phase(outer, xi, parents)
        if conj:
            inner_val = -_symbolic_phase(inner, -parent, [-c for c in children])
        else:
            inner_val = _symbolic_phase(inner, parent, children)
        psi = _symbolic_phase(result, xi, child_order)
        assert sp.simplify(psi - (outer_val + inner_val)) == 0, (outer, inner, slot)


def test_region_examples():
    p = RegionParams(delta_u=0.1, delta_v=0.1)
    assert in_region("U", 20.0, 0.1, p) is True
    assert in_region("U", 5.0, 0.001, p) is False  # |xi| <= 1/delta_u
    assert in_region("V", 1.0, 50.0, p) is True  # 10 < 50 < 100
    assert in_region("V", 1.0, 200.0, p) is False
    with pytest.raises(ValueError):
        in_region("W", 1.0, 1.0, p)
    with pytest.raises(ValueError):
        RegionParams(delta_u=0.0)


@settings(max_examples=50, deadline=None)
@given(xi=st.floats(-1e4, 1e4), xi1=st.floats(-1e4, 1e4))
def test_u_and_v_partition(xi, xi1):
    p = RegionParams()
    assert in_region("U", xi, xi1, p) != in_region("U_complement", xi, xi1, p)
    assert in_region("V", xi, xi1, p) != in_region("V_complement", xi, xi1, p)


@settings(max_examples=50, deadline=None)
@given(
    xi=st.floats(21.0, 1e3),
    ratio=st.floats(0.0, 0.00999),
    lam=st.floats(1.0, 50.0),
)
def test_u_region_scale_consistency(xi, ratio, lam):
    p = RegionParams()  # 1/delta_u = 20
    xi1 = ratio * xi
    assert in_region("U", xi, xi1, p)
    assert in_region("U", lam * xi, lam * xi1, p)


def test_n5_regions():
    p = RegionParams()
    # |xi2| << |xi| ~ |xi1|: xi = 50, xi1 = 49.9, xi2 = 0.1
    assert in_region("N5_low", 50.0, 49.9, p)
    # xi2 comparable to xi: not low
    assert not in_region("N5_low", 50.0, 25.0, p)
    # |xi1| >~ |xi2| >~ |xi|: xi = 1, xi1 = 30, xi2 = -29
    assert in_region("N5_high", 1.0, 30.0, p)
    # tiny xi2 fails |xi| <= 100 |xi2| when xi is large
    assert not in_region("N5_high", 50.0, 49.9999, p)


def test_inverse_phase_examples():
    assert inverse_phase(PhaseId.PHI_U1, 2.0, (1.0, 1.0)) == pytest.approx(-0.25j)
    counter = GuardCounter()
    val = inverse_phase(PhaseId.PHI_U1, 0.0, (0.0, 0.0), counter=counter)
    assert val == 0.0
    assert counter.triggered == 1
    arr = inverse_phase_array(np.array([4.0, 1e-12, -2.0]), counter=counter)
    np.testing.assert_allclose(arr, [-0.25j, 0.0, 0.5j])
    assert counter.triggered == 2


def test_inverse_phase_never_guards_on_u_region():
    rng = np.random.default_rng(3)
    delta_u = 0.05
    n = 10_000
    mag = rng.uniform(1.0 / delta_u + 1e-6, 1000.0, n)
    xi = np.where(rng.random(n) < 0.5, mag, -mag)
    xi1 = rng.uniform(-1.0, 1.0, n) * (np.abs(xi) / 100.0) * 0.999999
    xi2 = xi - xi1
    params = RegionParams(delta_u=delta_u, delta_v=delta_u)
    assert np.all(in_region("U", xi, xi1, params))
    phi = phase_value(PhaseId.PHI_U1, xi, (xi1, xi2))
    counter = GuardCounter()
    inverse_phase_array(phi, counter=counter)
    assert counter.triggered == 0
    assert np.min(np.abs(phi)) >= (1.0 / delta_u) ** 3 / 2.0


def test_phase_catalog_json():
    entries = json.loads(phase_catalog_json())
    assert len(entries) == 13
    by_id = {e["id"]: e for e in entries}
    assert by_id["PhiU1"]["arity"] == 2
    assert by_id["PsiV4"]["arity"] == 4
    assert by_id["NlsCubic"]["polynomial"] == by_id["PhiU2"]["polynomial"]
    total_comps = sum(len(e["compositions"]) for e in entries)
    assert total_comps == 8
    assert by_id["PsiV3"]["compositions"][0]["conjugated_slot"] is True
