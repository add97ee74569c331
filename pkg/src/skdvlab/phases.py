"""Resonance polynomials, frequency regions, and inverse-phase multipliers.

The coupled system

    i u_t + u_xx = alpha*u*v + beta*|u|^2 u,
    v_t + v_xxx + (v^2/2)_x = gamma*(|u|^2)_x

has quadratic and cubic interactions whose oscillation in the profile
variables is governed by polynomial resonance functions.  With the
convention  X*(xi) := conj(X(-xi))  every convolution constraint reads
out_freq = sum of input frequencies, and the first-generation phases are

    PhiU1(xi; xi1, xi2) = xi^2 - xi1^2 + xi2^3        (u-equation, u*v term)
    PhiU2(xi; xi1, xi2, xi3) = xi^2 - xi1^2 + xi2^2 - xi3^2   (|u|^2 u term)
    PhiV1(xi; xi1, xi2) = -xi^3 - xi1^2 + xi2^2       (v-equation, |u|^2 term)
    PhiV2(xi; xi1, xi2) = -xi^3 + xi1^3 + xi2^3       (v^2 term)

Substituting one Duhamel right-hand side into another (integration by parts
in time) composes phases: plain slots add the inner phase, conjugated slots
subtract it at reflected frequencies,

    Psi = Phi_outer(xi; parents) + Phi_inner(xi_slot; children)       (plain)
    Psi = Phi_outer(xi; parents) - Phi_inner(-xi_slot; -children)     (conj).

The legal substitutions produce exactly eight second-generation phases
PsiU1..PsiU4, PsiV1..PsiV4.  NlsCubic is the same polynomial as PhiU2 but
tagged separately (it indexes a cubic smoothing estimate, not an evolution
term).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

DEFAULT_GUARD = 1e-8  # |Phi| below this is treated as resonant and zeroed
DEFAULT_DELTA = 0.05  # default delta_u = delta_v region parameter


class PhaseId(str, Enum):
    PHI_U1 = "PhiU1"
    PHI_U2 = "PhiU2"
    PHI_V1 = "PhiV1"
    PHI_V2 = "PhiV2"
    PSI_U1 = "PsiU1"
    PSI_U2 = "PsiU2"
    PSI_U3 = "PsiU3"
    PSI_U4 = "PsiU4"
    PSI_V1 = "PsiV1"
    PSI_V2 = "PsiV2"
    PSI_V3 = "PsiV3"
    PSI_V4 = "PsiV4"
    NLS_CUBIC = "NlsCubic"


# input-frequency labels per phase, in call order
SLOT_LABELS: dict[PhaseId, tuple[str, ...]] = {
    PhaseId.PHI_U1: ("xi1", "xi2"),
    PhaseId.PHI_U2: ("xi1", "xi2", "xi3"),
    PhaseId.PHI_V1: ("xi1", "xi2"),
    PhaseId.PHI_V2: ("xi1", "xi2"),
    PhaseId.PSI_U1: ("xi11", "xi12", "xi2"),
    PhaseId.PSI_U2: ("xi11", "xi12", "xi13", "xi2"),
    PhaseId.PSI_U3: ("xi1", "xi21", "xi22"),
    PhaseId.PSI_U4: ("xi1", "xi21", "xi22"),
    PhaseId.PSI_V1: ("xi11", "xi12", "xi2"),
    PhaseId.PSI_V2: ("xi11", "xi12", "xi13", "xi2"),
    PhaseId.PSI_V3: ("xi1", "xi21", "xi22"),
    PhaseId.PSI_V4: ("xi1", "xi21", "xi22", "xi23"),
    PhaseId.NLS_CUBIC: ("xi1", "xi2", "xi3"),
}

POLYNOMIAL_STRINGS: dict[PhaseId, str] = {
    PhaseId.PHI_U1: "xi^2 - xi1^2 + xi2^3",
    PhaseId.PHI_U2: "xi^2 - xi1^2 + xi2^2 - xi3^2",
    PhaseId.PHI_V1: "-xi^3 - xi1^2 + xi2^2",
    PhaseId.PHI_V2: "-xi^3 + xi1^3 + xi2^3",
    PhaseId.PSI_U1: "xi^2 - xi11^2 + xi12^3 + xi2^3",
    PhaseId.PSI_U2: "xi^2 - xi11^2 + xi12^2 - xi13^2 + xi2^3",
    PhaseId.PSI_U3: "xi^2 - xi1^2 - xi21^2 + xi22^2",
    PhaseId.PSI_U4: "xi^2 - xi1^2 + xi21^3 + xi22^3",
    PhaseId.PSI_V1: "-xi^3 - xi11^2 + xi12^3 + xi2^2",
    PhaseId.PSI_V2: "-xi^3 - xi11^2 + xi12^2 - xi13^2 + xi2^2",
    PhaseId.PSI_V3: "-xi^3 - xi1^2 + xi21^2 + xi22^3",
    PhaseId.PSI_V4: "-xi^3 - xi1^2 + xi21^2 - xi22^2 + xi23^2",
    PhaseId.NLS_CUBIC: "xi^2 - xi1^2 + xi2^2 - xi3^2",
}


def arity(phase: PhaseId) -> int:
    """Number of input frequencies of the phase."""
    return len(SLOT_LABELS[phase])


def phase_value(phase: PhaseId, out_freq, in_freqs):
    """Exact polynomial value of a resonance function.

    Parameters
    ----------
    phase:
        Which resonance polynomial.
    out_freq:
        Output frequency xi (scalar or ndarray).
    in_freqs:
        Tuple of input frequencies, arity(phase) entries, broadcastable.

    Returns
    -------
    Polynomial value (scalar or ndarray).  The convolution constraint
    out_freq = sum(in_freqs) is the caller's responsibility; the polynomial
    is evaluated verbatim.
    """
    if len(in_freqs) != arity(phase):
        raise ValueError(
            f"{phase.value} takes {arity(phase)} input frequencies, got {len(in_freqs)}"
        )
    xi = out_freq
    f = in_freqs
    if phase is PhaseId.PHI_U1:
        return xi**2 - f[0] ** 2 + f[1] ** 3
    if phase in (PhaseId.PHI_U2, PhaseId.NLS_CUBIC):
        return xi**2 - f[0] ** 2 + f[1] ** 2 - f[2] ** 2
    if phase is PhaseId.PHI_V1:
        return -(xi**3) - f[0] ** 2 + f[1] ** 2
    if phase is PhaseId.PHI_V2:
        return -(xi**3) + f[0] ** 3 + f[1] ** 3
    if phase is PhaseId.PSI_U1:
        return xi**2 - f[0] ** 2 + f[1] ** 3 + f[2] ** 3
    if phase is PhaseId.PSI_U2:
        return xi**2 - f[0] ** 2 + f[1] ** 2 - f[2] ** 2 + f[3] ** 3
    if phase is PhaseId.PSI_U3:
        return xi**2 - f[0] ** 2 - f[1] ** 2 + f[2] ** 2
    if phase is PhaseId.PSI_U4:
        return xi**2 - f[0] ** 2 + f[1] ** 3 + f[2] ** 3
    if phase is PhaseId.PSI_V1:
        return -(xi**3) - f[0] ** 2 + f[1] ** 3 + f[2] ** 2
    if phase is PhaseId.PSI_V2:
        return -(xi**3) - f[0] ** 2 + f[1] ** 2 - f[2] ** 2 + f[3] ** 2
    if phase is PhaseId.PSI_V3:
        return -(xi**3) - f[0] ** 2 + f[1] ** 2 + f[2] ** 3
    if phase is PhaseId.PSI_V4:
        return -(xi**3) - f[0] ** 2 + f[1] ** 2 - f[2] ** 2 + f[3] ** 2
    raise AssertionError(f"unhandled phase {phase!r}")


# (outer, inner, slot) -> (result, conjugated_slot)
COMPOSITION_TABLE: dict[tuple[PhaseId, PhaseId, int], tuple[PhaseId, bool]] = {
    (PhaseId.PHI_U1, PhaseId.PHI_U1, 1): (PhaseId.PSI_U1, False),
    (PhaseId.PHI_U1, PhaseId.PHI_U2, 1): (PhaseId.PSI_U2, False),
    (PhaseId.PHI_U1, PhaseId.PHI_V1, 2): (PhaseId.PSI_U3, False),
    (PhaseId.PHI_U1, PhaseId.PHI_V2, 2): (PhaseId.PSI_U4, False),
    (PhaseId.PHI_V1, PhaseId.PHI_U1, 1): (PhaseId.PSI_V1, False),
    (PhaseId.PHI_V1, PhaseId.PHI_U2, 1): (PhaseId.PSI_V2, False),
    (PhaseId.PHI_V1, PhaseId.PHI_U1, 2): (PhaseId.PSI_V3, True),
    (PhaseId.PHI_V1, PhaseId.PHI_U2, 2): (PhaseId.PSI_V4, True),
}


def composed_phase(outer: PhaseId, inner: PhaseId, slot: int) -> PhaseId:
    """Result tag of substituting `inner` into slot `slot` (1-based) of `outer`."""
    try:
        return COMPOSITION_TABLE[(outer, inner, slot)][0]
    except KeyError:
        raise ValueError(
            f"illegal composition ({outer.value}, {inner.value}, slot {slot})"
        ) from None


def composition_values(
    outer: PhaseId, inner: PhaseId, slot: int, out_freq, children, other_parents
):
    """Evaluate both sides of the composition identity.

    `children` are the input frequencies of the inner phase; `other_parents`
    the remaining outer inputs in order.  Returns (psi_value, sum_value) where
    sum_value is Phi_outer + Phi_inner for a plain slot and
    Phi_outer - Phi_inner(-parent; -children) for a conjugated slot.
    """
    result, conjugated = COMPOSITION_TABLE[(outer, inner, slot)]
    parent = sum(children)
    if slot == 1:
        parents = (parent, *other_parents)
        child_order = (*children, *other_parents)
    else:
        parents = (*other_parents, parent)
        child_order = (*other_parents, *children)
    outer_val = phase_value(outer, out_freq, parents)
    if conjugated:
        inner_val = -phase_value(inner, -parent, tuple(-c for c in children))
    else:
        inner_val = phase_value(inner, parent, children)
    psi_val = phase_value(result, out_freq, child_order)
    return psi_val, outer_val + inner_val


def phase_composition_check(
    outer: PhaseId, inner: PhaseId, slot: int, n_samples: int = 10_000, seed: int = 0
) -> bool:
    """Numerically verify Psi = Phi_outer o Phi_inner on random tuples.

    Raises ValueError for (outer, inner, slot) combinations outside the legal
    substitution table.  Returns True iff the identity holds to 1e-9 relative
    on `n_samples` random admissible frequency tuples.
    """
    composed_phase(outer, inner, slot)  # raises on illegal combinations
    rng = np.random.default_rng(seed)
    n_children = arity(inner)
    n_other = arity(outer) - 1
    children = tuple(rng.uniform(-100.0, 100.0, n_samples) for _ in range(n_children))
    others = tuple(rng.uniform(-100.0, 100.0, n_samples) for _ in range(n_other))
    out_freq = sum(children) + sum(others) if others else sum(children)
    lhs, rhs = composition_values(outer, inner, slot, out_freq, children, others)
    scale = np.maximum(1.0, np.abs(lhs))
    return bool(np.max(np.abs(lhs - rhs) / scale) <= 1e-9)


@dataclass(frozen=True)
class RegionParams:
    """Thresholds of the low/high frequency regions."""

    delta_u: float = DEFAULT_DELTA
    delta_v: float = DEFAULT_DELTA

    def __post_init__(self) -> None:
        if not (self.delta_u > 0 and self.delta_v > 0):
            raise ValueError(
                f"delta_u and delta_v must be positive, got {self.delta_u}, {self.delta_v}"
            )


REGIONS = ("U", "U_complement", "V", "V_complement", "N5_low", "N5_high")


def in_region(region: str, out_freq, in_freq1, params: RegionParams):
    """Frequency-region predicate (vectorized over out_freq/in_freq1).

    U:      100|xi1| < |xi|  and  |xi| > 1/delta_u
    V:      1/delta_v < |xi1| < 100|xi|
    N5_low: |xi2| << |xi| ~ |xi1|   with xi2 = xi - xi1
    N5_high:|xi1| >~ |xi2| >~ |xi|

    "a << b" is read as 100a < b and "a ~ b" as b/100 <= a <= 100b (the same
    factor 100 the U/V definitions hard-code).  U/U_complement (and
    V/V_complement) partition the xi1 line for each fixed xi.
    """
    xi = np.abs(np.asarray(out_freq, dtype=float))
    xi1 = np.abs(np.asarray(in_freq1, dtype=float))
    if region == "U":
        result = (100.0 * xi1 < xi) & (xi > 1.0 / params.delta_u)
    elif region == "U_complement":
        result = ~((100.0 * xi1 < xi) & (xi > 1.0 / params.delta_u))
    elif region == "V":
        result = (xi1 > 1.0 / params.delta_v) & (xi1 < 100.0 * xi)
    elif region == "V_complement":
        result = ~((xi1 > 1.0 / params.delta_v) & (xi1 < 100.0 * xi))
    elif region == "N5_low":
        xi2 = np.abs(np.asarray(out_freq, dtype=float) - np.asarray(in_freq1, dtype=float))
        result = (100.0 * xi2 < xi) & (xi / 100.0 <= xi1) & (xi1 <= 100.0 * xi)
    elif region == "N5_high":
        xi2 = np.abs(np.asarray(out_freq, dtype=float) - np.asarray(in_freq1, dtype=float))
        result = (xi2 <= 100.0 * xi1) & (xi <= 100.0 * xi2)
    else:
        raise ValueError(f"unknown region {region!r}; expected one of {REGIONS}")
    return bool(result) if np.isscalar(out_freq) and np.isscalar(in_freq1) else result


@dataclass
class GuardCounter:
    """Mutable tally of near-resonant phase evaluations that were zeroed."""

    triggered: int = 0


def inverse_phase(
    phase: PhaseId,
    out_freq: float,
    in_freqs: tuple,
    guard: float = DEFAULT_GUARD,
    counter: GuardCounter | None = None,
) -> complex:
    """1/(i*Phi), or 0 when |Phi| < guard (counting the event).

    On the integration-by-parts regions the guard is inert (|PhiU1| is
    comparable to |xi|^3 > 1/delta_u^3 on U, likewise for V); it protects
    exploratory evaluation outside them.
    """
    phi = float(phase_value(phase, out_freq, in_freqs))
    if abs(phi) < guard:
        if counter is not None:
            counter.triggered += 1
        return 0.0 + 0.0j
    return 1.0 / (1j * phi)


def inverse_phase_array(
    phi_values: np.ndarray, guard: float = DEFAULT_GUARD, counter: GuardCounter | None = None
) -> np.ndarray:
    """Vectorized 1/(i*Phi) with the same guard semantics as inverse_phase."""
    phi = np.asarray(phi_values, dtype=float)
    small = np.abs(phi) < guard
    if counter is not None:
        counter.triggered += int(np.count_nonzero(small))
    safe = np.where(small, 1.0, phi)
    return np.where(small, 0.0, 1.0 / (1j * safe))


def phase_catalog_json() -> str:
    """JSON documentation dump: every phase with arity, polynomial, compositions."""
    entries = []
    for phase in PhaseId:
        compositions = [
            {
                "outer": outer.value,
                "inner": inner.value,
                "slot": slot,
                "conjugated_slot": conj,
            }
            for (outer, inner, slot), (result, conj) in COMPOSITION_TABLE.items()
            if result is phase
        ]
        entries.append(
            {
                "id": phase.value,
                "arity": arity(phase),
                "inputs": list(SLOT_LABELS[phase]),
                "polynomial": POLYNOMIAL_STRINGS[phase],
                "compositions": compositions,
            }
        )
    return json.dumps(entries, indent=2)
