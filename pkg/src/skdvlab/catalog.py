"""Catalog of frequency-restricted estimates for the coupled system.

A frequency-restricted estimate (FRE) bounds, for a resonance polynomial
Phi, a nonnegative weight W, and a frequency region R, the quantity

    sup_(fixed slots)  integral_{R cap {|Phi - alpha| < M}}  W * Xi^eta

by  C * <alpha>^a * M^b, where Xi = max_j <xi_j> and the integral runs over
the free frequency slots on the convolution plane out_freq = sum(inputs).
Each catalog entry freezes one such estimate: the window phase, the squared
integrand weight (the |multiplier|^2 * <xi>^{2s} / prod <xi_j>^{2s_j}
combination that survives the Cauchy-Schwarz reduction), the region, the
validity polygon in the (k, s) regularity plane, and the supremum of the
admissible smoothing gain eps(k, s).

Weights come in two kinds.  Most entries carry a *surrogate* power-law
weight in which the inverse phase 1/|Phi| has already been replaced by its
lower bound on the region (e.g. |PhiU1| >~ |xi2|^3 on U).  The boundary-term
entries (lem:bdryHs-u/-v) and the composed-operator entry (lem:N0B) keep the
*exact* 1/Phi^2 kernel; lem:bdryHs-* are additionally windowless -- their
sup-integral runs over the whole region with no |Phi - alpha| < M cut.

Two caveats recorded as data rather than hidden:

* With the hard region constants (factor 100, thresholds 1/delta), the exact
  kernel of lem:bdryHs-v has zeros of PhiV1 inside V for moderate |out_freq|
  (the guard in the evaluation engine flags these); the power-law envelope
  |PhiV1| >~ |xi|^3 only holds once |xi| clears the constants.
* The dyadic window machinery behind the <alpha>*M bounds assumes M > 1 and,
  for the sharpest small-factor bounds, M <~ |alpha|.

Entry ids ("lem:1", "lem:probU", ...) are frozen API keys; the CLI and the
CSV sweep format refer to them verbatim.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .grid import Regularity, bracket
from .phases import PhaseId, RegionParams, SLOT_LABELS, in_region, phase_value

__all__ = [
    "Constraint",
    "PowerFactor",
    "PhiKernel",
    "PowerProduct",
    "RegionRef",
    "TwoSidedCase",
    "EstimateEntry",
    "CATALOG",
    "catalog_lookup",
    "estimate_ids",
    "A_CONSTRAINTS",
    "A0_CONSTRAINTS",
    "in_A",
    "in_A0",
    "catalog_json",
]


# ---------------------------------------------------------------------------
# Regularity-plane constraints: a*k + b*s < c  (or <= c).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constraint:
    """Half-plane constraint coef_k*k + coef_s*s < bound (strict) or <= bound."""

    coef_k: float
    coef_s: float
    bound: float
    strict: bool
    label: str

    def holds(self, k, s):
        value = self.coef_k * np.asarray(k, dtype=float) + self.coef_s * np.asarray(
            s, dtype=float
        )
        return value < self.bound if self.strict else value <= self.bound


def _all_hold(constraints: tuple[Constraint, ...], k, s):
    result = np.full(np.broadcast(np.asarray(k), np.asarray(s)).shape, True)
    for c in constraints:
        result = result & c.holds(k, s)
    return bool(result) if result.shape == () else result


# The well-posedness regularity window and its inner (fixed-point) window.
A_CONSTRAINTS: tuple[Constraint, ...] = (
    Constraint(-1.0, 0.0, 0.0, False, "k >= 0"),
    Constraint(0.0, -1.0, 0.75, True, "s > -3/4"),
    Constraint(-4.0, 1.0, 0.0, True, "s < 4k"),
    Constraint(1.0, -1.0, 3.0, True, "k - s < 3"),
    Constraint(-1.0, 1.0, 2.0, True, "k - s > -2"),
)

A0_CONSTRAINTS: tuple[Constraint, ...] = (
    Constraint(-1.0, 0.0, 0.0, False, "k >= 0"),
    Constraint(0.0, -1.0, 0.75, True, "s > -3/4"),
    Constraint(-4.0, 1.0, 0.0, True, "s < 4k"),
    Constraint(1.0, -1.0, 2.0, True, "k - s < 2"),
    Constraint(-1.0, 1.0, 1.0, True, "k - s > -1"),
)


def in_A(k, s):
    """Membership in the admissible regularity window (vectorized)."""
    return _all_hold(A_CONSTRAINTS, k, s)


def in_A0(k, s):
    """Membership in the inner window where both formulations contract."""
    return _all_hold(A0_CONSTRAINTS, k, s)


# ---------------------------------------------------------------------------
# Weight structure: products of |x|^p / <x>^p factors and 1/Phi^2 kernels,
# with exponents affine in (k, s, eps).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerFactor:
    """One factor <symbol>^p or |symbol|^p with p = ck*k + cs*s + ce*eps + c0."""

    symbol: str
    power: tuple[float, float, float, float]
    use_bracket: bool = True

    def exponent(self, reg: Regularity) -> float:
        ck, cs, ce, c0 = self.power
        return ck * reg.k + cs * reg.s + ce * reg.eps + c0


@dataclass(frozen=True)
class PhiKernel:
    """Inverse-phase factor 1/|Phi(out_symbol; in_symbols)|^power in a weight."""

    phase: PhaseId
    out_symbol: str
    in_symbols: tuple[str, ...]
    power: float = 2.0

    def value(self, values: dict) -> np.ndarray:
        return np.asarray(
            phase_value(
                self.phase,
                values[self.out_symbol],
                tuple(values[s] for s in self.in_symbols),
            ),
            dtype=float,
        )


@dataclass(frozen=True)
class PowerProduct:
    """numerator / (denominator * |Phi_kernel|^p), all factors PowerFactor."""

    numerator: tuple[PowerFactor, ...]
    denominator: tuple[PowerFactor, ...]
    kernel: PhiKernel | None = None

    def value(self, values: dict, reg: Regularity) -> np.ndarray:
        """Evaluate on resolved symbol values (kernel zeros propagate to inf)."""
        result = np.array(1.0)
        for f in self.numerator:
            base = bracket(values[f.symbol]) if f.use_bracket else np.abs(values[f.symbol])
            result = result * base ** f.exponent(reg)
        for f in self.denominator:
            base = bracket(values[f.symbol]) if f.use_bracket else np.abs(values[f.symbol])
            result = result / base ** f.exponent(reg)
        if self.kernel is not None:
            with np.errstate(divide="ignore"):
                result = result / np.abs(self.kernel.value(values)) ** self.kernel.power
        return result


@dataclass(frozen=True)
class RegionRef:
    """Region predicate in_region(name, values[out_symbol], values[in_symbol])."""

    name: str
    out_symbol: str
    in_symbol: str


@dataclass(frozen=True)
class TwoSidedCase:
    """A two-sided split: fix one slot subset with weight m1, the complementary
    subset with m2; m1*m2 must reproduce the entry's squared weight exactly."""

    label: str
    fix_first: tuple[str, ...]
    fix_second: tuple[str, ...]
    m1: PowerProduct
    m2: PowerProduct


# ---------------------------------------------------------------------------
# Catalog entries.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimateEntry:
    """One frozen frequency-restricted estimate.

    Fields
    ------
    phase:
        Window polynomial (the |Phi - alpha| < M cut uses this phase on the
        leaf frequencies; `windowed=False` entries integrate over the bare
        region instead).
    leaves:
        Free frequency labels, in phase call order; out_freq = sum(leaves).
    parents:
        Composite labels (sums of leaf subsets) that weights/regions refer to.
    weight:
        Squared window integrand (multiplier) as a structured power product.
    region:
        Conjunction of region predicates; empty tuple = the whole plane.
    fixed_slots:
        Canonical single fixed slots of the one-sided form; empty for entries
        whose natural statement is the two-sided split.
    validity:
        Half-plane constraints on (k, s) under which the bound is claimed.
    eps_forms:
        The admissible gain satisfies eps < min(a*k + b*s + c) over these
        (a, b, c) rows; empty tuple = the entry has no gain parameter.
    slot_eps_forms:
        Extra per-slot provisos (slot label, (a, b, c)) refining eps_forms.
    claimed_alpha_exponent / claimed_M_exponent:
        The claimed envelope value <~ <alpha>^a M^b (small factor aside).
    small_factor:
        "delta_u" / "delta_v" when the bound carries a (delta)^(0+) factor.
    """

    estimate_id: str
    phase: PhaseId
    leaves: tuple[str, ...]
    parents: tuple[tuple[str, tuple[str, ...]], ...]
    weight: PowerProduct
    region: tuple[RegionRef, ...]
    windowed: bool
    fixed_slots: tuple[str, ...]
    validity: tuple[Constraint, ...]
    eps_forms: tuple[tuple[float, float, float], ...]
    slot_eps_forms: tuple[tuple[str, tuple[float, float, float]], ...]
    claimed_alpha_exponent: float
    claimed_M_exponent: float
    small_factor: str
    description: str
    two_sided: tuple[TwoSidedCase, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.leaves)

    def resolve_values(self, out_freq, in_freqs: tuple) -> dict:
        """Map every symbol (out, leaves, parents) to its numeric value."""
        if len(in_freqs) != self.arity:
            raise ValueError(
                f"{self.estimate_id} takes {self.arity} input frequencies, "
                f"got {len(in_freqs)}"
            )
        values = {"out": np.asarray(out_freq, dtype=float)}
        for label, freq in zip(self.leaves, in_freqs):
            values[label] = np.asarray(freq, dtype=float)
        for label, members in self.parents:
            values[label] = sum(values[m] for m in members)
        return values

    def multiplier(self, out_freq, in_freqs: tuple, reg: Regularity) -> np.ndarray:
        """Squared window integrand at the given frequencies.

        This is the quantity the two-sided split weights must multiply back
        to; exact 1/Phi^2 kernels are evaluated verbatim (no guard), so the
        value is inf on kernel zeros.
        """
        return self.weight.value(self.resolve_values(out_freq, in_freqs), reg)

    def region_mask(self, out_freq, in_freqs: tuple, params: RegionParams):
        """Conjunction of the entry's region predicates (vectorized)."""
        values = self.resolve_values(out_freq, in_freqs)
        shape = np.broadcast(values["out"], *(values[l] for l in self.leaves)).shape
        mask = np.full(shape, True)
        for ref in self.region:
            mask = mask & in_region(
                ref.name, values[ref.out_symbol], values[ref.in_symbol], params
            )
        return bool(mask) if mask.shape == () else mask

    def in_validity(self, k, s):
        return _all_hold(self.validity, k, s)

    def eps_sup(self, k: float, s: float) -> float | None:
        """Supremum of admissible eps at (k, s); None if no gain parameter."""
        if not self.eps_forms:
            return None
        return min(a * k + b * s + c for a, b, c in self.eps_forms)

    def slot_eps_sup(self, slot: str, k: float, s: float) -> float | None:
        """Admissible-eps supremum when only `slot` is held fixed.

        Slots with an explicit proviso use it in place of the headline
        window (the headline is the minimum over all slots, so a single
        slot may admit a wider gain); slots without one fall back to
        eps_sup.
        """
        forms = [
            a * k + b * s + c for label, (a, b, c) in self.slot_eps_forms if label == slot
        ]
        if forms:
            return min(forms)
        return self.eps_sup(k, s)


def _bf(symbol: str, ck=0.0, cs=0.0, ce=0.0, c0=0.0) -> PowerFactor:
    return PowerFactor(symbol, (ck, cs, ce, c0), use_bracket=True)


def _af(symbol: str, c0: float) -> PowerFactor:
    return PowerFactor(symbol, (0.0, 0.0, 0.0, c0), use_bracket=False)


def _c(coef_k, coef_s, bound, label, strict=True) -> Constraint:
    return Constraint(coef_k, coef_s, bound, strict, label)


_LEM3_SPLIT = TwoSidedCase(
    label="case_a",
    fix_first=("out", "xi11"),
    fix_second=("xi2", "xi12"),
    m1=PowerProduct(
        numerator=(_bf("out", ck=1, ce=1),),
        denominator=(_af("xi2", 2.5), _bf("xi11", ck=1), _bf("xi12", cs=1), _bf("xi2", cs=1)),
    ),
    m2=PowerProduct(
        numerator=(_bf("out", ck=1, ce=1),),
        denominator=(_af("xi2", 3.5), _bf("xi11", ck=1), _bf("xi12", cs=1), _bf("xi2", cs=1)),
    ),
)


def _entries() -> tuple[EstimateEntry, ...]:
    bilinear_u = SLOT_LABELS[PhaseId.PHI_U1]  # ("xi1", "xi2")
    return (
        EstimateEntry(
            estimate_id="lem:1",
            phase=PhaseId.PHI_U1,
            leaves=bilinear_u,
            parents=(),
            weight=PowerProduct(
                numerator=(_bf("out", ck=2, ce=2),),
                denominator=(_bf("xi1", ck=2), _bf("xi2", cs=2)),
            ),
            region=(RegionRef("U_complement", "out", "xi1"),),
            windowed=True,
            fixed_slots=("out", "xi1"),
            validity=(_c(0, -1, 1, "s > -1"),),
            eps_forms=((0.0, 0.5, 0.5), (0.0, 0.0, 0.5)),
            slot_eps_forms=(),
            claimed_alpha_exponent=1.0,
            claimed_M_exponent=1.0,
            small_factor="",
            description=(
                "<out>^{2(k+eps)} / (<xi1>^{2k} <xi2>^{2s}) over U^c; "
                "value <~ M for s > -1, eps < min{(s+1)/2, 1/2}"
            ),
        ),
        EstimateEntry(
            estimate_id="lem:probU",
            phase=PhaseId.PHI_U1,
            leaves=bilinear_u,
            parents=(),
            weight=PowerProduct(
                numerator=(_bf("out", ck=2, ce=2),),
                denominator=(_bf("xi1", ck=2), _bf("xi2", cs=2)),
            ),
            region=(RegionRef("U", "out", "xi1"),),
            windowed=True,
            fixed_slots=("out", "xi1", "xi2"),
            validity=(_c(1, -1, 2, "k - s < 2"),),
            eps_forms=((-1.0, 1.0, 2.0),),
            slot_eps_forms=(
                ("out", (-1.0, 1.0, 2.5)),
                ("xi1", (-1.0, 1.0, 2.5)),
                ("xi2", (-1.0, 1.0, 2.0)),
            ),
            claimed_alpha_exponent=1.0,
            claimed_M_exponent=1.0,
            small_factor="delta_u",
            description=(
                "<out>^{2(k+eps)} / (<xi1>^{2k} <xi2>^{2s}) over U; "
                "value <~ (delta_u)^(0+) |alpha| M for k - s + eps < 2"
            ),
        ),
        EstimateEntry(
            estimate_id="lem:2",
            phase=PhaseId.PHI_V1,
            leaves=bilinear_u,
            parents=(),
            weight=PowerProduct(
                numerator=(_af("out", 2.0), _bf("out", cs=2, ce=2)),
                denominator=(_bf("xi1", ck=2), _bf("xi2", ck=2)),
            ),
            region=(RegionRef("V_complement", "out", "xi1"),),
            windowed=True,
            fixed_slots=("out", "xi1", "xi2"),
            validity=(_c(-4, 1, 0, "s < 4k"), _c(-2, 1, 1.5, "s < 2k + 3/2")),
            eps_forms=((4.0, -1.0, 0.0), (2.0, -1.0, 1.5)),
            slot_eps_forms=(),
            claimed_alpha_exponent=1.0,
            claimed_M_exponent=1.0,
            small_factor="",
            description=(
                "out^2 <out>^{2(s+eps)} / (<xi1>^{2k} <xi2>^{2k}) over V^c; "
                "value <~ <alpha> M for s < min{4k, 2k + 3/2}"
            ),
        ),
        EstimateEntry(
            estimate_id="lem:probV",
            phase=PhaseId.PHI_V1,
            leaves=bilinear_u,
            parents=(),
            weight=PowerProduct(
                numerator=(_af("out", 2.0), _bf("out", cs=2, ce=2)),
                denominator=(_bf("xi1", ck=2), _bf("xi2", ck=2)),
            ),
            region=(RegionRef("V", "out", "xi1"),),
            windowed=True,
            fixed_slots=("out", "xi1", "xi2"),
            validity=(_c(-1, 1, 1, "k - s > -1"),),
            eps_forms=((1.0, -1.0, 1.0),),
            slot_eps_forms=(
                ("xi1", (1.0, -1.0, 1.5)),
                ("xi2", (1.0, -1.0, 1.5)),
                ("out", (1.0, -1.0, 1.0)),
            ),
            claimed_alpha_exponent=1.0,
            claimed_M_exponent=1.0,
            small_factor="delta_v",
            description=(
                "out^2 <out>^{2(s+eps)} / (<xi1>^{2k} <xi2>^{2k}) over V; "
                "value <~ (delta_v)^(0+) <alpha> M for s + eps - k < 1 (output slot)"
            ),
        ),
        EstimateEntry(
            estimate_id="lem:3",
            phase=PhaseId.PSI_U1,
            leaves=SLOT_LABELS[PhaseId.PSI_U1],
            parents=(("xi1", ("xi11", "xi12")),),
            weight=PowerProduct(
                numerator=(_bf("out", ck=2, ce=2),),
                denominator=(
                    _af("xi2", 6.0),
                    _bf("xi11", ck=2),
                    _bf("xi12", cs=2),
                    _bf("xi2", cs=2),
                ),
            ),
            region=(RegionRef("U", "out", "xi1"),),
            windowed=True,
            fixed_slots=(),
            validity=(
                _c(1, -1, 3, "k - s < 3"),
                _c(-1, -1, 1.5, "s + k > -3/2"),
                _c(0, -1, 2.5, "s > -5/2"),
            ),
            eps_forms=((-1.0, 1.0, 3.0), (0.0, 2.0, 5.0)),
            slot_eps_forms=(),
            claimed_alpha_exponent=1.0,
            claimed_M_exponent=1.0,
            small_factor="",
            description=(
                "<out>^{2(k+eps)} / (xi2^6 <xi11>^{2k} <xi12>^{2s} <xi2>^{2s}) with "
                "xi1 = xi11 + xi12 in U; surrogate for the 1/|PhiU1| kernel"
            ),
            two_sided=(_LEM3_SPLIT,),
        ),
        EstimateEntry(
            estimate_id="lem:4",
            phase=PhaseId.PSI_U2,
            leaves=SLOT_LABELS[PhaseId.PSI_U2],
            parents=(("xi1", ("xi11", "xi12", "xi13")),),
            weight=PowerProduct(
                numerator=(_bf("out", ck=2, ce=2),),
                denominator=(
                    _af("xi2", 6.0),
                    _bf("xi11", ck=2),
                    _bf("xi12", ck=2),
                    _bf("xi13", ck=2),
                    _bf("xi2", cs=2),
                ),
            ),
            region=(RegionRef("U", "out", "xi1"),),
            windowed=True,
            fixed_slots=(),
            validity=(_c(1, -1, 3, "k - s < 3"), _c(-1, 0, 0, "k >= 0", strict=False)),
            eps_forms=((-1.0, 1.0, 3.0),),
            slot_eps_forms=(),
            claimed_alpha_exponent=1.0,
            claimed_M_exponent=1.0,
            small_factor="",
            description=(
                "<out>^{2(k+eps)} / (xi2^6 <xi11>^{2k} <xi12>^{2k} <xi13>^{2k} "
                "<xi2>^{2s}) with xi1 = xi11 + xi12 + xi13 in U"
            ),
        ),
        EstimateEntry(
            estimate_id="lem:5",
            phase=PhaseId.PSI_U3,
            leaves=SLOT_LABELS[PhaseId.PSI_U3],
            parents=(("xi2", ("xi21", "xi22")),),
            weight=PowerProduct(
                numerator=(_bf("out", ck=2, ce=2),),
                denominator=(
                    _af("xi2", 4.0),
                    _bf("xi1", ck=2),
                    _bf("xi21", ck=2),
                    _bf("xi22", ck=2),
                ),
            ),
            region=(RegionRef("U", "out", "xi1"),),
            windowed=True,
            fixed_slots=(),
            validity=(_c(-1, 0, 0.5, "k > -1/2"),),
            eps_forms=((1.0, 0.0, 3.0), (2.0, 0.0, 3.0)),
            slot_eps_forms=(),
            claimed_alpha_exponent=1.0,
            claimed_M_exponent=1.0,
            small_factor="",
            description=(
                "<out>^{2(k+eps)} / (xi2^4 <xi1>^{2k} <xi21>^{2k} <xi22>^{2k}) with "
                "xi2 = xi21 + xi22, xi1 in U"
            ),
        ),
        EstimateEntry(
            estimate_id="lem:6",
            phase=PhaseId.PSI_U4,
            leaves=SLOT_LABELS[PhaseId.PSI_U4],
            parents=(("xi2", ("xi21", "xi22")),),
            weight=PowerProduct(
                numerator=(_bf("out", ck=2, ce=2),),
                denominator=(
                    _af("xi2", 4.0),
                    _bf("xi1", ck=2),
                    _bf("xi21", cs=2),
                    _bf("xi22", cs=2),
                ),
            ),
            region=(RegionRef("U", "out", "xi1"),),
            windowed=True,
            fixed_slots=(),
            validity=(_c(1, -1, 3, "k - s < 3"), _c(0, -1, 1, "s >= -1", strict=False)),
            eps_forms=((-1.0, 1.0, 3.0),),
            slot_eps_forms=(),
            claimed_alpha_exponent=1.0,
            claimed_M_exponent=1.0,
            small_factor="",
            description=(
                "<out>^{2(k+eps)} / (xi2^4 <xi1>^{2k} <xi21>^{2s} <xi22>^{2s}) with "
                "xi2 = xi21 + xi22, xi1 in U"
            ),
        ),
        EstimateEntry(
            estimate_id="lem:7",
            phase=PhaseId.PSI_V1,
            leaves=SLOT_LABELS[PhaseId.PSI_V1],
            parents=(("xi1", ("xi11", "xi12")),),
            weight=PowerProduct(
                numerator=(_bf("out", cs=2, ce=2, c0=-4.0),),
                denominator=(_bf("xi11", ck=2), _bf("xi12", cs=2), _bf("xi2", ck=2)),
            ),
            region=(RegionRef("V", "out", "xi1"),),
            windowed=True,
            fixed_slots=(),
            validity=(
                _c(-1, 1, 2.5, "k - s > -5/2"),
                _c(-1, -1, 1.5, "s + k > -3/2"),
                _c(-1, 0, 0, "k >= 0", strict=False),
            ),
            eps_forms=((1.0, -1.0, 2.5), (2.0, 0.0, 2.5), (0.0, 0.0, 4.0)),
            slot_eps_forms=(),
            claimed_alpha_exponent=1.0,
            claimed_M_exponent=1.0,
            small_factor="",
            description=(
                "<out>^{2(s+eps-2)} / (<xi11>^{2k} <xi12>^{2s} <xi2>^{2k}) with "
                "xi1 = xi11 + xi12 in V; surrogate |out| <out>^{s+eps} / |PhiV1| "
                "<~ <out>^{s+eps-2}"
            ),
        ),
        EstimateEntry(
            estimate_id="lem:8",
            phase=PhaseId.PSI_V2,
            leaves=SLOT_LABELS[PhaseId.PSI_V2],
            parents=(("xi1", ("xi11", "xi12", "xi13")),),
            weight=PowerProduct(
                numerator=(_bf("out", cs=2, ce=2, c0=-4.0),),
                denominator=(
                    _bf("xi11", ck=2),
                    _bf("xi12", ck=2),
                    _bf("xi13", ck=2),
                    _bf("xi2", ck=2),
                ),
            ),
            region=(RegionRef("V", "out", "xi1"),),
            windowed=True,
            fixed_slots=(),
            validity=(
                _c(-1, 1, 3, "s - k < 3"),
                _c(-2, 1, 2.5, "s < 2k + 5/2"),
                _c(-4, 1, 0.5, "s < 4k + 1/2"),
                _c(-1, 0, 0, "k >= 0", strict=False),
            ),
            eps_forms=((4.0, -1.0, 0.5), (1.0, -1.0, 3.0), (2.0, -1.0, 2.5)),
            slot_eps_forms=(),
            claimed_alpha_exponent=1.0,
            claimed_M_exponent=1.0,
            small_factor="",
            description=(
                "<out>^{2(s+eps-2)} / (<xi11>^{2k} <xi12>^{2k} <xi13>^{2k} "
                "<xi2>^{2k}) with xi1 = xi11 + xi12 + xi13 in V"
            ),
        ),
        EstimateEntry(
            estimate_id="lem:bdryHs-u",
            phase=PhaseId.PHI_U1,
            leaves=bilinear_u,
            parents=(),
            weight=PowerProduct(
                numerator=(_bf("out", ck=2, ce=2),),
                denominator=(_bf("xi1", ck=2), _bf("xi2", cs=2)),
                kernel=PhiKernel(PhaseId.PHI_U1, "out", ("xi1", "xi2")),
            ),
            region=(RegionRef("U", "out", "xi1"),),
            windowed=False,
            fixed_slots=("out",),
            validity=(_c(1, -1, 3, "k - s < 3"), _c(0, -1, 2.5, "s > -5/2")),
            eps_forms=((-1.0, 1.0, 3.0), (0.0, 1.0, 2.5)),
            slot_eps_forms=(),
            claimed_alpha_exponent=0.0,
            claimed_M_exponent=0.0,
            small_factor="delta_u",
            description=(
                "windowless sup over out of int_U <out>^{2k+2eps} / "
                "(PhiU1^2 <xi1>^{2k} <xi2>^{2s}) dxi1; exact kernel"
            ),
        ),
        EstimateEntry(
            estimate_id="lem:bdryHs-v",
            phase=PhaseId.PHI_V1,
            leaves=bilinear_u,
            parents=(),
            weight=PowerProduct(
                numerator=(_bf("out", cs=2, ce=2, c0=2.0),),
                denominator=(_bf("xi1", ck=2), _bf("xi2", ck=2)),
                kernel=PhiKernel(PhaseId.PHI_V1, "out", ("xi1", "xi2")),
            ),
            region=(RegionRef("V", "out", "xi1"),),
            windowed=False,
            fixed_slots=("out",),
            validity=(_c(-1, 1, 2, "k - s > -2"), _c(-4, 1, 0, "s < 4k")),
            eps_forms=((1.0, -1.0, 2.0), (4.0, -1.0, 0.0)),
            slot_eps_forms=(),
            claimed_alpha_exponent=0.0,
            claimed_M_exponent=0.0,
            small_factor="delta_v",
            description=(
                "windowless sup over out of int_V <out>^{2s+2eps+2} / "
                "(PhiV1^2 <xi1>^{2k} <xi2>^{2k}) dxi1; exact kernel (PhiV1 has "
                "zeros inside V at moderate |out| -- expect guard flags there)"
            ),
        ),
        EstimateEntry(
            estimate_id="lem:smooth_nls",
            phase=PhaseId.NLS_CUBIC,
            leaves=SLOT_LABELS[PhaseId.NLS_CUBIC],
            parents=(),
            weight=PowerProduct(
                numerator=(_bf("out", ck=2, ce=2),),
                denominator=(_bf("xi1", ck=2), _bf("xi2", ck=2), _bf("xi3", ck=2)),
            ),
            region=(),
            windowed=True,
            fixed_slots=(),
            validity=(_c(-1, 0, 0, "k > 0"),),
            eps_forms=((2.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
            slot_eps_forms=(),
            claimed_alpha_exponent=1.0,
            claimed_M_exponent=1.0,
            small_factor="",
            description=(
                "<out>^{2(k+eps)} / (<xi1>^{2k} <xi2>^{2k} <xi3>^{2k}), no region; "
                "cubic self-interaction smoothing, eps < min{2k, 1}"
            ),
        ),
        EstimateEntry(
            estimate_id="lem:est_dxv2-high",
            phase=PhaseId.PHI_V2,
            leaves=SLOT_LABELS[PhaseId.PHI_V2],
            parents=(),
            weight=PowerProduct(
                numerator=(_af("out", 2.0), _bf("out", cs=2, c0=2.0)),
                denominator=(_bf("xi1", cs=2), _bf("xi2", cs=2)),
            ),
            region=(RegionRef("N5_high", "out", "xi1"),),
            windowed=True,
            fixed_slots=("out", "xi1", "xi2"),
            validity=(_c(0, -1, -0.25, "s > 1/4"),),
            eps_forms=(),
            slot_eps_forms=(),
            claimed_alpha_exponent=1.0,
            claimed_M_exponent=1.0,
            small_factor="",
            description=(
                "out^2 <out>^{2s+2} / (<xi1>^{2s} <xi2>^{2s}) on the comparable-"
                "frequency part of the quadratic self-interaction; fixed gain +1"
            ),
        ),
        EstimateEntry(
            estimate_id="lem:N0B",
            phase=PhaseId.PSI_U1,
            leaves=SLOT_LABELS[PhaseId.PSI_U1],
            parents=(("xi1", ("xi11", "xi12")),),
            weight=PowerProduct(
                numerator=(_bf("out", ck=2),),
                denominator=(
                    _bf("xi11", ck=2, c0=-2.0),
                    _bf("xi12", cs=2),
                    _bf("xi2", cs=2),
                ),
                kernel=PhiKernel(PhaseId.PHI_U1, "xi1", ("xi11", "xi12")),
            ),
            region=(
                RegionRef("U", "xi1", "xi11"),
                RegionRef("U_complement", "out", "xi1"),
            ),
            windowed=True,
            fixed_slots=(),
            validity=A_CONSTRAINTS + (_c(-1, 0, -1, "k >= 1", strict=False),),
            eps_forms=(),
            slot_eps_forms=(),
            claimed_alpha_exponent=1.0,
            claimed_M_exponent=1.0,
            small_factor="",
            description=(
                "<out>^{2k} / (PhiU1(xi1; xi11, xi12)^2 <xi11>^{2(k-1)} "
                "<xi12>^{2s} <xi2>^{2s}) with xi11 in U_{xi1} and xi1 not in "
                "U_out; exact inner kernel, one derivative traded to slot 11"
            ),
        ),
    )


CATALOG = MappingProxyType({entry.estimate_id: entry for entry in _entries()})


def catalog_lookup(estimate_id: str) -> EstimateEntry:
    """Immutable catalog entry for `estimate_id`; KeyError on unknown ids."""
    try:
        return CATALOG[estimate_id]
    except KeyError:
        known = ", ".join(sorted(CATALOG))
        raise KeyError(f"unknown estimate id {estimate_id!r}; known ids: {known}") from None


def estimate_ids() -> tuple[str, ...]:
    return tuple(CATALOG)


def _power_json(factor: PowerFactor) -> dict:
    return {
        "symbol": factor.symbol,
        "power_k_s_eps_const": list(factor.power),
        "bracket": factor.use_bracket,
    }


def catalog_json() -> str:
    """JSON documentation dump of every catalog entry."""
    entries = []
    for entry in CATALOG.values():
        record = {
            "id": entry.estimate_id,
            "phase": entry.phase.value,
            "leaves": list(entry.leaves),
            "parents": {label: list(members) for label, members in entry.parents},
            "weight": {
                "numerator": [_power_json(f) for f in entry.weight.numerator],
                "denominator": [_power_json(f) for f in entry.weight.denominator],
                "kernel": (
                    None
                    if entry.weight.kernel is None
                    else {
                        "phase": entry.weight.kernel.phase.value,
                        "out": entry.weight.kernel.out_symbol,
                        "inputs": list(entry.weight.kernel.in_symbols),
                        "power": entry.weight.kernel.power,
                    }
                ),
            },
            "region": [
                {"name": r.name, "out": r.out_symbol, "in": r.in_symbol}
                for r in entry.region
            ],
            "windowed": entry.windowed,
            "fixed_slots": list(entry.fixed_slots),
            "validity": [c.label for c in entry.validity],
            "eps_sup_forms": [list(f) for f in entry.eps_forms],
            "slot_eps_forms": {slot: list(f) for slot, f in entry.slot_eps_forms},
            "claimed_bound": {
                "alpha_exponent": entry.claimed_alpha_exponent,
                "M_exponent": entry.claimed_M_exponent,
                "small_factor": entry.small_factor,
            },
            "description": entry.description,
        }
        entries.append(record)
    return json.dumps(entries, indent=2)


# Guard against drift: the catalog is data, so sanity-check shape at import.
assert len(CATALOG) == 15, "catalog must hold exactly 15 estimates"
for _entry in CATALOG.values():
    assert len(_entry.leaves) == len(SLOT_LABELS[_entry.phase])
    for _label, _members in _entry.parents:
        assert set(_members) <= set(_entry.leaves)
    if math.isinf(_entry.claimed_alpha_exponent):
        raise AssertionError("claimed exponents must be finite")
del _entry
