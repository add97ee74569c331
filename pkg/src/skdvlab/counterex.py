"""Growth harnesses that witness the failure of the borderline estimates.

Two kinds of witnesses are computed, all by direct frequency quadrature:

* dual-pairing integrals (families ``cor41`` and ``cor42``): unit-box test
  spectra are placed at separation ``N`` and the weighted pairing is
  integrated exactly over the constraint set ``xi = xi1 + xi2``,
  ``tau = tau1 + tau2``; its fitted N-slope reproduces the exponent that a
  bounded two-parameter estimate would force to be nonpositive;

* second-Picard-iterate norms (families ``sec6_region1`` and
  ``sec6_region2``): explicit data concentrated at frequency ``N`` are run
  through one Duhamel iteration of the coupling terms at time
  ``t = c N^-3``, where the phase is nonzero on the whole support and the
  time integral has the closed form ``(e^{it Phi} - 1)/(i Phi)``.

Quadrature is Gauss-Legendre per panel.  Panels follow the geometry of the
integrand: unit boxes get a fixed split, while directions along which a
modulation bracket sweeps through zero at rate ~N are graded dyadically so
every panel sees an O(1) change of the bracket argument.  All values are
nonnegative reals; fits are ordinary least squares in log2-log2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .grid import Regularity, bracket
from .phases import PhaseId, phase_value
from .smoothing import _time_kernel

__all__ = [
    "FAMILIES",
    "GROWTH_CSV_HEADER",
    "GrowthExperiment",
    "GrowthSweep",
    "SlopeFit",
    "cor41_modulation_sample",
    "cor41_value",
    "cor42_value",
    "fit_growth",
    "growth_csv_rows",
    "growth_fit_json",
    "local_slopes",
    "predicted_exponent",
    "rho_window",
    "run_growth_experiment",
    "sec6_u_iterate",
    "sec6_v_iterate",
    "sec6_v_kdv_contribution",
]

FAMILIES = ("cor41", "cor42", "sec6_region1", "sec6_region2")

_MIN_N = {"cor41": 4, "cor42": 4, "sec6_region1": 8, "sec6_region2": 16}

GROWTH_CSV_HEADER = "family,N,k,s,b,bprime,rho,c,value"

_GL_BASE = 8

_UNIT_BOX = ((0.0, 1.0), (0.0, 1.0))


def rho_window(regularity: Regularity) -> tuple[float, float]:
    """Admissible decay-exponent window for the sec6_region2 data."""
    return (regularity.k + 0.5, regularity.s - 1.5)


@dataclass(frozen=True)
class GrowthExperiment:
    """One growth sweep: a witness family evaluated over dyadic N.

    ``c_time`` is the constant in the evaluation time t = c N^-3 of the
    iterate families (the pairing families are time-integrated already and
    ignore it).  ``rho`` is the data decay exponent of sec6_region2 and must
    lie strictly inside ``rho_window(regularity)``.
    """

    family: str
    N_values: tuple[int, ...]
    regularity: Regularity
    c_time: float = 0.1
    rho: float | None = None
    b: float = 0.51
    bprime: float = -0.49

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(
                f"unknown family {self.family!r}; expected one of {FAMILIES}"
            )
        object.__setattr__(self, "N_values", tuple(int(n) for n in self.N_values))
        if not self.N_values:
            raise ValueError("N_values must not be empty")
        n_min = _MIN_N[self.family]
        for n in self.N_values:
            if n < n_min or n & (n - 1):
                raise ValueError(
                    f"N_values must be powers of two >= {n_min} for"
                    f" {self.family}; got {n}"
                )
        if any(b >= a for a, b in zip(self.N_values[1:], self.N_values)):
            raise ValueError("N_values must be strictly increasing")
        if not 0.0 < self.c_time < 1.0:
            raise ValueError(f"c_time must lie in (0, 1); got {self.c_time}")
        if self.family == "sec6_region2":
            lo, hi = rho_window(self.regularity)
            if self.rho is None or not lo < self.rho < hi:
                raise ValueError(
                    f"sec6_region2 needs rho strictly inside ({lo}, {hi});"
                    f" got {self.rho}"
                )
        elif self.rho is not None:
            raise ValueError("rho is only meaningful for family sec6_region2")

    def rho_window_width(self) -> float | None:
        """Width of the admissible rho window (None when not applicable).

        A width near zero warns that the family's fit is run at a nearly
        degenerate parameter choice.
        """
        if self.family != "sec6_region2":
            return None
        lo, hi = rho_window(self.regularity)
        return hi - lo


def predicted_exponent(experiment: GrowthExperiment) -> float:
    """The N-slope the harness is expected to reproduce."""
    k, s = experiment.regularity.k, experiment.regularity.s
    b, bp = experiment.b, experiment.bprime
    if experiment.family == "cor41":
        return bp - 3.0 * b + k - s
    if experiment.family == "cor42":
        return 1.0 + s - k + 3.0 * bp - b
    if experiment.family == "sec6_region1":
        return k - 3.0
    return s - 2.0 - float(experiment.rho) + 0.5


# ---------------------------------------------------------------------------
# quadrature building blocks


def _gauss_panels(edges: np.ndarray, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Concatenated Gauss-Legendre rules over consecutive panels.

    Zero-width panels are legal and contribute zero weight, which lets
    callers pad per-row ladders to a common shape.
    """
    g, gw = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.asarray(edges, dtype=float)
    half = 0.5 * np.diff(edges, axis=-1)
    mid = edges[..., :-1] + half
    nodes = mid[..., :, None] + half[..., :, None] * g
    weights = half[..., :, None] * gw
    return nodes.reshape(*edges.shape[:-1], -1), weights.reshape(
        *edges.shape[:-1], -1
    )


def _dyadic_unit_edges(depth: int) -> np.ndarray:
    """Panel edges on [0, 1] graded dyadically toward 0."""
    return np.concatenate(([0.0], 2.0 ** np.arange(-float(depth), 0.0), [1.0]))


def _graded_depth(N: int, quad_scale: int) -> int:
    # the steep direction sweeps the bracket argument at rate ~2N, so the
    # finest panel must sit below the 1/(2N) scale of its zero set
    return int(math.ceil(math.log2(2.0 * N))) + 1 + quad_scale


def _clipped_range(
    lo: np.ndarray | float, hi: np.ndarray | float, box: tuple[float, float]
) -> tuple[np.ndarray, np.ndarray]:
    lo = np.maximum(lo, box[0])
    hi = np.minimum(hi, box[1])
    return lo, np.maximum(hi - lo, 0.0)


def cor41_value(
    N: int,
    regularity: Regularity,
    *,
    b: float = 0.51,
    bprime: float = -0.49,
    quad_scale: int = 1,
    h1_support: tuple[tuple[float, float], tuple[float, float]] = _UNIT_BOX,
) -> float:
    """Dual pairing of the u-equation coupling estimate at separation N.

    The test spectra occupy ``h1_support`` (input 1), the box
    [N, N+1] x [N^2, N^2+1] (input 2, the same box for the output), and the
    pairing is integrated over the convolution constraint set with weight

        <xi>^k <tau - xi^2>^b' / (<xi1>^k <tau1 - xi1^2>^b
                                  <xi2>^s <tau2 + xi2^3>^b).

    Returns 0 when the constraint set is empty.
    """
    if N < _MIN_N["cor41"]:
        raise ValueError(f"N must be at least {_MIN_N['cor41']}; got {N}")
    k, s = regularity.k, regularity.s
    n = _GL_BASE * quad_scale
    # xi = N + u, tau = N^2 + w with (u, w) in the unit square; the inner
    # pair is then confined to xi1 in [u-1, u], tau1 in [w-1, w]
    u_nodes, u_w = _gauss_panels(_dyadic_unit_edges(_graded_depth(N, quad_scale)), n)
    w_nodes, w_w = _gauss_panels(np.array([0.0, 0.5, 1.0]), n)
    a_nodes, a_w = _gauss_panels(np.array([0.0, 0.5, 1.0]), n)
    c_nodes, c_w = _gauss_panels(np.array([0.0, 0.5, 1.0]), n)

    x1_lo, x1_width = _clipped_range(u_nodes - 1.0, u_nodes, h1_support[0])
    t1_lo, t1_width = _clipped_range(w_nodes - 1.0, w_nodes, h1_support[1])
    if not (np.any(x1_width > 0.0) and np.any(t1_width > 0.0)):
        return 0.0

    xi1 = x1_lo[:, None] + x1_width[:, None] * a_nodes  # (U, A)
    xi2 = (N + u_nodes)[:, None] - xi1
    tau1 = t1_lo[:, None] + t1_width[:, None] * c_nodes  # (W, C)
    tau2 = (N * N + w_nodes)[:, None] - tau1

    out_weight = bracket(N + u_nodes) ** k  # (U,)
    out_mod = bracket(w_nodes[None, :] - 2.0 * N * u_nodes[:, None] - u_nodes[:, None] ** 2) ** bprime
    in1_weight = bracket(xi1) ** (-k)  # (U, A)
    in2_weight = bracket(xi2) ** (-s)

    total = 0.0
    block = max(1, 2_000_000 // (w_nodes.size * a_nodes.size * c_nodes.size))
    for i in range(0, u_nodes.size, block):
        rows = slice(i, min(i + block, u_nodes.size))
        mod1 = bracket(tau1[None, :, None, :] - xi1[rows, None, :, None] ** 2) ** (-b)
        mod2 = bracket(tau2[None, :, None, :] + xi2[rows, None, :, None] ** 3) ** (-b)
        f = (
            (out_weight[rows, None] * out_mod[rows] * x1_width[rows, None])[
                :, :, None, None
            ]
            * (in1_weight[rows] * in2_weight[rows])[:, None, :, None]
            * mod1
            * mod2
        )
        wgt = (
            (u_w[rows, None] * (w_w * t1_width))[:, :, None, None]
            * a_w[None, None, :, None]
            * c_w[None, None, None, :]
        )
        total += float(np.sum(f * wgt))
    return total


def cor42_value(
    N: int,
    regularity: Regularity,
    *,
    b: float = 0.51,
    bprime: float = -0.49,
    quad_scale: int = 1,
    h1_support: tuple[tuple[float, float], tuple[float, float]] = _UNIT_BOX,
) -> float:
    """Dual pairing of the v-equation source estimate at separation N.

    Same supports as :func:`cor41_value`, weight

        xi <xi>^s <tau + xi^3>^b' / (<xi1>^k <tau1 - xi1^2>^b
                                     <xi2>^k <tau2 - xi2^2>^b).

    The second input's modulation sweeps through zero along the diagonal
    xi2 = xi - xi1, so the integration runs in the shifted coordinate
    r = xi2 - N, graded dyadically toward r = 0.
    """
    if N < _MIN_N["cor42"]:
        raise ValueError(f"N must be at least {_MIN_N['cor42']}; got {N}")
    k, s = regularity.k, regularity.s
    n = _GL_BASE * quad_scale
    r_nodes, r_w = _gauss_panels(_dyadic_unit_edges(_graded_depth(N, quad_scale)), n)
    w_nodes, w_w = _gauss_panels(np.array([0.0, 0.5, 1.0]), n)
    a_nodes, a_w = _gauss_panels(np.array([0.0, 0.5, 1.0]), n)
    c_nodes, c_w = _gauss_panels(np.array([0.0, 0.5, 1.0]), n)

    # xi1 ranges over [0, 1 - r] (shear u = r + xi1 has unit Jacobian)
    x1_lo, x1_width = _clipped_range(
        np.zeros_like(r_nodes), 1.0 - r_nodes, h1_support[0]
    )
    t1_lo, t1_width = _clipped_range(w_nodes - 1.0, w_nodes, h1_support[1])
    if not (np.any(x1_width > 0.0) and np.any(t1_width > 0.0)):
        return 0.0

    xi1 = x1_lo[:, None] + x1_width[:, None] * a_nodes  # (R, A)
    xi = N + r_nodes[:, None] + xi1
    xi2 = N + r_nodes
    tau1 = t1_lo[:, None] + t1_width[:, None] * c_nodes  # (W, C)
    tau = N * N + w_nodes

    num_weight = xi * bracket(xi) ** s  # (R, A)
    in1_weight = bracket(xi1) ** (-k)
    in2_weight = bracket(xi2) ** (-k)  # (R,)
    # tau2 - xi2^2 = (w - tau1) - 2 N r - r^2, assembled without the N^2
    # cancellation
    diag = (w_nodes[:, None] - tau1)[None, :, :] - (
        2.0 * N * r_nodes + r_nodes**2
    )[:, None, None]
    in2_mod = bracket(diag) ** (-b)  # (R, W, C)

    total = 0.0
    block = max(1, 2_000_000 // (w_nodes.size * a_nodes.size * c_nodes.size))
    for i in range(0, r_nodes.size, block):
        rows = slice(i, min(i + block, r_nodes.size))
        out_mod = bracket(tau[None, :, None, None] + xi[rows, None, :, None] ** 3) ** bprime
        mod1 = bracket(tau1[None, :, None, :] - xi1[rows, None, :, None] ** 2) ** (-b)
        f = (
            (num_weight[rows] * in1_weight[rows] * x1_width[rows, None])[
                :, None, :, None
            ]
            * in2_weight[rows, None, None, None]
            * in2_mod[rows, :, None, :]
            * out_mod
            * mod1
        )
        wgt = (
            (r_w[rows, None] * (w_w * t1_width))[:, :, None, None]
            * a_w[None, None, :, None]
            * c_w[None, None, None, :]
        )
        total += float(np.sum(f * wgt))
    return total


def cor41_modulation_sample(N: int) -> dict[str, float]:
    """Modulation magnitudes at the centers of the pairing supports.

    Documents the scale separation the construction relies on: O(1) on the
    low box, O(N^3) on the high Airy bracket, O(N) on the output bracket.
    """
    xi1, tau1 = 0.5, 0.5
    xi, tau = N + 0.5, N * N + 0.5
    xi2, tau2 = xi - xi1, tau - tau1
    return {
        "input_low": abs(tau1 - xi1**2),
        "input_high": abs(tau2 + xi2**3),
        "output": abs(tau - xi**2),
    }


# ---------------------------------------------------------------------------
# second-iterate harnesses


def sec6_u_iterate(
    N: int, regularity: Regularity, c_time: float = 0.1, *, quad_scale: int = 1
) -> float:
    """H^k norm of the second iterate of the u-equation coupling term.

    Data: flat unit u-spectrum on [-1, 1] against flat v-spectrum on
    [N-1, N+1], evaluated at t = c_time * N^-3, where the interaction phase
    is ~N^3 and never vanishes, so the time kernel is uniformly of size
    ~N^-3 on the output band [N-2, N+2].
    """
    if N < _MIN_N["sec6_region1"]:
        raise ValueError(f"N must be at least {_MIN_N['sec6_region1']}; got {N}")
    if c_time < 0.0:
        raise ValueError(f"c_time must be nonnegative; got {c_time}")
    k = regularity.k
    t = c_time / float(N) ** 3
    n = _GL_BASE * quad_scale
    a_nodes, a_w = _gauss_panels(np.array([0.0, 0.5, 1.0]), n)
    norm2 = 0.0
    # the admissible xi1-range has a kink at xi = N, so the output integral
    # is paneled separately on either side
    for lo, hi in ((N - 2.0, float(N)), (float(N), N + 2.0)):
        xi_nodes, xi_w = _gauss_panels(np.linspace(lo, hi, 4 * quad_scale + 1), n)
        x1_lo = np.maximum(-1.0, xi_nodes - N - 1.0)
        x1_width = np.maximum(np.minimum(1.0, xi_nodes - N + 1.0) - x1_lo, 0.0)
        xi1 = x1_lo[:, None] + x1_width[:, None] * a_nodes
        xi2 = xi_nodes[:, None] - xi1
        phi = phase_value(PhaseId.PHI_U1, xi_nodes[:, None], (xi1, xi2))
        inner = np.einsum("xa,a->x", _time_kernel(phi, t), a_w) * x1_width
        norm2 += float(
            np.sum(xi_w * bracket(xi_nodes) ** (2.0 * k) * np.abs(inner) ** 2)
        ) / (2.0 * np.pi) ** 2
    return math.sqrt(norm2)


def sec6_v_iterate(
    N: int,
    regularity: Regularity,
    rho: float,
    c_time: float = 0.1,
    *,
    quad_scale: int = 1,
) -> float:
    """Weighted L2 norm over [N/2, N] of the second iterate of the v-source.

    Data: u-spectrum <xi>^-rho on [0, N]; the conjugate-pair source then
    feeds the band [N/2, N] only through input pairs xi1 in [xi, N], with
    phase xi^3 - xi1^2 + xi2^2 >= N^3/8 - N^2 > 0.  The output carries the
    derivative factor xi and the weight <xi>^s.
    """
    if N < _MIN_N["sec6_region2"]:
        raise ValueError(f"N must be at least {_MIN_N['sec6_region2']}; got {N}")
    if c_time < 0.0:
        raise ValueError(f"c_time must be nonnegative; got {c_time}")
    lo, hi = rho_window(regularity)
    if not lo < rho < hi:
        raise ValueError(f"rho must lie strictly inside ({lo}, {hi}); got {rho}")
    s = regularity.s
    t = c_time / float(N) ** 3
    n = _GL_BASE * quad_scale
    xi_nodes, xi_w = _gauss_panels(
        np.linspace(0.5 * N, float(N), 8 * quad_scale + 1), n
    )
    # inner variable x = xi1 - xi in [0, N - xi]: the data factor <x>^-rho
    # peaks at unit scale, so the ladder is dyadic away from 0
    ladder = np.concatenate(
        ([0.0], 2.0 ** np.arange(0.0, math.ceil(math.log2(N)) + 1.0))
    )
    edges = np.minimum(ladder[None, :], (N - xi_nodes)[:, None])
    x_nodes, x_w = _gauss_panels(edges, n)
    xi1 = xi_nodes[:, None] + x_nodes
    phi = xi_nodes[:, None] ** 3 - xi1**2 + x_nodes**2
    amp = bracket(xi1) ** (-rho) * bracket(x_nodes) ** (-rho)
    inner = np.einsum("xa,xa->x", _time_kernel(phi, t), amp * x_w)
    j_out = xi_nodes * np.abs(inner) / (2.0 * np.pi)
    norm2 = float(np.sum(xi_w * bracket(xi_nodes) ** (2.0 * s) * j_out**2))
    return math.sqrt(norm2)


def sec6_v_kdv_contribution(
    N: int, regularity: Regularity, c_time: float = 0.1
) -> float:
    """Second-iterate contribution of the v self-interaction beyond |xi| = 2.

    The harness's v-data has spectrum in [-1, 1], so its quadratic source
    occupies [-2, 2] and the region |xi| > 2 receives nothing.  The value is
    the length of the overlap of the two sets -- computed, not assumed -- and
    bounds the contribution's norm; it is exactly zero.
    """
    if N < _MIN_N["sec6_region2"]:
        raise ValueError(f"N must be at least {_MIN_N['sec6_region2']}; got {N}")
    data_lo, data_hi = -1.0, 1.0
    source_lo, source_hi = data_lo + data_lo, data_hi + data_hi
    right = max(0.0, source_hi - 2.0)
    left = max(0.0, -2.0 - source_lo)
    return right + left


# ---------------------------------------------------------------------------
# sweeps, fits and reports


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares N-slope of a growth sweep on log2-log2 axes."""

    slope: float
    intercept: float
    r_squared: float
    stderr: float
    ci95_half_width: float
    n_points: int


def fit_growth(N_values: Sequence[int], values: Sequence[float]) -> SlopeFit:
    """Fit log2(value) against log2(N) by ordinary least squares."""
    N_arr = np.asarray(N_values, dtype=float)
    v_arr = np.asarray(values, dtype=float)
    if N_arr.size != v_arr.size or N_arr.size < 2:
        raise ValueError("need at least two (N, value) pairs to fit a slope")
    if np.any(v_arr <= 0.0):
        raise ValueError("nonpositive values cannot be fitted on a log scale")
    x = np.log2(N_arr)
    y = np.log2(v_arr)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    rss = float(np.sum(resid**2))
    r2 = 1.0 - rss / total if total > 0.0 else 1.0
    if x.size > 2:
        se = math.sqrt(rss / (x.size - 2) / float(np.sum((x - x.mean()) ** 2)))
        ci = float(stats.t.ppf(0.975, x.size - 2)) * se
    else:
        se = float("nan")
        ci = float("nan")
    return SlopeFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(np.clip(r2, 0.0, 1.0)),
        stderr=se,
        ci95_half_width=ci,
        n_points=int(x.size),
    )


def local_slopes(N_values: Sequence[int], values: Sequence[float]) -> tuple[float, ...]:
    """Slope between consecutive sweep points (stabilization diagnostic)."""
    N_arr = np.asarray(N_values, dtype=float)
    v_arr = np.asarray(values, dtype=float)
    return tuple(
        float(np.log2(v_arr[i + 1] / v_arr[i]) / np.log2(N_arr[i + 1] / N_arr[i]))
        for i in range(N_arr.size - 1)
    )


def _family_value(
    experiment: GrowthExperiment, N: int, quad_scale: int
) -> float:
    if experiment.family == "cor41":
        return cor41_value(
            N,
            experiment.regularity,
            b=experiment.b,
            bprime=experiment.bprime,
            quad_scale=quad_scale,
        )
    if experiment.family == "cor42":
        return cor42_value(
            N,
            experiment.regularity,
            b=experiment.b,
            bprime=experiment.bprime,
            quad_scale=quad_scale,
        )
    if experiment.family == "sec6_region1":
        return sec6_u_iterate(
            N, experiment.regularity, experiment.c_time, quad_scale=quad_scale
        )
    return sec6_v_iterate(
        N,
        experiment.regularity,
        float(experiment.rho),
        experiment.c_time,
        quad_scale=quad_scale,
    )


@dataclass(frozen=True)
class GrowthSweep:
    """Values, fit, and predicted exponent of one growth experiment."""

    experiment: GrowthExperiment
    values: tuple[float, ...]
    fit: SlopeFit
    predicted: float


def run_growth_experiment(
    experiment: GrowthExperiment, *, quad_scale: int = 1
) -> GrowthSweep:
    """Evaluate the family over its N sweep and fit the growth exponent."""
    values = tuple(
        _family_value(experiment, N, quad_scale) for N in experiment.N_values
    )
    return GrowthSweep(
        experiment=experiment,
        values=values,
        fit=fit_growth(experiment.N_values, values),
        predicted=predicted_exponent(experiment),
    )


def _fmt(x: float) -> str:
    return "%.17g" % x


def growth_csv_rows(
    experiment: GrowthExperiment, values: Sequence[float]
) -> list[str]:
    """Sweep rows in the order of N_values (header: GROWTH_CSV_HEADER)."""
    if len(values) != len(experiment.N_values):
        raise ValueError("one value per N is required")
    rho_txt = "" if experiment.rho is None else _fmt(experiment.rho)
    c_txt = (
        _fmt(experiment.c_time)
        if experiment.family in ("sec6_region1", "sec6_region2")
        else ""
    )
    k, s = experiment.regularity.k, experiment.regularity.s
    return [
        ",".join(
            (
                experiment.family,
                str(N),
                _fmt(k),
                _fmt(s),
                _fmt(experiment.b),
                _fmt(experiment.bprime),
                rho_txt,
                c_txt,
                _fmt(v),
            )
        )
        for N, v in zip(experiment.N_values, values)
    ]


def growth_fit_json(sweep: GrowthSweep) -> str:
    """Deterministic JSON fit report for one growth sweep."""
    exp = sweep.experiment
    payload: dict[str, object] = {
        "family": exp.family,
        "k": exp.regularity.k,
        "s": exp.regularity.s,
        "b": exp.b,
        "bprime": exp.bprime,
        "c_time": exp.c_time,
        "N_values": list(exp.N_values),
        "values": list(sweep.values),
        "slope": sweep.fit.slope,
        "stderr": sweep.fit.stderr,
        "ci95_half_width": sweep.fit.ci95_half_width,
        "r_squared": sweep.fit.r_squared,
        "predicted_exponent": sweep.predicted,
        "local_slopes": list(local_slopes(exp.N_values, sweep.values)),
    }
    if exp.family == "sec6_region2":
        lo, hi = rho_window(exp.regularity)
        payload["rho"] = exp.rho
        payload["rho_window"] = [lo, hi]
        payload["rho_window_width"] = hi - lo
    return json.dumps(payload, sort_keys=True)
