"""Classical and normal-form evolution of the coupled Schrodinger-KdV system

    i u_t + u_xx = alpha*u*v + beta*|u|^2 u,
    v_t + v_xxx + (v^2/2)_x = gamma*(|u|^2)_x,

integrated pseudospectrally in *profile* variables

    pu(t, xi) = exp(+i t xi^2) * Fu(t, xi),
    pv(t, xi) = exp(-i t xi^3) * Fv(t, xi),

so the stiff linear phases are handled exactly (integrating-factor RK4) and
only the nonlinear interactions are stepped.  In profile variables

    d/dt pu = -i alpha e^{i t xi^2} F(u v) - i beta e^{i t xi^2} F(|u|^2 u),
    d/dt pv = +i gamma xi e^{-i t xi^3} F(|u|^2) - (i/2) xi e^{-i t xi^3} F(v^2).

The normal-form ("integrated by parts") formulations trade the low-frequency
part of one quadratic interaction for a boundary bilinear operator B plus
higher-order corrections N_0..N_5, with the frequency truncations U/V of
:mod:`skdvlab.phases`:

    mode ibp_u: evolve w := pu + i alpha B_u(t)[pu, pv], where
        dw/dt = -i alpha (N0_u + N1_u + ... + N4_u) - i beta N5_u,
    and pu is recovered from w by a fixed-point solve (B_u is a contraction
    on the truncated region: |1/Phi| <~ delta_u^3 there);

    mode ibp_v: evolve z := pv - i gamma B_v(t)[pu, pu], where
        dz/dt = +i gamma (N0_v + ... + N4_v) - (i/2) N5_v,
    and pv = z + i gamma B_v(t)[pu, pu] is explicit.

Both reduce algebraically to the classical equations, so all three modes must
agree to integration accuracy; that agreement (including independence of the
delta_u/delta_v truncation thresholds) is a primary correctness check.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from skdvlab.grid import (
    Grid,
    Regularity,
    SpectralField,
    bourgain_norm,
    dealias,
    hermitian_symmetrize,
    reality_defect,
    sobolev_norm,
    to_physical,
    to_spectral,
)
from skdvlab.phases import (
    DEFAULT_GUARD,
    GuardCounter,
    PhaseId,
    RegionParams,
    in_region,
    phase_value,
)

BLOWUP_FACTOR = 1e8  # abort when a profile l2 norm exceeds this multiple of t=0
FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 64

MODES = ("classical", "ibp_u", "ibp_v")


class BlowUpError(RuntimeError):
    """Raised when the solution norm exceeds BLOWUP_FACTOR times its t=0 value."""

    def __init__(self, t: float, factor: float):
        super().__init__(f"solution norm grew by factor {factor:.3e} at t={t:.6g}; aborting")
        self.t = t
        self.factor = factor


@dataclass(frozen=True)
class CouplingParams:
    """Coupling constants of the system.

    alpha and gamma must be nonzero (the coupled regime) unless
    allow_decoupled is set, which tags oracle runs that exercise one
    equation at a time.  beta = 0 is always allowed.
    """

    alpha: float
    beta: float
    gamma: float
    allow_decoupled: bool = False

    def __post_init__(self) -> None:
        if not self.allow_decoupled and (self.alpha == 0.0 or self.gamma == 0.0):
            raise ValueError(
                "alpha and gamma must be nonzero; pass allow_decoupled=True "
                "for deliberately decoupled oracle runs"
            )


@dataclass(frozen=True)
class EvolveConfig:
    """Time-integration parameters.

    dt, t_end: step and final time (dt must divide t_end to 1e-9 relative).
    mode: "classical", "ibp_u", or "ibp_v".  The normal-form modes pair
        naturally with the regimes 2 <= k-s < 3 (ibp_u) and -2 < k-s <= -1
        (ibp_v); the pairing is advisory, not enforced.
    region_params: U/V truncation thresholds for the normal-form modes.
    dealias_rule: "auto" resolves to "cubic" when beta != 0 else "quadratic".
    record_stride: store every record_stride-th step (plus t=0).
    """

    dt: float
    t_end: float
    mode: str = "classical"
    region_params: RegionParams = field(default_factory=RegionParams)
    dealias_rule: str = "auto"
    record_stride: int = 1
    guard: float = DEFAULT_GUARD

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.dealias_rule not in ("auto", "quadratic", "cubic"):
            raise ValueError(f"unknown dealias_rule {self.dealias_rule!r}")
        if not (isinstance(self.record_stride, int) and self.record_stride >= 1):
            raise ValueError(f"record_stride must be a positive integer, got {self.record_stride}")
        n_steps = self.t_end / self.dt
        if abs(n_steps - round(n_steps)) > 1e-9 * max(1.0, n_steps):
            raise ValueError(
                f"t_end={self.t_end} is not an integer multiple of dt={self.dt}"
            )

    def resolved_rule(self, coupling: CouplingParams) -> str:
        if self.dealias_rule != "auto":
            return self.dealias_rule
        return "cubic" if coupling.beta != 0.0 else "quadratic"


def stability_dt_bound(u0: SpectralField, v0: SpectralField, coupling: CouplingParams,
                       rule: str = "quadratic") -> float:
    """Declared RK4 stability bound for the nonlinear (non-stiff) terms.

    The linear dispersion is integrated exactly, so the restriction comes
    from the advective KdV term (speed ~ max|v|) over the retained band and
    from the u-equation potential rotation rate |alpha| max|v| + |beta| max|u|^2.
    """
    grid = u0.grid
    umax = float(np.max(np.abs(to_physical(u0)))) if u0.grid.n_points else 0.0
    vmax = float(np.max(np.abs(to_physical(v0).real)))
    keep = grid.n_points // (3 if rule == "quadratic" else 4)
    xi_band = grid.dxi * keep
    tiny = 1e-30
    return min(
        1.0,
        2.8 / (xi_band * vmax + tiny),
        2.8 / (abs(coupling.alpha) * vmax + abs(coupling.beta) * umax**2 + tiny),
    )


# ---------------------------------------------------------------------------
# Conserved functionals
# ---------------------------------------------------------------------------


def mass(u: SpectralField) -> float:
    """L2 mass of the Schrodinger component, integral |u|^2 dx."""
    return float(np.sum(np.abs(u.coeffs) ** 2) * u.grid.dxi / (2.0 * np.pi))


def momentum(u: SpectralField, v: SpectralField, coupling: CouplingParams) -> float:
    """2*gamma*Im integral conj(u) u_x dx  -  alpha * integral v^2 dx.

    The gamma/alpha weighting makes the functional conserved by the coupled
    flow without dividing by either constant (so decoupled limits stay finite).
    """
    xi = u.grid.frequencies()
    measure = u.grid.dxi / (2.0 * np.pi)
    im_u_ux = float(np.sum(xi * np.abs(u.coeffs) ** 2) * measure)
    v_l2 = float(np.sum(np.abs(v.coeffs) ** 2) * measure)
    return 2.0 * coupling.gamma * im_u_ux - coupling.alpha * v_l2


def energy(u: SpectralField, v: SpectralField, coupling: CouplingParams) -> float:
    """Conserved energy of the coupled flow.

    E = int |u_x|^2 + alpha*v*|u|^2 + (beta/2)|u|^4
          + alpha/(2 gamma) v_x^2 - alpha/(6 gamma) v^3  dx.

    When gamma = 0 (decoupled oracle runs) the alpha/gamma weighting is
    replaced by the plain KdV energy 1/2 v_x^2 - 1/6 v^3 plus the NLS part;
    that fallback is exactly conserved only when the cross terms vanish.
    """
    grid = u.grid
    xi = grid.frequencies()
    measure = grid.dxi / (2.0 * np.pi)
    grad_u = float(np.sum(xi**2 * np.abs(u.coeffs) ** 2) * measure)
    grad_v = float(np.sum(xi**2 * np.abs(v.coeffs) ** 2) * measure)
    uphys = to_physical(u)
    vphys = to_physical(v).real
    int_v_u2 = float(np.sum(vphys * np.abs(uphys) ** 2) * grid.dx)
    int_u4 = float(np.sum(np.abs(uphys) ** 4) * grid.dx)
    int_v3 = float(np.sum(vphys**3) * grid.dx)
    a, b, g = coupling.alpha, coupling.beta, coupling.gamma
    if g != 0.0:
        return (
            grad_u
            + a * int_v_u2
            + 0.5 * b * int_u4
            + a / (2.0 * g) * grad_v
            - a / (6.0 * g) * int_v3
        )
    return grad_u + 0.5 * b * int_u4 + 0.5 * grad_v - int_v3 / 6.0


# ---------------------------------------------------------------------------
# The coupled system: shared spectral kernels for all three formulations
# ---------------------------------------------------------------------------


def _star(arr: np.ndarray) -> np.ndarray:
    """X*(xi) := conj(X(-xi)) on the monotone lattice.

    The unpaired Nyquist mode is self-paired under aliasing; it is zero in
    practice because every stored field is dealiased.
    """
    out = np.empty_like(arr)
    out[1:] = np.conj(arr[1:][::-1])
    out[0] = np.conj(arr[0])
    return out


class System:
    """Precomputed kernels and right-hand sides for one (grid, coupling) pair.

    The masked-convolution matrices for the normal-form operators are built
    lazily (classical runs never pay the O(n^2) memory).
    """

    def __init__(
        self,
        grid: Grid,
        coupling: CouplingParams,
        region_params: RegionParams | None = None,
        dealias_rule: str = "quadratic",
        guard: float = DEFAULT_GUARD,
    ):
        self.grid = grid
        self.coupling = coupling
        self.region_params = region_params if region_params is not None else RegionParams()
        self.dealias_rule = dealias_rule
        self.guard = guard
        self.guard_counter = GuardCounter()
        self.xi = grid.frequencies()
        keep = grid.n_points // (3 if dealias_rule == "quadratic" else 4)
        self._band = np.abs(grid.modes()) <= keep
        self._masked = None  # lazy (idx2, valid, ku_inv, ku_one, kv_inv, kv_one)

    # -- low level ---------------------------------------------------------

    def _truncate(self, coeffs: np.ndarray) -> np.ndarray:
        return np.where(self._band, coeffs, 0.0)

    def _product_spectrum(self, pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
        # dx-normalized transform of a pointwise product, band-truncated
        prod = np.fft.fftshift(np.fft.fft(pa * pb)) * self.grid.dx
        return self._truncate(prod)

    def _physical(self, hat: np.ndarray) -> np.ndarray:
        return np.fft.ifft(np.fft.ifftshift(hat)) / self.grid.dx

    def _masked_kernels(self):
        if self._masked is None:
            n = self.grid.n_points
            if n > 2048:
                warnings.warn(
                    f"building {n}x{n} normal-form kernels; memory grows as n^2",
                    stacklevel=3,
                )
            half = n // 2
            modes = self.grid.modes()
            j_out = modes[:, None]
            j_in = modes[None, :]
            j2 = j_out - j_in
            valid = (j2 >= -half) & (j2 < half)
            idx2 = np.clip(j2 + half, 0, n - 1)
            xi_out = self.xi[:, None]
            xi_in = self.xi[None, :]
            xi2 = np.where(valid, j2 * self.grid.dxi, 0.0)
            phi_u = phase_value(PhaseId.PHI_U1, xi_out, (xi_in, xi2))
            phi_v = phase_value(PhaseId.PHI_V1, xi_out, (xi_in, xi2))
            mask_u = in_region("U", xi_out, xi_in, self.region_params) & valid
            mask_v = in_region("V", xi_out, xi_in, self.region_params) & valid
            # Exactly resonant lattice pairs inside U/V (|Phi| below the
            # guard; measure zero on the line) cannot be integrated by
            # parts: they are excluded from B and N_1..N_4 and routed to the
            # non-IBP bucket N_0, keeping the decomposition an exact
            # partition of the full interaction.
            active_u = mask_u & (np.abs(phi_u) >= self.guard)
            active_v = mask_v & (np.abs(phi_v) >= self.guard)
            self.guard_counter.triggered += int(np.count_nonzero(mask_u & ~active_u))
            self.guard_counter.triggered += int(np.count_nonzero(mask_v & ~active_v))
            ku_inv = np.where(active_u, 1.0 / (1j * np.where(active_u, phi_u, 1.0)), 0.0)
            kv_inv = np.where(active_v, 1.0 / (1j * np.where(active_v, phi_v, 1.0)), 0.0)
            self._masked = (
                idx2,
                valid,
                ku_inv,
                active_u.astype(float),
                kv_inv,
                active_v.astype(float),
            )
        return self._masked

    def _mconv(self, kernel: np.ndarray, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        """(1/L) sum_{xi1} kernel(xi, xi1) f(xi1) g(xi - xi1), lattice-truncated."""
        idx2, valid, *_ = self._masked_kernels()
        g2 = np.where(valid, g[idx2], 0.0)
        return np.einsum("ab,b,ab->a", kernel, f, g2, optimize=True) / self.grid.length

    # -- shared per-evaluation arrays ---------------------------------------

    def conv_arrays(self, t: float, pu: np.ndarray, pv: np.ndarray) -> dict:
        """Solution spectra and the four nonlinear convolution spectra at time t."""
        xi = self.xi
        e_u = np.exp(-1j * t * xi**2)  # profile -> solution for u
        e_v = np.exp(1j * t * xi**3)  # profile -> solution for v
        uhat = e_u * pu
        vhat = e_v * pv
        u_phys = self._physical(uhat)
        v_phys = self._physical(vhat)
        cuv = self._product_spectrum(u_phys, v_phys)
        cu2 = self._product_spectrum(u_phys, np.conj(u_phys))
        cv2 = self._product_spectrum(v_phys, v_phys)
        if self.coupling.beta != 0.0:
            cuuu = self._product_spectrum(u_phys * np.conj(u_phys), u_phys)
        else:
            cuuu = np.zeros_like(cuv)
        a, b, g = self.coupling.alpha, self.coupling.beta, self.coupling.gamma
        du_nl = -1j * a * cuv - 1j * b * cuuu  # nonlinear part of d/dt uhat
        dv_nl = xi * (1j * g * cu2 - 0.5j * cv2)  # nonlinear part of d/dt vhat
        return {
            "t": t,
            "e_u": e_u,
            "e_v": e_v,
            "uhat": uhat,
            "vhat": vhat,
            "cuv": cuv,
            "cuuu": cuuu,
            "cu2": cu2,
            "cv2": cv2,
            "du_nl": du_nl,
            "dv_nl": dv_nl,
        }

    # -- classical formulation ----------------------------------------------

    def rhs_classical(self, t: float, pu: np.ndarray, pv: np.ndarray):
        arrs = self.conv_arrays(t, pu, pv)
        return self._rhs_classical_from(arrs)

    def _rhs_classical_from(self, arrs: dict):
        a, b, g = self.coupling.alpha, self.coupling.beta, self.coupling.gamma
        du = np.conj(arrs["e_u"]) * (-1j * a * arrs["cuv"] - 1j * b * arrs["cuuu"])
        dv = np.conj(arrs["e_v"]) * self.xi * (1j * g * arrs["cu2"] - 0.5j * arrs["cv2"])
        return du, dv

    # -- boundary operators and corrections ---------------------------------
    # All take profile inputs and evaluate at global time t; they return
    # profile-space arrays (the e^{i t xi^2} / e^{-i t xi^3} factor of the
    # output slot is included).

    def apply_b_u(self, t: float, pu: np.ndarray, pv: np.ndarray) -> np.ndarray:
        arrs = self.conv_arrays(t, pu, pv)
        return self._b_u_from(arrs)

    def _b_u_from(self, arrs: dict) -> np.ndarray:
        _, _, ku_inv, *_ = self._masked_kernels()
        return np.conj(arrs["e_u"]) * self._mconv(ku_inv, arrs["uhat"], arrs["vhat"])

    def apply_b_v(self, t: float, pu: np.ndarray) -> np.ndarray:
        xi = self.xi
        uhat = np.exp(-1j * t * xi**2) * pu
        return self._b_v_from_uhat(t, uhat)

    def _b_v_from_uhat(self, t: float, uhat: np.ndarray) -> np.ndarray:
        *_, kv_inv, _ = self._masked_kernels()
        e_v = np.exp(1j * t * self.xi**3)
        return np.conj(e_v) * self.xi * self._mconv(kv_inv, uhat, _star(uhat))

    def apply_n_u(self, j: int, t: float, pu: np.ndarray, pv: np.ndarray) -> np.ndarray:
        """Correction operator N_j of the u-branch, j in 0..5, profile output."""
        arrs = self.conv_arrays(t, pu, pv)
        _, _, ku_inv, ku_one, *_ = self._masked_kernels()
        a, b, g = self.coupling.alpha, self.coupling.beta, self.coupling.gamma
        eu_bar = np.conj(arrs["e_u"])
        if j == 0:
            full = arrs["cuv"]
            low = self._mconv(ku_one, arrs["uhat"], arrs["vhat"])
            return eu_bar * (full - low)
        if j == 1:
            return 1j * a * eu_bar * self._mconv(ku_inv, arrs["cuv"], arrs["vhat"])
        if j == 2:
            return 1j * b * eu_bar * self._mconv(ku_inv, arrs["cuuu"], arrs["vhat"])
        if j == 3:
            return -1j * g * eu_bar * self._mconv(ku_inv, arrs["uhat"], self.xi * arrs["cu2"])
        if j == 4:
            return 0.5j * eu_bar * self._mconv(ku_inv, arrs["uhat"], self.xi * arrs["cv2"])
        if j == 5:
            return eu_bar * arrs["cuuu"]
        raise ValueError(f"j must be in 0..5, got {j}")

    def apply_n_v(self, j: int, t: float, pu: np.ndarray, pv: np.ndarray) -> np.ndarray:
        """Correction operator N_j of the v-branch, j in 0..5, profile output."""
        arrs = self.conv_arrays(t, pu, pv)
        *_, kv_inv, kv_one = self._masked_kernels()
        a, b, g = self.coupling.alpha, self.coupling.beta, self.coupling.gamma
        ev_bar = np.conj(arrs["e_v"])
        ustar = _star(arrs["uhat"])
        if j == 0:
            full = arrs["cu2"]
            low = self._mconv(kv_one, arrs["uhat"], ustar)
            return ev_bar * self.xi * (full - low)
        if j == 1:
            return 1j * a * ev_bar * self.xi * self._mconv(kv_inv, arrs["cuv"], ustar)
        if j == 2:
            return 1j * b * ev_bar * self.xi * self._mconv(kv_inv, arrs["cuuu"], ustar)
        if j == 3:
            return -1j * a * ev_bar * self.xi * self._mconv(kv_inv, arrs["uhat"], _star(arrs["cuv"]))
        if j == 4:
            return -1j * b * ev_bar * self.xi * self._mconv(kv_inv, arrs["uhat"], _star(arrs["cuuu"]))
        if j == 5:
            return ev_bar * self.xi * arrs["cv2"]
        raise ValueError(f"j must be in 0..5, got {j}")

    # -- normal-form right-hand sides ---------------------------------------

    def reconstruct_pu(self, t: float, w: np.ndarray, pv: np.ndarray) -> np.ndarray:
        """Solve pu + i alpha B_u(t)[pu, pv] = w by fixed-point iteration."""
        a = self.coupling.alpha
        xi = self.xi
        e_v = np.exp(1j * t * xi**3)
        vhat = e_v * pv
        e_u = np.exp(-1j * t * xi**2)
        _, _, ku_inv, *_ = self._masked_kernels()
        pu = w.copy()
        scale = float(np.max(np.abs(w))) + 1e-300
        for _ in range(FIXED_POINT_MAX_ITER):
            b_u = np.conj(e_u) * self._mconv(ku_inv, e_u * pu, vhat)
            nxt = w - 1j * a * b_u
            delta = float(np.max(np.abs(nxt - pu)))
            pu = nxt
            if delta <= FIXED_POINT_TOL * scale:
                return pu
        raise RuntimeError(
            f"fixed-point reconstruction did not converge in {FIXED_POINT_MAX_ITER} "
            f"iterations (last update {delta:.3e}); B_u is not a contraction here"
        )

    def rhs_ibp_u(self, t: float, w: np.ndarray, pv: np.ndarray):
        pu = self.reconstruct_pu(t, w, pv)
        arrs = self.conv_arrays(t, pu, pv)
        _, _, ku_inv, ku_one, *_ = self._masked_kernels()
        a, b = self.coupling.alpha, self.coupling.beta
        eu_bar = np.conj(arrs["e_u"])
        n0 = eu_bar * (arrs["cuv"] - self._mconv(ku_one, arrs["uhat"], arrs["vhat"]))
        n12 = -eu_bar * self._mconv(ku_inv, arrs["du_nl"], arrs["vhat"])
        n34 = -eu_bar * self._mconv(ku_inv, arrs["uhat"], arrs["dv_nl"])
        n5 = eu_bar * arrs["cuuu"]
        dw = -1j * a * (n0 + n12 + n34) - 1j * b * n5
        _, dv = self._rhs_classical_from(arrs)
        return dw, dv

    def rhs_ibp_v(self, t: float, pu: np.ndarray, z: np.ndarray):
        g = self.coupling.gamma
        xi = self.xi
        e_u = np.exp(-1j * t * xi**2)
        uhat = e_u * pu
        b_v = self._b_v_from_uhat(t, uhat)
        pv = z + 1j * g * b_v
        arrs = self.conv_arrays(t, pu, pv)
        *_, kv_inv, kv_one = self._masked_kernels()
        ev_bar = np.conj(arrs["e_v"])
        ustar = _star(arrs["uhat"])
        n0 = ev_bar * xi * (arrs["cu2"] - self._mconv(kv_one, arrs["uhat"], ustar))
        n12 = -ev_bar * xi * self._mconv(kv_inv, arrs["du_nl"], ustar)
        n34 = -ev_bar * xi * self._mconv(kv_inv, arrs["uhat"], _star(arrs["du_nl"]))
        n5 = ev_bar * xi * arrs["cv2"]
        dz = 1j * g * (n0 + n12 + n34) - 0.5j * n5
        du, _ = self._rhs_classical_from(arrs)
        return du, dz


# ---------------------------------------------------------------------------
# Run record and the evolve() driver
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    """Sampled evolution: profile states plus per-sample diagnostics."""

    grid: Grid
    coupling: CouplingParams
    config: EvolveConfig
    regularity: Regularity
    times: np.ndarray
    profiles_u: np.ndarray  # (n_samples, n_points)
    profiles_v: np.ndarray
    mass: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray
    norm_hk: np.ndarray
    norm_hs: np.ndarray
    reality_defect_max: float
    guard: GuardCounter

    def field(self, index: int, component: str) -> SpectralField:
        """Stored profile at sample `index` as a SpectralField."""
        if component == "u":
            return SpectralField(self.grid, self.profiles_u[index], "u")
        if component == "v":
            return SpectralField(self.grid, self.profiles_v[index], "v")
        raise ValueError(f"component must be 'u' or 'v', got {component!r}")

    def solution_coeffs(self, component: str) -> np.ndarray:
        """Solution (not profile) spectra at the sample times, rows in time."""
        xi = self.grid.frequencies()
        t = self.times[:, None]
        if component == "u":
            return np.exp(-1j * t * xi[None, :] ** 2) * self.profiles_u
        if component == "v":
            return np.exp(1j * t * xi[None, :] ** 3) * self.profiles_v
        raise ValueError(f"component must be 'u' or 'v', got {component!r}")

    def bourgain(self, component: str, sigma: float, b: float, window="hann") -> float:
        phase = "schrodinger" if component == "u" else "airy"
        return bourgain_norm(
            self.times, self.solution_coeffs(component), self.grid, sigma, b, phase, window
        )


def conservation_report(record: RunRecord) -> dict:
    """Worst-case drifts of the conserved functionals over a record.

    Drift is relative when the initial value is bounded away from zero
    (|Q(0)| > 1e-12 * scale) and absolute otherwise.
    """
    out = {}
    for name in ("mass", "momentum", "energy"):
        series = getattr(record, name)
        q0 = series[0]
        dev = float(np.max(np.abs(series - q0)))
        scale = abs(q0)
        if scale > 1e-12:
            out[f"{name}_drift"] = dev / scale
            out[f"{name}_drift_kind"] = "relative"
        else:
            out[f"{name}_drift"] = dev
            out[f"{name}_drift_kind"] = "absolute"
    out["reality_defect_max"] = record.reality_defect_max
    out["guard_triggered"] = record.guard.triggered
    return out


def _warn_regime(mode: str, reg: Regularity) -> None:
    gap = reg.k - reg.s
    if mode == "ibp_u" and not (2.0 <= gap < 3.0):
        warnings.warn(
            f"mode ibp_u pairs with 2 <= k-s < 3 but k-s = {gap:.3g}; proceeding (advisory)",
            stacklevel=3,
        )
    if mode == "ibp_v" and not (-2.0 < gap <= -1.0):
        warnings.warn(
            f"mode ibp_v pairs with -2 < k-s <= -1 but k-s = {gap:.3g}; proceeding (advisory)",
            stacklevel=3,
        )


def evolve(
    u0: SpectralField,
    v0: SpectralField,
    coupling: CouplingParams,
    config: EvolveConfig,
    regularity: Regularity | None = None,
) -> RunRecord:
    """Integrate the coupled system from spectral initial data.

    Returns a RunRecord sampled every config.record_stride steps (always
    including t = 0 and t = t_end when the stride divides the step count).
    Raises BlowUpError when norms grow by BLOWUP_FACTOR, ValueError for
    mismatched grids or a dt above the declared stability bound.
    """
    if u0.grid != v0.grid:
        raise ValueError("u0 and v0 must share a grid")
    reg = regularity if regularity is not None else Regularity(k=1.0, s=0.0)
    _warn_regime(config.mode, reg)
    rule = config.resolved_rule(coupling)
    bound = stability_dt_bound(u0, v0, coupling, rule)
    if config.dt > bound:
        raise ValueError(
            f"dt={config.dt} exceeds the declared stability bound {bound:.6g} "
            "for this data and coupling"
        )
    system = System(u0.grid, coupling, config.region_params, rule, config.guard)
    pu = dealias(u0, rule).coeffs.copy()
    pv = dealias(hermitian_symmetrize(v0), rule).coeffs.copy()

    n_steps = int(round(config.t_end / config.dt))
    dt = config.dt
    mode = config.mode

    if mode == "classical":
        state = (pu, pv)
        rhs = system.rhs_classical
    elif mode == "ibp_u":
        w0 = pu + 1j * coupling.alpha * system.apply_b_u(0.0, pu, pv)
        state = (w0, pv)
        rhs = system.rhs_ibp_u
    else:
        z0 = pv - 1j * coupling.gamma * system.apply_b_v(0.0, pu)
        state = (pu, z0)
        rhs = system.rhs_ibp_v

    def current_profiles(t: float, st) -> tuple[np.ndarray, np.ndarray]:
        if mode == "classical":
            return st
        if mode == "ibp_u":
            pu_now = system.reconstruct_pu(t, st[0], st[1])
            return pu_now, st[1]
        pv_now = st[1] + 1j * coupling.gamma * system.apply_b_v(t, st[0])
        return st[0], pv_now

    times = [0.0]
    pu_now, pv_now = current_profiles(0.0, state)
    samples_u = [pu_now.copy()]
    samples_v = [pv_now.copy()]
    defect_max = reality_defect(SpectralField(u0.grid, pv_now, "v"))
    norm0_u = float(np.linalg.norm(pu_now))
    norm0_v = float(np.linalg.norm(pv_now))
    floor_u = max(norm0_u, 1e-30)
    floor_v = max(norm0_v, 1e-30)

    xi_sq = u0.grid.frequencies() ** 2
    xi_cu = u0.grid.frequencies() ** 3

    t = 0.0
    for step in range(1, n_steps + 1):
        a1, b1 = rhs(t, *state)
        a2, b2 = rhs(t + 0.5 * dt, state[0] + 0.5 * dt * a1, state[1] + 0.5 * dt * b1)
        a3, b3 = rhs(t + 0.5 * dt, state[0] + 0.5 * dt * a2, state[1] + 0.5 * dt * b2)
        a4, b4 = rhs(t + dt, state[0] + dt * a3, state[1] + dt * b3)
        state = (
            state[0] + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            state[1] + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
        )
        t = step * dt

        # maintain v-reality: project the reconstructed profile each step
        pu_now, pv_now = current_profiles(t, state)
        defect_max = max(defect_max, reality_defect(SpectralField(u0.grid, pv_now, "v")))
        pv_sym = hermitian_symmetrize(SpectralField(u0.grid, pv_now, "v")).coeffs
        if mode == "ibp_v":
            state = (state[0], state[1] + (pv_sym - pv_now))
        elif mode == "classical":
            state = (state[0], pv_sym)
        else:
            state = (state[0], pv_sym)
        pv_now = pv_sym

        nu = float(np.linalg.norm(pu_now))
        nv = float(np.linalg.norm(pv_now))
        factor = max(nu / floor_u, nv / floor_v)
        if factor > BLOWUP_FACTOR:
            raise BlowUpError(t, factor)

        # stability is state dependent; re-check as the run evolves
        u_now = SpectralField(u0.grid, np.exp(-1j * t * xi_sq) * pu_now, "u")
        v_now = SpectralField(u0.grid, np.exp(1j * t * xi_cu) * pv_now, "v")
        live_bound = stability_dt_bound(u_now, v_now, coupling, rule)
        if dt > live_bound:
            raise ValueError(
                f"dt={dt} exceeds the stability bound {live_bound:.6g} "
                f"reached at t={t:.6g}"
            )

        if step % config.record_stride == 0:
            times.append(t)
            samples_u.append(pu_now.copy())
            samples_v.append(pv_now.copy())

    times_arr = np.asarray(times)
    prof_u = np.asarray(samples_u)
    prof_v = np.asarray(samples_v)
    n_samp = times_arr.size
    diag = {k: np.empty(n_samp) for k in ("mass", "momentum", "energy", "hk", "hs")}
    for i in range(n_samp):
        # diagnostics act on solution spectra; the energy's physical-space
        # integrals are not invariant under the profile phase rotation
        ti = times_arr[i]
        fu = SpectralField(u0.grid, np.exp(-1j * ti * xi_sq) * prof_u[i], "u")
        fv = SpectralField(u0.grid, np.exp(1j * ti * xi_cu) * prof_v[i], "v")
        diag["mass"][i] = mass(fu)
        diag["momentum"][i] = momentum(fu, fv, coupling)
        diag["energy"][i] = energy(fu, fv, coupling)
        diag["hk"][i] = sobolev_norm(fu, reg.k)
        diag["hs"][i] = sobolev_norm(fv, reg.s)

    return RunRecord(
        grid=u0.grid,
        coupling=coupling,
        config=config,
        regularity=reg,
        times=times_arr,
        profiles_u=prof_u,
        profiles_v=prof_v,
        mass=diag["mass"],
        momentum=diag["momentum"],
        energy=diag["energy"],
        norm_hk=diag["hk"],
        norm_hs=diag["hs"],
        reality_defect_max=float(defect_max),
        guard=system.guard_counter,
    )


def write_run_csv(record: RunRecord, path) -> None:
    """Deterministic CSV of the diagnostic time series (17 significant digits)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# skdvlab evolve mode={record.config.mode} n={record.grid.n_points} "
                 f"L={record.grid.length:.17g} dt={record.config.dt:.17g}\n")
        fh.write("t,mass,momentum,energy,norm_Hk,norm_Hs\n")
        for i, t in enumerate(record.times):
            fh.write(
                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n"
                % (
                    t,
                    record.mass[i],
                    record.momentum[i],
                    record.energy[i],
                    record.norm_hk[i],
                    record.norm_hs[i],
                )
            )
