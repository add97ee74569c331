"""Periodic spectral toolbox: grids, transforms, norms, randomized data.

The line is approximated by a torus of circumference ``L`` sampled at ``n``
equispaced points.  Forward/inverse transforms are normalized so that lattice
sums approximate line integrals directly:

    Ff(xi_j) = dx * sum_m f(x_m) exp(-i xi_j x_m),      xi_j = 2*pi*j/L,
    f(x_m)   = dxi/(2*pi) * sum_j Ff(xi_j) exp(+i xi_j x_m),   dxi = 2*pi/L.

Coefficients are stored on the *monotone* frequency lattice
j in {-n/2, ..., n/2 - 1}; ``np.fft`` order is only an internal detail.
With this convention a pointwise product in physical space corresponds to the
discrete convolution ``(1/L) * sum_eta a(eta) b(xi - eta)``, which is the
lattice version of the continuum ``(1/2pi) * (a * b)(xi)``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

ROUND_TRIP_RTOL = 1e-12  # guaranteed forward/inverse accuracy (relative)

_KIND_CODES = {"u": 0, "v": 1}
_KIND_NAMES = {0: "u", 1: "v"}


def bracket(xi):
    """Japanese bracket <xi> = (1 + xi^2)^(1/2), elementwise."""
    return np.sqrt(1.0 + np.square(xi))


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid and its monotone frequency lattice.

    Parameters
    ----------
    n_points:
        Number of samples; must be a power of two (>= 2).
    length:
        Torus circumference L > 0.
    """

    n_points: int
    length: float

    def __post_init__(self) -> None:
        n = self.n_points
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError(f"n_points must be a power of two >= 2, got {n!r}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length!r}")

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def dxi(self) -> float:
        return 2.0 * np.pi / self.length

    def modes(self) -> np.ndarray:
        """Integer mode numbers j in monotone order -n/2 .. n/2 - 1."""
        half = self.n_points // 2
        return np.arange(-half, half)

    def frequencies(self) -> np.ndarray:
        """Frequency lattice xi_j = 2*pi*j/L, monotone order."""
        return self.dxi * self.modes()

    def points(self) -> np.ndarray:
        """Sample positions x_m = m*dx, m = 0 .. n-1."""
        return self.dx * np.arange(self.n_points)

    def index_of_mode(self, j: int) -> int:
        """Array index of integer mode j on the monotone lattice."""
        half = self.n_points // 2
        if not -half <= j < half:
            raise ValueError(f"mode {j} outside lattice [-{half}, {half})")
        return j + half


@dataclass(frozen=True)
class SpectralField:
    """Spectral coefficients of one field on a grid.

    ``kind`` is ``"u"`` for a genuinely complex field and ``"v"`` for a field
    that is real in physical space.  For v-like fields the Hermitian symmetry
    coeffs(-xi) = conj(coeffs(xi)) is an *invariant to be maintained by
    producers*, not enforced at construction (intermediate arithmetic may
    transiently violate it); :func:`reality_defect` measures deviations and
    :func:`hermitian_symmetrize` restores it.
    """

    grid: Grid
    coeffs: np.ndarray  # complex, monotone lattice order
    kind: str = "u"

    def __post_init__(self) -> None:
        if self.kind not in _KIND_CODES:
            raise ValueError(f"kind must be 'u' or 'v', got {self.kind!r}")
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.grid.n_points,):
            raise ValueError(
                f"coeffs shape {c.shape} does not match n_points={self.grid.n_points}"
            )
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.kind)


def to_spectral(values: np.ndarray, grid: Grid, kind: str = "u") -> SpectralField:
    """Forward transform of physical samples (carries dx).

    Parameters
    ----------
    values:
        Physical samples, length ``grid.n_points``.
    grid:
        Target grid.
    kind:
        ``"u"`` or ``"v"`` tag for the resulting field.

    Returns
    -------
    SpectralField with coefficients ``dx * sum_m values_m e^{-i xi x_m}`` on
    the monotone lattice.
    """
    arr = np.asarray(values, dtype=np.complex128)
    if arr.shape != (grid.n_points,):
        raise ValueError(
            f"physical array has shape {arr.shape}, expected ({grid.n_points},)"
        )
    coeffs = np.fft.fftshift(np.fft.fft(arr)) * grid.dx
    return SpectralField(grid, coeffs, kind)


def to_physical(f: SpectralField) -> np.ndarray:
    """Inverse transform (carries dxi/(2*pi) = 1/(n*dx) per mode)."""
    return np.fft.ifft(np.fft.ifftshift(f.coeffs)) / f.grid.dx


def reality_defect(f: SpectralField) -> float:
    """Max abs deviation from the Hermitian symmetry coeffs(-xi)=conj(coeffs(xi))."""
    c = f.coeffs
    n = f.grid.n_points
    paired = c[1:]  # modes -n/2+1 .. n/2-1 reverse onto themselves
    defect = np.max(np.abs(paired - np.conj(paired[::-1]))) if n > 1 else 0.0
    nyq = abs(c[0].imag)  # unpaired Nyquist mode must be real
    return float(max(defect, nyq))


def hermitian_symmetrize(f: SpectralField) -> SpectralField:
    """Project onto the Hermitian-symmetric (real-in-physical-space) part."""
    c = f.coeffs.copy()
    c[1:] = 0.5 * (c[1:] + np.conj(c[1:][::-1]))
    c[0] = c[0].real
    return SpectralField(f.grid, c, "v")


def sobolev_norm(f: SpectralField, sigma: float) -> float:
    """Discrete Sobolev norm (sum_xi <xi>^(2*sigma) |coeffs|^2 * dxi)^(1/2)."""
    xi = f.grid.frequencies()
    total = np.sum(bracket(xi) ** (2.0 * sigma) * np.abs(f.coeffs) ** 2) * f.grid.dxi
    return float(np.sqrt(total))


def dealias(f: SpectralField, rule: str = "quadratic") -> SpectralField:
    """Zero high modes: 2/3 rule (|j| > n//3) or 1/2 rule for cubic terms.

    The quadratic rule keeps |j| <= n//3 so that aliased images of products of
    two retained modes land strictly outside the retained band; the cubic
    rule keeps |j| <= n//4.  Idempotent.
    """
    if rule == "quadratic":
        keep = f.grid.n_points // 3
    elif rule == "cubic":
        keep = f.grid.n_points // 4
    else:
        raise ValueError(f"unknown dealias rule {rule!r}")
    j = f.grid.modes()
    c = np.where(np.abs(j) > keep, 0.0, f.coeffs)
    return SpectralField(f.grid, c, f.kind)


def plane_wave(grid: Grid, j: int, amplitude: complex = 1.0) -> np.ndarray:
    """Physical samples of amplitude * exp(i xi_j x) for integer mode j."""
    xi = grid.dxi * j
    return amplitude * np.exp(1j * xi * grid.points())


def spectral_product(a: SpectralField, b: SpectralField, rule: str = "quadratic") -> SpectralField:
    """Dealiased pseudospectral product: transform of (a_phys * b_phys).

    For inputs supported inside the retained band this equals the exact
    truncated convolution ``(1/L) sum_eta a(eta) b(xi-eta)``.
    """
    pa = to_physical(a)
    pb = to_physical(b)
    kind = "v" if (a.kind == "v" and b.kind == "v") else "u"
    return dealias(to_spectral(pa * pb, a.grid, kind), rule)


def random_sobolev_data(
    grid: Grid,
    sigma: float,
    seed: int,
    kind: str = "u",
    eta_plus: float = 0.01,
) -> SpectralField:
    """Random field with prescribed Sobolev regularity.

    coeffs(xi) = g_xi * <xi>^(-sigma - 1/2 - eta_plus) with g_xi independent
    standard complex Gaussians (Hermitian-symmetrized for v-like data), so the
    field lies in H^sigma' for every sigma' < sigma almost surely.
    Deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    n = grid.n_points
    g = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    decay = bracket(grid.frequencies()) ** (-sigma - 0.5 - eta_plus)
    f = SpectralField(grid, g * decay, kind)
    if kind == "v":
        f = hermitian_symmetrize(f)
    return f


def bourgain_norm(
    times: np.ndarray,
    coeff_rows: np.ndarray,
    grid: Grid,
    sigma: float,
    b: float,
    phase: str,
    window: str | np.ndarray = "hann",
) -> float:
    """Discrete Bourgain-space norm of a sampled evolution.

    Parameters
    ----------
    times:
        Uniformly spaced sample times (>= 8 samples).
    coeff_rows:
        Array of shape (n_times, n_points): spectral coefficients of the
        *solution* (not the profile) at each sample time, lattice order.
    grid:
        Spatial grid of the rows.
    sigma, b:
        Spatial and temporal exponents.
    phase:
        ``"schrodinger"`` weights modulation by <tau + xi^2>, ``"airy"`` by
        <tau - xi^3>.
    window:
        ``"hann"`` (default) or an explicit taper array of length n_times;
        the taper makes the record effectively compactly supported in time.

    Returns
    -------
    (sum_{tau,xi} weight^(2b) <xi>^(2 sigma) |F_t(w u)|^2 dtau/(2pi) dxi)^(1/2)
    where F_t carries dt.  With b = 0 this collapses to the time-integrated
    tapered Sobolev norm.
    """
    t = np.asarray(times, dtype=float)
    rows = np.asarray(coeff_rows, dtype=np.complex128)
    if t.ndim != 1 or t.size < 8:
        raise ValueError(f"need at least 8 uniformly spaced time samples, got {t.size}")
    if rows.shape != (t.size, grid.n_points):
        raise ValueError(
            f"coeff_rows shape {rows.shape} does not match "
            f"(n_times={t.size}, n_points={grid.n_points})"
        )
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        raise ValueError("time samples are not uniformly spaced")
    dt0 = float(dt[0])
    n_t = t.size
    if isinstance(window, str):
        if window != "hann":
            raise ValueError(f"unknown window {window!r}")
        taper = np.hanning(n_t)
    else:
        taper = np.asarray(window, dtype=float)
        if taper.shape != (n_t,):
            raise ValueError("window array length does not match time samples")
    tapered = taper[:, None] * rows
    hat = np.fft.fftshift(np.fft.fft(tapered, axis=0), axes=0) * dt0
    tau = 2.0 * np.pi * np.fft.fftshift(np.fft.fftfreq(n_t, d=dt0))
    xi = grid.frequencies()
    if phase == "schrodinger":
        modulation = tau[:, None] + xi[None, :] ** 2
    elif phase == "airy":
        modulation = tau[:, None] - xi[None, :] ** 3
    else:
        raise ValueError(f"phase must be 'schrodinger' or 'airy', got {phase!r}")
    dtau = 2.0 * np.pi / (n_t * dt0)
    weight = bracket(modulation) ** (2.0 * b) * bracket(xi)[None, :] ** (2.0 * sigma)
    total = np.sum(weight * np.abs(hat) ** 2) * (dtau / (2.0 * np.pi)) * grid.dxi
    return float(np.sqrt(total))


@dataclass(frozen=True)
class Regularity:
    """Regularity bookkeeping for estimates and evolutions.

    Fields
    ------
    k, s:
        Sobolev indices of the Schrodinger and KdV components.
    b, b_prime:
        Temporal Bourgain exponents; b in (1/2, 3/5], b_prime in [b-1, -2/5]
        (the lower endpoint is admitted because the default pair
        (0.51, -0.49) sits exactly on it; b_prime plays the role of a
        "slightly above b-1" exponent).
    eps:
        Smoothing gain >= 0.
    eta_plus:
        Numerical stand-in for every "0+" exponent (default 0.01).
    """

    k: float
    s: float
    b: float = 0.51
    b_prime: float = -0.49
    eps: float = 0.0
    eta_plus: float = 0.01

    def __post_init__(self) -> None:
        if not (0.5 < self.b <= 0.6):
            raise ValueError(f"b must lie in (1/2, 3/5], got {self.b}")
        if not (self.b - 1.0 - 1e-12 <= self.b_prime <= -0.4 + 1e-12):
            raise ValueError(
                f"b_prime must lie in [b-1, -2/5] = [{self.b - 1.0}, -0.4], got {self.b_prime}"
            )
        if self.eps < 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if not self.eta_plus > 0:
            raise ValueError(f"eta_plus must be > 0, got {self.eta_plus}")


# ---------------------------------------------------------------------------
# Serialization: JSON record and little-endian binary, lattice order.
# ---------------------------------------------------------------------------

_BIN_HEADER = struct.Struct("<QdB")  # n_points, length, kind code


def field_to_json(f: SpectralField) -> str:
    interleaved = np.empty(2 * f.grid.n_points)
    interleaved[0::2] = f.coeffs.real
    interleaved[1::2] = f.coeffs.imag
    return json.dumps(
        {
            "n_points": f.grid.n_points,
            "length": f.grid.length,
            "kind": f.kind,
            "re_im": interleaved.tolist(),
        }
    )


def field_from_json(text: str) -> SpectralField:
    rec = json.loads(text)
    grid = Grid(int(rec["n_points"]), float(rec["length"]))
    flat = np.asarray(rec["re_im"], dtype=float)
    if flat.shape != (2 * grid.n_points,):
        raise ValueError("re_im length does not match 2*n_points")
    return SpectralField(grid, flat[0::2] + 1j * flat[1::2], str(rec["kind"]))


def field_to_bytes(f: SpectralField) -> bytes:
    head = _BIN_HEADER.pack(f.grid.n_points, f.grid.length, _KIND_CODES[f.kind])
    interleaved = np.empty(2 * f.grid.n_points)
    interleaved[0::2] = f.coeffs.real
    interleaved[1::2] = f.coeffs.imag
    return head + interleaved.astype("<f8").tobytes()


def field_from_bytes(blob: bytes) -> SpectralField:
    n_points, length, kind_code = _BIN_HEADER.unpack_from(blob)
    grid = Grid(int(n_points), float(length))
    flat = np.frombuffer(blob, dtype="<f8", offset=_BIN_HEADER.size)
    if flat.shape != (2 * grid.n_points,):
        raise ValueError("binary payload length does not match 2*n_points")
    return SpectralField(grid, flat[0::2] + 1j * flat[1::2], _KIND_NAMES[int(kind_code)])
