"""Fractional heat kernel, Riesz kernel, Littlewood-Paley blocks, PV sums."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.interpolate import CubicHermiteSpline
from scipy.signal import fftconvolve

from .grid import GridSpec, ScalarField, VectorField


class QuadratureError(RuntimeError):
    """Oscillatory quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


# ---------------------------------------------------------------------------
# Radial Fourier inversion
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_BESSEL = {0: special.j0, 1: special.j1}


def _cutoff(alpha: float, nu_t: float, power: float) -> float:
    """Frequency beyond which exp(-nu_t s^{2a}) s^power is below ~1e-19."""
    s = (50.0 / nu_t) ** (1.0 / (2 * alpha))
    for _ in range(4):
        s = ((50.0 + power * math.log(max(s, 1.0))) / nu_t) ** (1.0 / (2 * alpha))
    return s


def _panel_edges(r: float, s_max: float) -> np.ndarray:
    """Half-period panels in s, geometrically graded towards s = 0.

    The grading absorbs the s^{2a} non-smoothness of the damping factor at the
    origin; beyond the first panel each piece spans half a Bessel period.
    """
    width = math.pi / r if r > 0 else s_max / 16
    width = min(width, s_max / 16)
    first = width * np.geomspace(1e-6, 1.0, 14)
    n = max(1, int(math.ceil((s_max - width) / width)))
    rest = width + width * np.arange(1, n + 1)
    return np.concatenate([[0.0], first, rest])


def hankel_integral(r, alpha: float, nu_t: float, order: int, power: float,
                    tol: float = 1e-13) -> np.ndarray:
    """I(r) = int_0^inf exp(-nu_t s^{2 alpha}) s^power J_order(s r) ds.

    Gauss-Legendre on half-period panels; the stretched-exponential damping
    makes the panel sum terminate, and the size of the trailing panels is
    reported as the residual.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    s_max = _cutoff(alpha, nu_t, power)
    out = np.empty_like(r)
    for i, ri in enumerate(r):
        edges = _panel_edges(ri, s_max)
        a, b = edges[:-1], edges[1:]
        half = 0.5 * (b - a)
        s = (0.5 * (a + b))[:, None] + half[:, None] * _GL_NODES[None, :]
        bessel = _BESSEL.get(order, lambda z: special.jv(order, z))
        envelope = np.exp(-nu_t * s ** (2 * alpha)) * s**power
        pieces = (envelope * bessel(s * ri) * _GL_WEIGHTS[None, :]).sum(axis=1) * half
        total = pieces.sum()
        residual = np.abs(pieces[-3:]).sum()
        scale = max(float((envelope * _GL_WEIGHTS[None, :]).sum(axis=1) @ half), 1e-300)
        if residual > tol * scale:
            raise QuadratureError("oscillatory tail did not decay", residual)
        out[i] = total
    return out


def heat_kernel_direct(r, alpha: float, nu: float, t: float = 1.0) -> np.ndarray:
    """g_alpha(t, r) by direct radial Fourier inversion."""
    return hankel_integral(r, alpha, nu * t, 0, 1.0) / (2 * np.pi)


def heat_kernel_radial_derivative(r, alpha: float, nu: float, t: float = 1.0) -> np.ndarray:
    return -hankel_integral(r, alpha, nu * t, 1, 2.0) / (2 * np.pi)


def heat_kernel_mass_within(radius: float, alpha: float, nu: float) -> float:
    """2 pi int_0^R g(1,r) r dr, via int_0^R J0(sr) r dr = R J1(sR)/s."""
    return float(radius * hankel_integral(radius, alpha, nu, 1, 0.0)[0])


def tail_coefficients(alpha: float, nu: float, terms: int = 4) -> np.ndarray:
    """Coefficients a_k of the large-r expansion g(1,r) ~ sum a_k r^{-2-2 alpha k}."""
    coeffs = []
    for k in range(1, terms + 1):
        x = alpha * k
        if abs(x - round(x)) < 1e-14:
            coeffs.append(0.0)
            continue
        a = ((-1) ** k * 4.0**x * math.gamma(1 + x) * nu**k
             / (math.pi * math.factorial(k) * math.gamma(-x)))
        coeffs.append(a)
    return np.array(coeffs)


def levy_constant(alpha: float) -> float:
    """c_alpha = 4^alpha Gamma(1+alpha) / (pi |Gamma(-alpha)|)."""
    return 4.0**alpha * math.gamma(1 + alpha) / (math.pi * abs(math.gamma(-alpha)))


# ---------------------------------------------------------------------------
# Kernel profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelProfile:
    """Radial table of g_alpha(1, r) with derivative and cached mass.

    Evaluation interpolates log g with cubic Hermite pieces (exact slopes from
    the derivative table) and extends past r_max with a power law matched to
    the last sample.
    """

    alpha: float
    nu: float
    radii: np.ndarray
    values: np.ndarray
    dvalues: np.ndarray
    mass: float
    residual: float = 0.0
    _spline: CubicHermiteSpline = field(repr=False, compare=False, default=None)

    @property
    def r_max(self) -> float:
        return float(self.radii[-1])

    @property
    def tail_slope(self) -> float:
        return float(self.radii[-1] * self.dvalues[-1] / self.values[-1])

    def __call__(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        inside = r <= self.r_max
        out[inside] = np.exp(self._spline(r[inside]))
        far = ~inside
        if np.any(far):
            out[far] = self.values[-1] * (r[far] / self.r_max) ** self.tail_slope
        return out

    def derivative(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        inside = r <= self.r_max
        out = np.empty_like(r)
        out[inside] = self(r[inside]) * self._spline(r[inside], 1)
        far = ~inside
        if np.any(far):
            out[far] = self(r[far]) * self.tail_slope / r[far]
        return out


def heat_kernel_profile(alpha: float, nu: float = 1.0, r_max: float | None = None,
                        n_samples: int = 2048) -> KernelProfile:
    if not 0.5 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [1/2, 1]")
    if nu <= 0:
        raise ValueError("nu must be positive")
    scale = nu ** (1.0 / (2 * alpha))
    if r_max is None:
        r_max = max(32.0, 16.0 * scale)
    if r_max < 8.0 * scale * (1 - 1e-12):
        raise ValueError("r_max must be at least 8 nu^{1/(2 alpha)}")
    if n_samples < 256:
        raise ValueError("n_samples must be at least 256")
    radii = np.linspace(0.0, r_max, n_samples)
    values = heat_kernel_direct(radii, alpha, nu)
    dvalues = heat_kernel_radial_derivative(radii, alpha, nu)

    # Below ~1e-13 of the peak the quadrature only returns rounding noise
    # (Gaussian-like core with a negligible power tail). Continue those
    # samples with log g quadratic in r, matched to the last trusted sample.
    floor = 1e-13 * values[0]
    bad = np.nonzero(values < floor)[0]
    if bad.size:
        k = bad[0] - 1
        rk, gk, dk = radii[k], values[k], dvalues[k]
        c = dk / (2 * rk * gk)
        values = values.copy()
        dvalues = dvalues.copy()
        values[k + 1:] = gk * np.exp(c * (radii[k + 1:] ** 2 - rk**2))
        dvalues[k + 1:] = 2 * c * radii[k + 1:] * values[k + 1:]

    spline = CubicHermiteSpline(radii, np.log(values), dvalues / values)

    mass = heat_kernel_mass_within(r_max, alpha, nu)
    coeffs = tail_coefficients(alpha, nu)
    if np.any(coeffs):
        k = np.arange(1, coeffs.size + 1)
        terms = 2 * np.pi * coeffs * r_max ** (-2 * alpha * k) / (2 * alpha * k)
        mass += float(terms.sum())
    residual = float(abs(mass - 1.0))
    return KernelProfile(alpha, nu, radii, values, dvalues, mass, residual, spline)


def heat_kernel_at(profile: KernelProfile, t: float, x) -> np.ndarray:
    """g_alpha(t, x) = t^{-1/alpha} g_alpha(1, |x| t^{-1/(2 alpha)}).

    The table stores the kernel at unit time for the profile's own nu, so the
    dilation carries t alone; x may be a 2-vector, an array of 2-vectors
    (last axis), or radii.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1) if x.ndim >= 1 and x.shape[-1] == 2 else np.abs(x)
    a = profile.alpha
    return t ** (-1.0 / a) * profile(r * t ** (-1.0 / (2 * a)))


def four_dim_kernel(r, alpha: float, nu: float) -> np.ndarray:
    """Radial profile of the fractional heat kernel in four dimensions.

    Evaluated with mpmath's oscillatory quadrature, independently of the
    panel engine above.
    """
    import mpmath as mp

    out = []
    for ri in np.atleast_1d(r):
        ri = float(ri)
        f = lambda s: mp.exp(-nu * s ** (2 * alpha)) * mp.besselj(1, s * ri) * s**2
        val = mp.quadosc(f, [0, mp.inf], zeros=lambda n: mp.besseljzero(1, n) / ri)
        out.append(float(val) / (4 * math.pi**2 * ri))
    return np.array(out)


# ---------------------------------------------------------------------------
# Riesz kernel and principal-value sums
# ---------------------------------------------------------------------------

def riesz_kernel(x) -> np.ndarray:
    """K(x) = x_perp / (2 pi |x|^3), with x_perp = (-x2, x1).

    This is the kernel whose Fourier multiplier is -i xi_perp/|xi|.
    """
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise ValueError("the Riesz kernel is singular at the origin")
    r3 = (2 * np.pi * r**3)[..., None]
    perp = np.stack([-x[..., 1], x[..., 0]], axis=-1)
    return perp / r3


def _annulus_stencil(spec: GridSpec, r: float, R: float):
    mx = int(math.floor(R / spec.hx))
    my = int(math.floor(R / spec.hy))
    dx = np.arange(-mx, mx + 1) * spec.hx
    dy = np.arange(-my, my + 1) * spec.hy
    X, Y = np.meshgrid(dx, dy)
    rad = np.hypot(X, Y)
    inside = (rad > r) & (rad < R)
    safe = np.where(inside, rad, 1.0)
    k1 = np.where(inside, -Y / (2 * np.pi * safe**3), 0.0)
    k2 = np.where(inside, X / (2 * np.pi * safe**3), 0.0)
    return k1, k2


def annulus_pv_convolve(f: ScalarField, r: float, R: float) -> VectorField:
    """hx*hy * sum_{r<|x-y|<R} K(x-y) f(y) with f taken as zero off the grid.

    The sum is evaluated as a linear (non-periodic) convolution.
    """
    spec = f.spec
    if not 0 < r < R:
        raise ValueError("need 0 < r < R")
    if R > math.hypot(spec.lx, spec.ly) * (1 + 1e-12):
        raise ValueError("R must not exceed the domain diagonal")
    k1, k2 = _annulus_stencil(spec, r, R)
    a = f.samples
    area = spec.cell_area
    out1 = fftconvolve(a, k1, mode="same") * area
    out2 = fftconvolve(a, k2, mode="same") * area
    return VectorField.from_arrays(spec, out1, out2)


# ---------------------------------------------------------------------------
# Littlewood-Paley blocks
# ---------------------------------------------------------------------------

def _smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1 - x, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class LPBlockSpec:
    """Dyadic shell j; the low-pass profile falls from 1 to 0 on [lo, hi].

    The shell mask is chi(|xi|/2^{j+1}) - chi(|xi|/2^j); with lo=1/2 and
    hi=3/4 it lives on 2^{j-1} <= |xi| <= 3*2^{j-1} and the masks of all
    shells sum to one away from xi = 0.
    """

    j: int
    lo: float = 0.5
    hi: float = 0.75

    def low_pass(self, rho: np.ndarray) -> np.ndarray:
        return 1.0 - _smooth_step((rho - self.lo) / (self.hi - self.lo))

    def mask(self, xi_abs: np.ndarray) -> np.ndarray:
        rho = xi_abs / 2.0**self.j
        m = self.low_pass(rho / 2) - self.low_pass(rho)
        return np.where(xi_abs == 0, 0.0, m)

    def support(self) -> tuple[float, float]:
        return (self.lo * 2.0**self.j, 2 * self.hi * 2.0**self.j)


def _shell_resolved(spec: GridSpec, block: LPBlockSpec) -> bool:
    xi1, xi2 = spec.frequencies()
    mags = np.hypot(xi1, xi2)
    lo, hi = block.support()
    inside = (mags > lo) & (mags < hi)
    return bool(np.any(inside))


def lp_project(f: ScalarField, j: int) -> ScalarField:
    spec = f.spec
    block = LPBlockSpec(j)
    if not _shell_resolved(spec, block):
        warnings.warn(f"shell j={j} holds no resolved wavenumbers; returning zero", stacklevel=2)
        return ScalarField.zeros(spec)
    xi1, xi2 = spec.frequencies()
    m = block.mask(np.hypot(xi1, xi2))
    return ScalarField(spec, np.fft.ifft2(m * np.fft.fft2(f.samples)).real)


def lp_riesz_block(f: ScalarField, j: int) -> VectorField:
    """Shell j of the Riesz velocity: mask times -i xi_perp/|xi|."""
    spec = f.spec
    block = LPBlockSpec(j)
    if not _shell_resolved(spec, block):
        warnings.warn(f"shell j={j} holds no resolved wavenumbers; returning zero", stacklevel=2)
        return VectorField.zeros(spec)
    xi1, xi2 = _odd_frequencies(spec)
    mag = np.hypot(*spec.frequencies())
    m = block.mask(mag)
    safe = np.where(mag == 0, 1.0, mag)
    fh = np.fft.fft2(f.samples) * m
    u1 = np.fft.ifft2(1j * xi2 / safe * fh).real
    u2 = np.fft.ifft2(-1j * xi1 / safe * fh).real
    return VectorField.from_arrays(spec, u1, u2)


def _odd_frequencies(spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Frequencies with the Nyquist entries zeroed, for odd multipliers."""
    xi1, xi2 = spec.frequencies()
    xi1 = xi1.copy()
    xi2 = xi2.copy()
    xi1[:, spec.nx // 2] = 0.0
    xi2[spec.ny // 2, :] = 0.0
    return xi1, xi2


# ---------------------------------------------------------------------------
# L1 constants of the kernels that drive the iteration
# ---------------------------------------------------------------------------

def _radial_integral(func, alpha: float, nu: float, r_max: float, n_panels: int = 400) -> float:
    """2 pi int_0^{r_max} func(r) r dr on graded Gauss panels."""
    edges = np.concatenate([[0.0], np.geomspace(1e-4, r_max, n_panels)])
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    nodes, weights = np.polynomial.legendre.leggauss(8)
    r = ((0.5 * (a + b))[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return float(2 * np.pi * np.sum(func(r) * r * w))


@lru_cache(maxsize=32)
def kernel_l1_norms(alpha: float, nu: float = 1.0) -> dict[str, float]:
    """L1 norms at unit time of grad g and of the tensor K * grad g.

    The tensor equals -J Hess(phi) with phi = Lambda^{-1} g radial and J the
    rotation by 90 degrees, so its pointwise operator norm is
    max(|phi''|, |phi'/r|). Both integrals are radial; the far tail of the
    tensor, 1/(pi r^3), is added in closed form.
    """
    scale = nu ** (1.0 / (2 * alpha))
    r_max = 60.0 * scale
    grad = _radial_integral(lambda r: np.abs(heat_kernel_radial_derivative(r, alpha, nu)),
                            alpha, nu, r_max)
    grad += 2 * np.pi * abs(float(heat_kernel_radial_derivative(r_max, alpha, nu)[0])) * r_max**2 \
        / (1 + 2 * alpha)

    def tensor_norm(r):
        d1 = -hankel_integral(r, alpha, nu, 1, 1.0) / (2 * np.pi)
        d2 = -(hankel_integral(r, alpha, nu, 0, 2.0) - hankel_integral(r, alpha, nu, 2, 2.0)) / (4 * np.pi)
        return np.maximum(np.abs(d2), np.abs(d1 / r))

    tensor = _radial_integral(tensor_norm, alpha, nu, r_max)
    tensor += 2.0 / r_max
    return {"grad": grad, "k_grad": tensor}


def kernel_constant(alpha: float, nu: float = 1.0) -> float:
    """max(||grad g(1)||_1, ||K * grad g(1)||_1)."""
    norms = kernel_l1_norms(float(alpha), float(nu))
    return max(norms["grad"], norms["k_grad"])


def k_grad_radial_profile(r, alpha: float, nu: float = 1.0) -> np.ndarray:
    """Pointwise operator norm of K * grad g(1) at radius r."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    d1 = -hankel_integral(r, alpha, nu, 1, 1.0) / (2 * np.pi)
    d2 = -(hankel_integral(r, alpha, nu, 0, 2.0) - hankel_integral(r, alpha, nu, 2, 2.0)) / (4 * np.pi)
    return np.maximum(np.abs(d2), np.abs(d1 / r))
