"""Initial data pairs (theta0, u0) for the solver and the kernel checks."""

from __future__ import annotations

import math

import numpy as np

from .grid import GridSpec, ScalarField, VectorField, read_field
from .operators import context

KINDS = ("mode", "bumps", "psi", "random")


def smooth_bump(r: np.ndarray, radius: float) -> np.ndarray:
    """C-infinity bump of height 1 supported on |x| < radius."""
    q = np.clip(np.asarray(r, dtype=float) / radius, 0.0, 1.0)
    inside = q < 1
    safe = np.where(inside, 1.0 - q * q, 1.0)
    return np.where(inside, np.exp(1.0 - 1.0 / safe), 0.0)


def gaussian_bump(spec: GridSpec, width: float = 1.0, center=None) -> ScalarField:
    cx, cy = (spec.lx / 2, spec.ly / 2) if center is None else center
    return ScalarField.from_function(
        spec, lambda x, y: np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * width**2)))


def mode_field(spec: GridSpec, k=(1, 0)) -> ScalarField:
    k1, k2 = k
    return ScalarField.from_function(
        spec, lambda x, y: np.cos(2 * np.pi * (k1 * x / spec.lx + k2 * y / spec.ly)))


def dyadic_bumps(spec: GridSpec, radius: float = 0.75, alternating: bool = False,
                 extent: float = 1.0) -> ScalarField:
    """Bumps centred at corner + (2^i, 2^j), i, j >= 1, for as many as fit.

    The pattern occupies a centred square of side extent*min(lx, ly) and
    gets sparser away from its lower-left corner; every bump lies inside that
    square. With alternating=True the signs follow (-1)^(i+j).
    """
    if not 0 < extent <= 1:
        raise ValueError("extent must lie in (0, 1]")
    side = extent * min(spec.lx, spec.ly)
    margin = radius + 2 * max(spec.hx, spec.hy)
    x0 = (spec.lx - side) / 2 + margin - 2.0
    y0 = (spec.ly - side) / 2 + margin - 2.0
    x, y = spec.coords()
    out = np.zeros(spec.shape)
    i = 1
    while 2.0**i + 2 * margin - 2.0 <= side:
        j = 1
        while 2.0**j + 2 * margin - 2.0 <= side:
            sign = (-1.0) ** (i + j) if alternating else 1.0
            out += sign * smooth_bump(np.hypot(x - x0 - 2.0**i, y - y0 - 2.0**j), radius)
            j += 1
        i += 1
    if not out.any():
        raise ValueError("domain too small for a single bump")
    return ScalarField(spec, out)


def band_limited_random(spec: GridSpec, seed: int, kmax: float = 6.0) -> ScalarField:
    """Random field with integer wavenumbers 0 < |k| <= kmax, sup-normalized to 1."""
    rng = np.random.default_rng(seed)
    k1 = np.fft.fftfreq(spec.nx, 1.0 / spec.nx)
    k2 = np.fft.fftfreq(spec.ny, 1.0 / spec.ny)
    K1, K2 = np.meshgrid(k1, k2)
    kk = np.hypot(K1, K2)
    keep = (kk > 0) & (kk <= kmax) & (np.abs(K1) < spec.nx / 2) & (np.abs(K2) < spec.ny / 2)
    coeffs = (rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)) * keep
    f = np.fft.ifft2(coeffs).real
    peak = np.max(np.abs(f))
    if peak == 0:
        raise ValueError("kmax admits no wavenumbers on this grid")
    return ScalarField(spec, f / peak)


def psi_pair(spec: GridSpec, radius: float | None = None) -> tuple[ScalarField, VectorField]:
    """u0 = grad-perp psi and theta0 = -Lambda psi for a centred compact bump psi.

    The minus sign makes u0 the Riesz velocity of theta0 under the
    multiplier -i xi_perp/|xi|.
    """
    radius = min(spec.lx, spec.ly) / 4 if radius is None else radius
    psi = ScalarField.from_function(
        spec, lambda x, y: smooth_bump(np.hypot(x - spec.lx / 2, y - spec.ly / 2), radius))
    ctx = context(1.0, 1.0, spec)
    ph = np.fft.fft2(psi.samples)
    theta = ScalarField(spec, -np.fft.ifft2(ctx.mag * ph).real)
    return theta, ctx.perp_gradient(psi)


def pv_velocity(theta: ScalarField) -> VectorField:
    """Truncated-plane Riesz velocity from the annulus sum over the whole domain."""
    from .kernels import annulus_pv_convolve
    from .operators import _lattice_ring_correction

    spec = theta.spec
    R = math.hypot(spec.lx, spec.ly)
    u = annulus_pv_convolve(theta, 0.5 * min(spec.hx, spec.hy), R)
    c = _lattice_ring_correction(spec)
    gp = context(1.0, 1.0, spec).perp_gradient(theta)
    return VectorField.from_arrays(spec, u.u1.samples + c * gp.u1.samples, u.u2.samples + c * gp.u2.samples)


def generate_data(kind: str, spec: GridSpec, seed: int = 0, **options) -> tuple[ScalarField, VectorField]:
    """(theta0, u0) satisfying the constitutive law.

    mode: cos of wavevector k (option k=(k1, k2)); random: band-limited
    field (option kmax); psi: curl form of a compact bump; bumps: dyadic
    bump lattice (options radius, alternating) with u0 from the annulus sum;
    file:PATH: theta0 read from a field file. Spectral kinds take u0 from the
    Riesz multiplier.
    """
    if kind == "mode":
        theta = mode_field(spec, options.get("k", (1, 0)))
    elif kind == "random":
        theta = band_limited_random(spec, seed, options.get("kmax", 6.0))
    elif kind == "psi":
        return psi_pair(spec, options.get("radius"))
    elif kind == "bumps":
        theta = dyadic_bumps(spec, options.get("radius", 0.75), options.get("alternating", False),
                             options.get("extent", 1.0))
        return theta, pv_velocity(theta)
    elif kind.startswith("file:"):
        theta = read_field(kind[5:])
        if theta.spec != spec:
            raise ValueError(f"field file grid {theta.spec} does not match {spec}")
    else:
        raise ValueError(f"unknown data kind {kind!r}")
    return theta, context(1.0, 1.0, spec).riesz_velocity(theta)
