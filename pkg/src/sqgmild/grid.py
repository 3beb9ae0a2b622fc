"""Periodic grids, fields, Fourier transforms, norms and field files."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"SQGF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdd")


class FieldFileError(Exception):
    """Base class for malformed field files."""


class FieldFormatError(FieldFileError):
    """Bad magic bytes or unsupported version."""


class FieldLengthError(FieldFileError):
    """Payload size does not match the header."""


class NonHermitianError(ValueError):
    """Spectral coefficients do not describe a real field."""


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or n < 8 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 8, got {n}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain lengths must be positive")

    @classmethod
    def square(cls, n: int, length: float = 2 * np.pi) -> "GridSpec":
        return cls(n, n, float(length), float(length))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (x, y), each of shape (ny, nx), starting at the origin."""
        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        return np.meshgrid(x, y)

    def centered_offsets(self) -> tuple[np.ndarray, np.ndarray]:
        """Minimum-image displacement of every grid point from the origin."""
        ix = np.fft.fftfreq(self.nx, 1.0 / self.nx)
        iy = np.fft.fftfreq(self.ny, 1.0 / self.ny)
        return np.meshgrid(ix * self.hx, iy * self.hy)

    def frequencies(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical frequencies (xi1, xi2) in full FFT ordering."""
        k1 = np.fft.fftfreq(self.nx, 1.0 / self.nx)
        k2 = np.fft.fftfreq(self.ny, 1.0 / self.ny)
        return np.meshgrid(2 * np.pi * k1 / self.lx, 2 * np.pi * k2 / self.ly)


def _as_samples(spec: GridSpec, samples) -> np.ndarray:
    arr = np.array(samples, dtype=np.float64)
    if arr.size != spec.nx * spec.ny:
        raise ValueError(f"expected {spec.nx * spec.ny} samples, got {arr.size}")
    arr = arr.reshape(spec.shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError("field samples must be finite")
    arr.setflags(write=False)
    return arr


class ScalarField:
    """Real samples on a periodic grid, shape (ny, nx), x varying fastest."""

    __slots__ = ("spec", "samples")

    def __init__(self, spec: GridSpec, samples):
        self.spec = spec
        self.samples = _as_samples(spec, samples)

    @classmethod
    def from_function(cls, spec: GridSpec, func) -> "ScalarField":
        x, y = spec.coords()
        return cls(spec, np.broadcast_to(func(x, y), spec.shape))

    @classmethod
    def zeros(cls, spec: GridSpec) -> "ScalarField":
        return cls(spec, np.zeros(spec.shape))

    def __repr__(self):
        return f"ScalarField({self.spec.nx}x{self.spec.ny}, max={np.abs(self.samples).max():.3g})"


class VectorField:
    """Pair of scalar fields sharing one grid."""

    __slots__ = ("spec", "u1", "u2")

    def __init__(self, u1: ScalarField, u2: ScalarField):
        if u1.spec != u2.spec:
            raise ValueError("vector components must share a grid")
        self.spec = u1.spec
        self.u1 = u1
        self.u2 = u2

    @classmethod
    def from_arrays(cls, spec: GridSpec, a1, a2) -> "VectorField":
        return cls(ScalarField(spec, a1), ScalarField(spec, a2))

    @classmethod
    def zeros(cls, spec: GridSpec) -> "VectorField":
        return cls(ScalarField.zeros(spec), ScalarField.zeros(spec))

    @property
    def array(self) -> np.ndarray:
        return np.stack([self.u1.samples, self.u2.samples])

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u1.samples, self.u2.samples)

    def linf(self) -> float:
        """Sup of the pointwise Euclidean length."""
        return float(self.magnitude().max())


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients c_k with f(x) = sum_k c_k exp(i xi_k . x).

    Coefficients are stored in full FFT ordering, shape (ny, nx); a constant
    field c has coefficient c at k = (0, 0).
    """

    spec: GridSpec
    coeffs: np.ndarray

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        c = self.coeffs
        flipped = np.conj(np.roll(c[::-1, ::-1], 1, axis=(0, 1)))
        scale = max(np.abs(c).max(), 1e-300)
        return bool(np.abs(c - flipped).max() <= rtol * scale)


def forward_transform(f: ScalarField) -> SpectralField:
    coeffs = np.fft.fft2(f.samples) / (f.spec.nx * f.spec.ny)
    return SpectralField(f.spec, coeffs)


def inverse_transform(F: SpectralField) -> ScalarField:
    if not F.is_hermitian():
        raise NonHermitianError("coefficients are not Hermitian-symmetric")
    vals = np.fft.ifft2(F.coeffs) * (F.spec.nx * F.spec.ny)
    return ScalarField(F.spec, vals.real)


def spectral_energy(F: SpectralField) -> float:
    """Parseval partner of the squared L2 norm: lx*ly*sum |c_k|^2."""
    return float(F.spec.lx * F.spec.ly * np.sum(np.abs(F.coeffs) ** 2))


def field_norms(f: ScalarField) -> dict[str, float]:
    a = f.samples
    area = f.spec.cell_area
    return {
        "linf": float(np.abs(a).max()),
        "l1": float(area * np.abs(a).sum()),
        "l2": float(np.sqrt(area * np.sum(a * a))),
    }


def _stencil_offsets(spec: GridSpec) -> np.ndarray:
    """Fixed half-plane stencil of integer offsets (about 64 of them).

    Axis and diagonal offsets at log-spaced lengths plus a radial fan at
    intermediate angles. The set depends only on the grid, so filtering it by
    a radius keeps the estimator monotone in that radius.
    """
    nmax = max(1, min(spec.nx, spec.ny) // 4)
    lengths = np.unique(np.round(np.geomspace(1, nmax, 10)).astype(int))
    offsets = set()
    for m in lengths:
        offsets.update({(m, 0), (0, m), (m, m), (m, -m)})
    angles = np.deg2rad([22.5, 67.5, 112.5, 157.5])
    for rad in np.geomspace(2, nmax, 6):
        for a in angles:
            d = (int(round(rad * np.cos(a))), int(round(rad * np.sin(a))))
            if d != (0, 0):
                offsets.add(d)
    # keep one representative of each +/- pair
    canon = set()
    for dx, dy in offsets:
        if dy < 0 or (dy == 0 and dx < 0):
            dx, dy = -dx, -dy
        canon.add((dx, dy))
    return np.array(sorted(canon), dtype=int)


def holder_seminorm(f: ScalarField, gamma: float, max_radius: float) -> float:
    """Largest Hölder quotient |f(x)-f(y)|/|x-y|^gamma over a fixed stencil.

    Pairs wrap around the torus.
    """
    spec = f.spec
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if max_radius > min(spec.lx, spec.ly) / 4 * (1 + 1e-12):
        raise ValueError("max_radius must not exceed min(lx, ly)/4")
    a = f.samples
    best = 0.0
    for dx, dy in _stencil_offsets(spec):
        dist = np.hypot(dx * spec.hx, dy * spec.hy)
        if dist > max_radius * (1 + 1e-12):
            continue
        diff = np.abs(np.roll(a, (-dy, -dx), axis=(0, 1)) - a).max()
        best = max(best, diff / dist**gamma)
    return float(best)


def band_limited_max(f: ScalarField, upsample: int = 4, candidates: int = 4) -> float:
    """Sup of |f| over the continuum, for f read as a trigonometric polynomial.

    Zero-padded upsampling locates candidate peaks; a few Newton steps on the
    exact trigonometric sum polish them.
    """
    spec = f.spec
    c = np.fft.fft2(f.samples) / (spec.nx * spec.ny)
    my, mx = upsample * spec.ny, upsample * spec.nx
    ky = np.fft.fftfreq(spec.ny, 1.0 / spec.ny).astype(int)
    kx = np.fft.fftfreq(spec.nx, 1.0 / spec.nx).astype(int)
    kyy, kxx = np.meshgrid(ky, kx, indexing="ij")
    # Nyquist coefficients are split evenly between +N/2 and -N/2 so the
    # padded spectrum stays Hermitian.
    ny_half = np.abs(kyy) == spec.ny // 2
    nx_half = np.abs(kxx) == spec.nx // 2
    cw = c * np.where(ny_half, 0.5, 1.0) * np.where(nx_half, 0.5, 1.0)
    padded = np.zeros((my, mx), dtype=complex)
    for flip_y in (False, True):
        for flip_x in (False, True):
            sel = np.ones_like(ny_half)
            if flip_y:
                sel &= ny_half
            if flip_x:
                sel &= nx_half
            qy = np.where(flip_y, -kyy, kyy)[sel]
            qx = np.where(flip_x, -kxx, kxx)[sel]
            np.add.at(padded, (np.mod(qy, my), np.mod(qx, mx)), cw[sel])
    fine = (np.fft.ifft2(padded) * mx * my).real
    absf = np.abs(fine)
    best = float(absf.max())

    xi1, xi2 = spec.frequencies()
    flat = np.argsort(absf, axis=None)[::-1][: candidates * 8]
    tried = []
    for idx in flat:
        iy, ix = np.unravel_index(idx, absf.shape)
        p = np.array([ix * spec.lx / mx, iy * spec.ly / my])
        if any(np.hypot(*(p - q)) < 2 * max(spec.hx, spec.hy) for q in tried):
            continue
        tried.append(p)
        if len(tried) > candidates:
            break
        for _ in range(8):
            ph = np.exp(1j * (xi1 * p[0] + xi2 * p[1])) * c
            val = ph.sum().real
            g = np.array([(1j * xi1 * ph).sum().real, (1j * xi2 * ph).sum().real])
            h = -np.array([[(xi1 * xi1 * ph).sum().real, (xi1 * xi2 * ph).sum().real],
                           [(xi1 * xi2 * ph).sum().real, (xi2 * xi2 * ph).sum().real]])
            try:
                step = np.linalg.solve(h, g)
            except np.linalg.LinAlgError:
                break
            if np.hypot(*step) > max(spec.hx, spec.hy):
                break
            p = p - step
            best = max(best, abs(val))
        val = (np.exp(1j * (xi1 * p[0] + xi2 * p[1])) * c).sum().real
        best = max(best, abs(val))
    return best


def write_field(f: ScalarField, path) -> None:
    spec = f.spec
    header = _HEADER.pack(MAGIC, VERSION, spec.nx, spec.ny, spec.lx, spec.ly)
    payload = np.ascontiguousarray(f.samples, dtype="<f8").tobytes()
    Path(path).write_bytes(header + payload)


def read_field(path) -> ScalarField:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FieldLengthError(f"{path}: file shorter than header")
    magic, version, nx, ny, lx, ly = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FieldFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FieldFormatError(f"{path}: unsupported version {version}")
    expected = nx * ny * 8
    payload = data[_HEADER.size:]
    if len(payload) != expected:
        raise FieldLengthError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    spec = GridSpec(nx, ny, lx, ly)
    return ScalarField(spec, np.frombuffer(payload, dtype="<f8").reshape(ny, nx))
