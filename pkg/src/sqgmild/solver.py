"""Mild solutions of dissipative SQG by nested Picard iteration and continuation.

On one interval the pair (theta, u) solves

    theta(t) = G(t) theta0 - int_0^t grad G(t-s) . (theta u)(s) ds
    u(t)     = G(t) u0     - int_0^t (K * grad G(t-s)) . (theta u)(s) ds

with G the fractional heat semigroup. Whole trajectories on a fixed set of
time nodes are iterated: theta is the fixed point of the first equation with
u frozen, then u is refreshed from the second.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .grid import GridSpec, ScalarField, VectorField, band_limited_max
from .operators import OperatorContext, context

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """Picard iteration did not reach tolerance; carries the difference history."""

    def __init__(self, message: str, differences: list[float], interval: int | None = None):
        super().__init__(message)
        self.differences = list(differences)
        self.interval = interval


class MaxPrincipleError(RuntimeError):
    """Grid sup of theta exceeded the sup of the initial data at a handoff."""


class TrivialDataError(ValueError):
    """Both data norms vanish, so the size condition has no finite solution."""


@dataclass(frozen=True)
class SolverConfig:
    alpha: float
    nu: float
    spec: GridSpec
    n_time_nodes: int = 16
    picard_tol: float = 1e-10
    max_picard_iters: int = 50
    kernel_constant_C: float | None = None
    safety: float = 1.0
    dealias: bool = True

    def __post_init__(self):
        if not 0.5 < self.alpha <= 1:
            raise ValueError("alpha must lie in (1/2, 1]")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.n_time_nodes < 8:
            raise ValueError("need at least 8 time nodes per interval")
        if self.picard_tol <= 0:
            raise ValueError("picard_tol must be positive")
        if self.max_picard_iters < 1:
            raise ValueError("max_picard_iters must be at least 1")
        if not self.safety > 0:
            raise ValueError("safety must be positive")
        if self.kernel_constant_C is None:
            from .kernels import kernel_constant

            object.__setattr__(self, "kernel_constant_C", kernel_constant(self.alpha, self.nu))
        if not self.kernel_constant_C > 0:
            raise ValueError("kernel_constant_C must be positive")

    @property
    def mu(self) -> float:
        return 2 * self.alpha / (2 * self.alpha - 1)

    def context(self) -> OperatorContext:
        return context(self.alpha, self.nu, self.spec)


@dataclass
class TrajectorySegment:
    t_nodes: np.ndarray
    theta_nodes: list[ScalarField]
    u_nodes: list[VectorField]
    outer_differences: list[float] = field(default_factory=list)
    inner_iterations: list[int] = field(default_factory=list)

    @property
    def start(self) -> float:
        return float(self.t_nodes[0])

    @property
    def length(self) -> float:
        return float(self.t_nodes[-1] - self.t_nodes[0])

    @property
    def ratios(self) -> list[float]:
        d = self.outer_differences
        return [d[i + 1] / d[i] for i in range(len(d) - 1) if d[i] > 0]


@dataclass
class ContinuationSchedule:
    taus: list[float] = field(default_factory=list)
    starts: list[float] = field(default_factory=list)
    theta_linf: list[float] = field(default_factory=list)
    u_linf: list[float] = field(default_factory=list)
    u_bounds: list[float] = field(default_factory=list)

    @property
    def cumulative(self) -> list[float]:
        return [s + t for s, t in zip(self.starts, self.taus)]


# ---------------------------------------------------------------------------
# Size condition and Gronwall bound
# ---------------------------------------------------------------------------

def picard_interval_length(theta0_linf: float, u0_linf: float, cfg: SolverConfig) -> float:
    """Largest tau with (2a/(2a-1)) C tau^{1-1/(2a)} (|theta0| + |u0|) <= 1/8, times safety."""
    if theta0_linf < 0 or u0_linf < 0:
        raise ValueError("norms must be non-negative")
    total = theta0_linf + u0_linf
    if total == 0:
        raise TrivialDataError("both data norms are zero")
    a = cfg.alpha
    base = (2 * a - 1) / (16 * a * cfg.kernel_constant_C * total)
    return base ** (2 * a / (2 * a - 1)) * cfg.safety


def gronwall_constants(alpha: float, C: float) -> tuple[float, float]:
    """(mu, C_alpha) with mu = 2a/(2a-1) and C_alpha = mu C (2a B(1/mu, 1))^{1/(2a-1)}."""
    mu = 2 * alpha / (2 * alpha - 1)
    b0 = special.beta(1 / mu, 1.0)
    return mu, mu * C * (2 * alpha * b0) ** (1 / (2 * alpha - 1))


def gronwall_u_bound(u0_linf: float, theta_sup: float, alpha: float, C: float, t: float) -> float:
    """mu |u0| exp(C_alpha |theta|^mu t)."""
    mu, c_alpha = gronwall_constants(alpha, C)
    if u0_linf == 0:
        return 0.0
    try:
        growth = math.exp(c_alpha * theta_sup**mu * t)
    except OverflowError:
        return math.inf
    return mu * u0_linf * growth


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def time_nodes(start: float, tau: float, n: int) -> np.ndarray:
    """n nodes on [start, start + tau], clustered toward the right end."""
    k = np.arange(n)
    nodes = start + tau * np.sin(0.5 * np.pi * k / (n - 1))
    nodes[-1] = start + tau
    return nodes


def _weight_moments(a: float, b: float, t: float, beta: float) -> tuple[float, float]:
    """int_a^b (t-s)^{-beta} ds and int_a^b s (t-s)^{-beta} ds."""
    ga, gb = t - a, t - b
    w0 = (ga ** (1 - beta) - gb ** (1 - beta)) / (1 - beta)
    w1 = t * w0 - (ga ** (2 - beta) - gb ** (2 - beta)) / (2 - beta)
    return w0, w1


def _lincomb(terms):
    out = None
    for c, x in terms:
        if isinstance(x, ScalarField):
            x = x.samples
        elif isinstance(x, VectorField):
            x = x.array
        out = c * x if out is None else out + c * x
    return out


def duhamel_apply(kernel_op, samples, t_nodes, t_index: int, alpha: float):
    """int_{t_0}^{t} kernel_op(p(s), t - s) ds at t = t_nodes[t_index].

    p is linear between nodes. The weight w(g) = g^{-1/(2 alpha)} is
    integrated exactly against the interpolant on each panel, and the rest of
    the kernel, kernel_op / w, is frozen at the weight centroid of the panel.
    Returns an array shaped like the samples.
    """
    if t_index < 1:
        raise ValueError("t_index must be at least 1")
    beta = 1.0 / (2 * alpha)
    t_nodes = np.asarray(t_nodes, dtype=float)
    t = t_nodes[t_index] - t_nodes[0]
    local = t_nodes - t_nodes[0]
    total = None
    for k in range(t_index):
        a, b = local[k], local[k + 1]
        w0, w1 = _weight_moments(a, b, t, beta)
        h = b - a
        panel = _lincomb([((b * w0 - w1) / h, samples[k]), ((w1 - a * w0) / h, samples[k + 1])])
        gap = t - w1 / w0
        value = kernel_op(panel, gap)
        value = _lincomb([(gap**beta, value)])
        total = value if total is None else total + value
    return total


def _phi_weights(z: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact weights for int_0^dt e^{-lam (dt - s)} (linear data) ds, z = lam dt.

    Returns (w_a, w_b) multiplying the left and right endpoint values.
    """
    z = np.asarray(z, dtype=float)
    small = z < 1e-2
    zs = np.where(small, 1.0, z)
    em = np.exp(-zs)
    phi1 = np.where(small, 0.0, -np.expm1(-zs) / zs)
    wa = np.where(small, 0.0, (1 - (1 + zs) * em) / zs**2)
    if np.any(small):
        zz = z[small]
        # (1 - e^{-z})/z and (1 - (1+z) e^{-z})/z^2 as alternating series
        s1 = np.zeros_like(zz)
        s2 = np.zeros_like(zz)
        term = np.ones_like(zz)
        for n in range(12):
            s1 += term / math.factorial(n + 1)
            s2 += (n + 1) * term / math.factorial(n + 2)
            term = term * (-zz)
        phi1[small] = s1
        wa[small] = s2
    return dt * wa, dt * (phi1 - wa)


class _IntervalKernel:
    """Per-interval spectral tables for the exact exponential recursion."""

    def __init__(self, ctx: OperatorContext, nodes: np.ndarray, dealias: bool):
        self.ctx = ctx
        self.nodes = nodes
        rel = nodes - nodes[0]
        self.decay = [np.exp(-ctx.rate * s) for s in rel]
        self.steps = []
        for i in range(len(nodes) - 1):
            dt = nodes[i + 1] - nodes[i]
            wa, wb = _phi_weights(ctx.rate * dt, dt)
            self.steps.append((np.exp(-ctx.rate * dt), wa, wb))
        spec = ctx.spec
        if dealias:
            k1 = np.abs(np.fft.fftfreq(spec.nx, 1.0 / spec.nx))
            k2 = np.abs(np.fft.fftfreq(spec.ny, 1.0 / spec.ny))
            K1, K2 = np.meshgrid(k1, k2)
            self.mask = ((K1 < spec.nx / 3) & (K2 < spec.ny / 3)).astype(float)
        else:
            self.mask = None

    def flux_hat(self, theta: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
        """Spectrum of div(theta u), dealiased when requested."""
        p1 = np.fft.fft2(theta * u1)
        p2 = np.fft.fft2(theta * u2)
        if self.mask is not None:
            p1 *= self.mask
            p2 *= self.mask
        return self.ctx.ik1 * p1 + self.ctx.ik2 * p2

    def duhamel(self, flux: list[np.ndarray]) -> list[np.ndarray]:
        """D_i = int_{t_0}^{t_i} e^{-lam (t_i - s)} flux(s) ds, flux linear between nodes."""
        out = [np.zeros_like(flux[0])]
        for i, (e, wa, wb) in enumerate(self.steps):
            out.append(e * out[-1] + wa * flux[i] + wb * flux[i + 1])
        return out


def _ifft(a):
    return np.fft.ifft2(a).real


def _sup(arrs) -> float:
    return max(float(np.max(np.abs(a))) for a in arrs)


def _vec_sup(pairs) -> float:
    return max(float(np.max(np.hypot(a, b))) for a, b in pairs)


# ---------------------------------------------------------------------------
# One interval
# ---------------------------------------------------------------------------

def _check_data(theta0: ScalarField, u0: VectorField, cfg: SolverConfig):
    if theta0.spec != cfg.spec or u0.spec != cfg.spec:
        raise ValueError("data grid does not match the solver grid")


def solve_interval(theta0: ScalarField, u0: VectorField, tau: float, cfg: SolverConfig,
                   start: float = 0.0) -> TrajectorySegment:
    """Nested Picard iteration for the mild equations on [start, start + tau]."""
    _check_data(theta0, u0, cfg)
    if not tau > 0:
        raise ValueError("tau must be positive")
    th_norm = float(np.max(np.abs(theta0.samples)))
    u_norm = u0.linf()
    if th_norm > 0 and u_norm > 0:
        limit = picard_interval_length(th_norm, u_norm, cfg) / cfg.safety
        if tau > limit * (1 + 1e-12):
            warnings.warn(f"tau={tau:.3g} exceeds the size condition {limit:.3g}; contraction is not guaranteed",
                          RuntimeWarning, stacklevel=2)
    ctx = cfg.context()
    nodes = time_nodes(start, tau, cfg.n_time_nodes)
    ker = _IntervalKernel(ctx, nodes, cfg.dealias)
    n = len(nodes)

    th0_hat = np.fft.fft2(theta0.samples)
    u1_hat = np.fft.fft2(u0.u1.samples)
    u2_hat = np.fft.fft2(u0.u2.samples)
    theta_free = [_ifft(e * th0_hat) for e in ker.decay]
    u_free = [(_ifft(e * u1_hat), _ifft(e * u2_hat)) for e in ker.decay]

    def pack(theta, u, diffs, inner):
        return TrajectorySegment(
            nodes,
            [ScalarField(cfg.spec, a) for a in theta],
            [VectorField.from_arrays(cfg.spec, a, b) for a, b in u],
            diffs,
            inner,
        )

    # either factor of the flux vanishing identically gives a closed solution
    if th_norm == 0 or u_norm == 0:
        return pack(theta_free, u_free, [0.0], [1])

    scale = th_norm + u_norm
    inner_tol = cfg.picard_tol / 10 * scale
    theta = theta_free
    u = u_free
    diffs: list[float] = []
    inner_counts: list[int] = []
    for outer in range(cfg.max_picard_iters):
        # theta^{n+1}: fixed point of theta -> G theta0 - D[theta u^n]
        th = theta
        for k in range(cfg.max_picard_iters):
            flux = [ker.flux_hat(th[i], u[i][0], u[i][1]) for i in range(n)]
            D = ker.duhamel(flux)
            new = [theta_free[i] - _ifft(D[i]) for i in range(n)]
            step = _sup([a - b for a, b in zip(new, th)])
            th = new
            if step <= inner_tol:
                break
        else:
            raise ConvergenceError(f"inner iteration stalled at {step:.3e}", diffs)
        inner_counts.append(k + 1)
        # u^{n+1} from the flux of theta^{n+1} u^n
        flux = [ker.flux_hat(th[i], u[i][0], u[i][1]) for i in range(n)]
        D = ker.duhamel(flux)
        new_u = [(u_free[i][0] - _ifft(ctx.r1 * D[i]), u_free[i][1] - _ifft(ctx.r2 * D[i])) for i in range(n)]
        diff = _sup([a - b for a, b in zip(th, theta)]) + _vec_sup(
            [(a[0] - b[0], a[1] - b[1]) for a, b in zip(new_u, u)])
        diffs.append(diff / scale)
        theta, u = th, new_u
        log.debug("outer %d: difference %.3e (%d inner)", outer + 1, diff / scale, k + 1)
        if diff <= cfg.picard_tol * scale:
            return pack(theta, u, diffs, inner_counts)
    raise ConvergenceError(f"no convergence in {cfg.max_picard_iters} outer iterations", diffs)


# ---------------------------------------------------------------------------
# Continuation
# ---------------------------------------------------------------------------

def sup_norm(f: ScalarField) -> float:
    """Sup of |f| over the continuum for a band-limited field."""
    return band_limited_max(f)


def plan_schedule(theta_ref: float, u_ref: float, T: float, cfg: SolverConfig,
                  max_intervals: int = 10_000) -> list[float]:
    """Interval lengths the continuation will use to cover [0, T].

    tau_n solves the size condition with |theta| at theta_ref and |u| at the
    Gronwall bound evaluated at the start S_{n-1}; the last interval is cut
    at T.
    """
    taus: list[float] = []
    S = 0.0
    while S < T * (1 - 1e-12):
        if len(taus) >= max_intervals:
            raise ConvergenceError(f"continuation needed more than {max_intervals} intervals", [], len(taus))
        bound = gronwall_u_bound(u_ref, theta_ref, cfg.alpha, cfg.kernel_constant_C, S)
        tau = picard_interval_length(theta_ref, bound, cfg)
        if S + tau >= T:
            taus.append(T - S)
            break
        taus.append(tau)
        S += tau
    return taus


def solve_global(theta0: ScalarField, u0: VectorField, T: float, cfg: SolverConfig,
                 max_intervals: int = 10_000) -> tuple[ContinuationSchedule, list[TrajectorySegment]]:
    """Chain interval solves until [0, T] is covered.

    Each tau_n comes from the size condition with |theta(S)| replaced by the
    sup of the initial data and |u(S)| by the Gronwall bound at S.
    """
    _check_data(theta0, u0, cfg)
    if not T > 0:
        raise ValueError("T must be positive")
    theta_ref = sup_norm(theta0)
    u_ref = u0.linf()
    schedule = ContinuationSchedule()
    segments: list[TrajectorySegment] = []
    if theta_ref + u_ref == 0:
        seg = solve_interval(theta0, u0, T, cfg)
        schedule.taus.append(T)
        schedule.starts.append(0.0)
        schedule.theta_linf.append(0.0)
        schedule.u_linf.append(0.0)
        schedule.u_bounds.append(0.0)
        return schedule, [seg]

    C = cfg.kernel_constant_C
    S = 0.0
    theta, u = theta0, u0
    n = 0
    while S < T * (1 - 1e-12):
        if n >= max_intervals:
            raise ConvergenceError(f"continuation needed more than {max_intervals} intervals", [], n)
        bound = gronwall_u_bound(u_ref, theta_ref, cfg.alpha, C, S)
        tau = picard_interval_length(theta_ref, bound, cfg)
        last = S + tau >= T
        if last:
            tau = T - S
        try:
            seg = solve_interval(theta, u, tau, cfg, start=S)
        except ConvergenceError as exc:
            exc.interval = n
            raise
        schedule.taus.append(tau)
        schedule.starts.append(S)
        schedule.theta_linf.append(float(np.max(np.abs(theta.samples))))
        schedule.u_linf.append(u.linf())
        schedule.u_bounds.append(bound)
        segments.append(seg)
        theta, u = seg.theta_nodes[-1], seg.u_nodes[-1]
        grid_max = float(np.max(np.abs(theta.samples)))
        if grid_max > (1 + 1e-6) * theta_ref:
            raise MaxPrincipleError(
                f"interval {n}: |theta| = {grid_max:.12g} exceeds initial sup {theta_ref:.12g}")
        S = S + tau if not last else T
        n += 1
    return schedule, segments


# ---------------------------------------------------------------------------
# First derivatives
# ---------------------------------------------------------------------------

@dataclass
class DerivativeTrajectory:
    axis: int
    dtheta_nodes: list[ScalarField]
    du_nodes: list[VectorField]
    outer_differences: list[float]


def derivative_propagation(segment: TrajectorySegment, cfg: SolverConfig) -> list[DerivativeTrajectory]:
    """Iterate the linearized mild equations for D theta, D u with D = d1, d2.

    With theta, u frozen from the segment:
        D theta^{n+1} = G D theta0 - Duhamel[theta D u^n + D theta^{n+1} u]
        D u^{n+1}     = G D u0     - K Duhamel[theta D u^n + D theta^{n+1} u]
    Initial derivatives are taken spectrally from node 0.
    """
    ctx = cfg.context()
    nodes = segment.t_nodes
    n = len(nodes)
    ker = _IntervalKernel(ctx, nodes, cfg.dealias)
    th = [f.samples for f in segment.theta_nodes]
    uu = [(v.u1.samples, v.u2.samples) for v in segment.u_nodes]
    out = []
    for axis, ik in ((0, ctx.ik1), (1, ctx.ik2)):
        d_th0 = ik * np.fft.fft2(th[0])
        d_u0 = (ik * np.fft.fft2(uu[0][0]), ik * np.fft.fft2(uu[0][1]))
        th_free = [_ifft(e * d_th0) for e in ker.decay]
        u_free = [(_ifft(e * d_u0[0]), _ifft(e * d_u0[1])) for e in ker.decay]
        scale = max(_sup(th_free[:1]), _vec_sup(u_free[:1]), 1e-300)
        dth, du = th_free, u_free
        diffs: list[float] = []
        for outer in range(cfg.max_picard_iters):
            cur = dth
            for _ in range(cfg.max_picard_iters):
                flux = [ker.flux_hat(th[i], du[i][0], du[i][1]) + ker.flux_hat(cur[i], uu[i][0], uu[i][1])
                        for i in range(n)]
                D = ker.duhamel(flux)
                new = [th_free[i] - _ifft(D[i]) for i in range(n)]
                step = _sup([a - b for a, b in zip(new, cur)])
                cur = new
                if step <= cfg.picard_tol / 10 * scale:
                    break
            else:
                raise ConvergenceError("derivative inner iteration stalled", diffs)
            flux = [ker.flux_hat(th[i], du[i][0], du[i][1]) + ker.flux_hat(cur[i], uu[i][0], uu[i][1])
                    for i in range(n)]
            D = ker.duhamel(flux)
            new_u = [(u_free[i][0] - _ifft(ctx.r1 * D[i]), u_free[i][1] - _ifft(ctx.r2 * D[i]))
                     for i in range(n)]
            diff = _sup([a - b for a, b in zip(cur, dth)]) + _vec_sup(
                [(a[0] - b[0], a[1] - b[1]) for a, b in zip(new_u, du)])
            diffs.append(diff / scale)
            dth, du = cur, new_u
            if diff <= cfg.picard_tol * scale:
                break
        else:
            raise ConvergenceError("derivative iteration did not converge", diffs)
        out.append(DerivativeTrajectory(
            axis,
            [ScalarField(cfg.spec, a) for a in dth],
            [VectorField.from_arrays(cfg.spec, a, b) for a, b in du],
            diffs,
        ))
    return out
