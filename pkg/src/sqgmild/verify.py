"""Diagnostic checks, one per measurable property, collected as report rows."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, ScalarField, VectorField, holder_seminorm

MODES = ("abs", "rel", "upper", "lower")


@dataclass(frozen=True)
class DiagnosticRow:
    """One measured quantity with its pass rule.

    abs: |m - t| <= tol; rel: |m - t| <= tol |t|; upper: m <= t + tol;
    lower: m >= t - tol. Rows with gating=False are reported but never fail
    a suite.
    """

    check: str
    measured: float
    target: float
    tolerance: float
    mode: str
    metadata: dict = field(default_factory=dict)
    gating: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown tolerance mode {self.mode!r}")

    @property
    def passed(self) -> bool:
        m, t, tol = self.measured, self.target, self.tolerance
        if not math.isfinite(m):
            return False
        if self.mode == "abs":
            return abs(m - t) <= tol
        if self.mode == "rel":
            return abs(m - t) <= tol * abs(t)
        if self.mode == "upper":
            return m <= t + tol
        return m >= t - tol


@dataclass
class DiagnosticsReport:
    rows: list[DiagnosticRow] = field(default_factory=list)

    def add(self, row: DiagnosticRow) -> DiagnosticRow:
        self.rows.append(row)
        return row

    def extend(self, rows) -> None:
        self.rows.extend(rows)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows if r.gating)

    def failures(self) -> list[DiagnosticRow]:
        return [r for r in self.rows if r.gating and not r.passed]

    def write_csv(self, path, manifest_hash: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if manifest_hash:
                fh.write(f"# manifest={manifest_hash}\n")
            w = csv.writer(fh)
            w.writerow(["check", "measured", "target", "tolerance", "mode", "gating", "pass", "metadata"])
            for r in self.rows:
                meta = ";".join(f"{k}={_fmt(v)}" for k, v in sorted(r.metadata.items()))
                w.writerow([r.check, _fmt(r.measured), _fmt(r.target), _fmt(r.tolerance), r.mode,
                            int(r.gating), int(r.passed), meta])


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _slope(ts, values) -> float:
    return float(np.polyfit(np.log(ts), np.log(values), 1)[0])


DECAY_TIMES = (0.25, 0.5, 1.0, 2.0, 4.0)


# ---------------------------------------------------------------------------
# Kernel checks
# ---------------------------------------------------------------------------

def check_kernel_closed_forms(r_max: float = 8.0, n: int = 81) -> list[DiagnosticRow]:
    """Profiles at alpha = 1 and 1/2 against the Gaussian and Poisson kernels."""
    import time

    from .kernels import heat_kernel_profile

    r = np.linspace(0.0, r_max, n)
    exact = {
        1.0: np.exp(-r * r / 4) / (4 * np.pi),
        0.5: 1.0 / (2 * np.pi * (1 + r * r) ** 1.5),
    }
    rows = []
    for alpha, ref in exact.items():
        t0 = time.perf_counter()
        prof = heat_kernel_profile(alpha, 1.0)
        elapsed = time.perf_counter() - t0
        err = float(np.max(np.abs(prof(r) - ref) / ref))
        rows.append(DiagnosticRow(f"closed_form_alpha={alpha}", err, 0.0, 1e-6, "upper",
                                  {"seconds": round(elapsed, 3)}))
        rows.append(DiagnosticRow(f"profile_runtime_alpha={alpha}", elapsed, 10.0, 0.0, "upper"))
    return rows


def check_dilation(alpha: float, t: float = 4.0, nu: float = 1.0) -> DiagnosticRow:
    """Direct inversion at time t against the dilated unit-time profile."""
    from .kernels import heat_kernel_at, heat_kernel_direct, heat_kernel_profile

    prof = heat_kernel_profile(alpha, nu)
    r = np.linspace(0.0, 8.0, 33)
    direct = heat_kernel_direct(r, alpha, nu, t)
    dilated = heat_kernel_at(prof, t, r)
    err = float(np.max(np.abs(direct - dilated) / np.abs(direct)))
    return DiagnosticRow(f"dilation_alpha={alpha}", err, 0.0, 1e-6, "upper", {"t": t})


def check_decay_rates(alpha: float, nu: float = 1.0, spec: GridSpec | None = None,
                      times=DECAY_TIMES) -> list[DiagnosticRow]:
    """Log-log slopes of the kernel L1 norms over times."""
    from .operators import OperatorContext, kernel_l1_measurements

    spec = GridSpec.square(256, 32.0) if spec is None else spec
    ctx = OperatorContext(alpha, nu, spec)
    meas = [kernel_l1_measurements(ctx, t) for t in times]
    base = -1.0 / (2 * alpha)
    targets = {
        "grad": (base, 0.05),
        "k_grad": (base, 0.05),
        "lambda": (base, 0.05),
        "lambda_grad": (base - 1.0, 0.1),
    }
    rows = []
    for key, (target, tol) in targets.items():
        slope = _slope(times, [m[key] for m in meas])
        rows.append(DiagnosticRow(f"decay_{key}_alpha={alpha}", slope, target, tol, "abs",
                                  {"n": spec.nx, "domain": spec.lx}))
    return rows


def check_lambda_equivalence(alpha: float, n: int = 64, seed: int = 0) -> DiagnosticRow:
    """Spectral against singular-integral Lambda^{2 alpha} on a band-limited field."""
    from .data import band_limited_random
    from .operators import fractional_laplacian_integral, fractional_laplacian_spectral

    spec = GridSpec.square(n)
    f = band_limited_random(spec, seed, kmax=4.0)
    a = fractional_laplacian_spectral(f, alpha).samples
    b = fractional_laplacian_integral(f, alpha).samples
    err = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))
    return DiagnosticRow(f"lambda_equivalence_alpha={alpha}", err, 0.0, 1e-3, "upper", {"n": n})


def check_uniform_annuli(f: ScalarField, name: str = "annuli", n_radii: int = 5) -> list[DiagnosticRow]:
    """Sup of the annulus sums over a log grid of (r, R) and their Cauchy tails.

    Rows: growth of the sup when the largest outer radii are added (small
    when the family is bounded), and the largest ratio of consecutive tail
    increments (at most one when the tails stabilize monotonically).
    """
    from .kernels import annulus_pv_convolve

    spec = f.spec
    h = min(spec.hx, spec.hy)
    R_max = min(spec.lx, spec.ly) / 2
    rs = 0.5 * h * 2.0 ** np.arange(n_radii)
    Rs = np.geomspace(R_max / 16, R_max, n_radii)
    table = np.full((len(rs), len(Rs)), np.nan)
    fields = {}
    for i, r in enumerate(rs):
        for j, R in enumerate(Rs):
            if r < R:
                v = annulus_pv_convolve(f, r, R)
                table[i, j] = v.linf()
                if i == 0:
                    fields[j] = v
    sup = float(np.nanmax(table))
    sup_half = float(np.nanmax(table[:, : len(Rs) - 1]))
    tails = [float(np.max(np.hypot(fields[j + 1].u1.samples - fields[j].u1.samples,
                                   fields[j + 1].u2.samples - fields[j].u2.samples)))
             for j in range(len(Rs) - 1)]
    tail_ratio = max(tails[k + 1] / tails[k] for k in range(len(tails) - 1) if tails[k] > 0) \
        if any(tails) else 0.0
    growth = (sup - sup_half) / sup if sup > 0 else 0.0
    meta = {"sup": sup, "f_linf": float(np.max(np.abs(f.samples))), "last_tail": tails[-1]}
    return [
        DiagnosticRow(f"{name}_sup_growth", growth, 0.0, 0.05, "upper", meta),
        DiagnosticRow(f"{name}_tail_ratio", tail_ratio, 1.0, 0.0, "upper", meta),
    ]


def check_commutation(f: ScalarField, alpha: float, t: float = 1.0, nu: float = 1.0,
                      tolerance: float = 5e-3) -> DiagnosticRow:
    """sup |g(t) * (K_A * f) - K_A * (g(t) * f)| relative to sup |f|."""
    from .operators import commutation_gap

    fmax = float(np.max(np.abs(f.samples)))
    gap = commutation_gap(f, alpha, nu, t) if fmax > 0 else 0.0
    rel = gap / fmax if fmax > 0 else 0.0
    return DiagnosticRow(f"commutation_alpha={alpha}", rel, 0.0, tolerance, "upper",
                         {"n": f.spec.nx, "domain": f.spec.lx, "t": t})


def check_domain_doubling(sizes=((64, 20.0), (128, 40.0), (256, 80.0)), alpha: float = 0.75) -> list[DiagnosticRow]:
    """PV-identity and commutation gaps for a centred bump as the box doubles at fixed spacing."""
    from .data import gaussian_bump
    from .operators import commutation_gap, pv_gradient_identity_check

    pv, comm = [], []
    for n, L in sizes:
        spec = GridSpec.square(n, L)
        f = gaussian_bump(spec)
        pv.append(pv_gradient_identity_check(f).measured)
        comm.append(commutation_gap(f, alpha, 1.0, 1.0) / float(np.max(f.samples)))
    rows = []
    for name, seq in (("pv_identity", pv), ("commutation", comm)):
        worst = max(seq[k + 1] / seq[k] for k in range(len(seq) - 1))
        meta = {f"L={L:g}": v for (_, L), v in zip(sizes, seq)}
        rows.append(DiagnosticRow(f"{name}_domain_doubling", worst, 1.0, 0.0, "upper", meta))
    return rows


# ---------------------------------------------------------------------------
# Solution checks
# ---------------------------------------------------------------------------

def _nodes(segments):
    for seg in segments:
        for t, th, u in zip(seg.t_nodes, seg.theta_nodes, seg.u_nodes):
            yield float(t), th, u


def check_solution_suite(segments, cfg, theta0: ScalarField, u0: VectorField, label: str = "") -> list[DiagnosticRow]:
    """Pointwise-in-time properties of a converged run."""
    from .kernels import lp_project, lp_riesz_block
    from .solver import gronwall_u_bound, sup_norm

    ctx = cfg.context()
    spec = cfg.spec
    tag = f"_{label}" if label else ""
    theta_ref = sup_norm(theta0)
    u_ref = u0.linf()
    mean0 = float(theta0.samples.mean())
    law0 = ctx.riesz_velocity(theta0)
    law_holds = np.max(np.hypot(u0.u1.samples - law0.u1.samples, u0.u2.samples - law0.u2.samples)) <= \
        1e-12 * max(u_ref, 1e-300)
    kres = (2 * np.pi / min(spec.lx, spec.ly)) * (min(spec.nx, spec.ny) // 2)

    mp = vb = drift = lp = div = mean = 0.0
    l2_prev = None
    l2_rise = 0.0
    empty = set()
    for t, th, u in _nodes(segments):
        mp = max(mp, float(np.max(np.abs(th.samples))) / theta_ref if theta_ref > 0 else 0.0)
        bound = gronwall_u_bound(u_ref, theta_ref, cfg.alpha, cfg.kernel_constant_C, t)
        ul = u.linf()
        vb = max(vb, ul / bound if bound > 0 else (0.0 if ul == 0 else math.inf))
        if ul > 0:
            ref = ctx.riesz_velocity(th)
            drift = max(drift, float(np.max(np.hypot(u.u1.samples - ref.u1.samples,
                                                       u.u2.samples - ref.u2.samples))) / ul)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                for j in (-1, 0, 1, 2):
                    a1 = lp_project(u.u1, j).samples
                    a2 = lp_project(u.u2, j).samples
                    b = lp_riesz_block(th, j)
                    lp = max(lp, float(np.max(np.hypot(a1 - b.u1.samples, a2 - b.u2.samples))) / ul)
                    if caught:
                        empty.add(j)
                        caught.clear()
            div = max(div, float(np.max(np.abs(ctx.divergence(u).samples))) / (ul * kres))
        mean = max(mean, abs(float(th.samples.mean()) - mean0) / max(theta_ref, 1e-300))
        l2 = float(np.sqrt(np.sum(th.samples**2) * spec.cell_area))
        if l2_prev is not None and l2_prev > 0:
            l2_rise = max(l2_rise, (l2 - l2_prev) / l2_prev)
        l2_prev = l2
    meta = {"alpha": cfg.alpha, "n": spec.nx, "intervals": len(segments)}
    rows = [
        DiagnosticRow(f"max_principle{tag}", mp, 1.0, 1e-6, "upper", meta),
        DiagnosticRow(f"velocity_bound{tag}", vb, 1.0, 0.0, "upper", meta),
        DiagnosticRow(f"mean_conservation{tag}", mean, 0.0, 1e-10, "upper", meta),
        DiagnosticRow(f"l2_monotone{tag}", l2_rise, 0.0, 1e-8, "upper", meta),
        DiagnosticRow(f"divergence{tag}", div, 0.0, 1e-10, "upper", meta),
    ]
    if law_holds:
        lp_meta = dict(meta, empty_shells=",".join(str(j) for j in sorted(empty)) or "none")
        rows.append(DiagnosticRow(f"constitutive_drift{tag}", drift, 0.0, 1e-3, "upper", meta))
        rows.append(DiagnosticRow(f"lp_constitutive{tag}", lp, 0.0, 1e-3, "upper", lp_meta))
    return rows


def max_principle_negative_control(segments, theta0: ScalarField, excess: float = 1e-5) -> DiagnosticRow:
    """The max-principle gate must fire on a trajectory pushed just past it.

    Every node is rescaled so the largest grid sup lands at (1 + excess)
    times the initial sup; the row passes when the gate flags that run.
    """
    from .solver import sup_norm

    ref = sup_norm(theta0)
    peak = max(float(np.max(np.abs(th.samples))) for seg in segments for th in seg.theta_nodes[1:])
    factor = (1 + excess) * ref / peak
    inflated = [
        type(seg)(seg.t_nodes, [ScalarField(th.spec, factor * th.samples) for th in seg.theta_nodes], seg.u_nodes)
        for seg in segments
    ]
    worst = max(float(np.max(np.abs(th.samples))) for seg in inflated for th in seg.theta_nodes[1:])
    gate = DiagnosticRow("max_principle", worst / ref, 1.0, 1e-6, "upper")
    return DiagnosticRow("max_principle_negative_control", 0.0 if gate.passed else 1.0, 1.0, 0.0, "lower",
                         {"excess": excess, "measured": worst / ref})


def _padded_product(a_hat: np.ndarray, b_hat: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Spectrum of the exact product of two trigonometric polynomials, truncated to the grid."""
    ny, nx = spec.shape
    my, mx = 3 * ny // 2, 3 * nx // 2
    ky = np.fft.fftfreq(ny, 1.0 / ny).astype(int)
    kx = np.fft.fftfreq(nx, 1.0 / nx).astype(int)
    keep_y = np.abs(ky) < ny // 2
    keep_x = np.abs(kx) < nx // 2
    rows = ky[keep_y] % my
    cols = kx[keep_x] % mx

    def up(h):
        out = np.zeros((my, mx), dtype=complex)
        out[np.ix_(rows, cols)] = h[np.ix_(keep_y, keep_x)]
        return np.fft.ifft2(out) * (mx * my) / (nx * ny)

    prod = np.fft.fft2((up(a_hat) * up(b_hat)).real) * (nx * ny) / (mx * my)
    return prod[np.ix_(ky % my, kx % mx)]


def pde_residual(segment, cfg) -> float:
    """Sup over interior nodes of |d_t theta + P(u . grad theta) + nu Lambda^{2a} theta|.

    d_t is the three-point centred difference on the nonuniform nodes, the
    product is formed without aliasing and P keeps |k_i| < n_i/3.
    """
    ctx = cfg.context()
    spec = cfg.spec
    k1 = np.abs(np.fft.fftfreq(spec.nx, 1.0 / spec.nx))
    k2 = np.abs(np.fft.fftfreq(spec.ny, 1.0 / spec.ny))
    K1, K2 = np.meshgrid(k1, k2)
    mask = (K1 < spec.nx / 3) & (K2 < spec.ny / 3)
    t = segment.t_nodes
    th = [np.fft.fft2(f.samples) for f in segment.theta_nodes]
    worst = 0.0
    for i in range(1, len(t) - 1):
        h1, h2 = t[i] - t[i - 1], t[i + 1] - t[i]
        dt = (-h2 / (h1 * (h1 + h2))) * th[i - 1] + ((h2 - h1) / (h1 * h2)) * th[i] \
            + (h1 / (h2 * (h1 + h2))) * th[i + 1]
        u = segment.u_nodes[i]
        adv = _padded_product(np.fft.fft2(u.u1.samples), ctx.ik1 * th[i], spec) \
            + _padded_product(np.fft.fft2(u.u2.samples), ctx.ik2 * th[i], spec)
        r = dt + mask * adv + ctx.rate * th[i]
        worst = max(worst, float(np.max(np.abs(np.fft.ifft2(r).real))))
    return worst


def residual_interval(theta0: ScalarField, cfg) -> float:
    """1/lambda_max for the largest rate present in theta0."""
    ctx = cfg.context()
    present = np.abs(np.fft.fft2(theta0.samples)) > 1e-12 * max(np.abs(theta0.samples).max(), 1e-300) \
        * theta0.spec.nx * theta0.spec.ny
    top = float(np.max(np.where(present, ctx.rate, 0.0)))
    return 1.0 / top if top > 0 else 1.0


def check_residual(theta0: ScalarField, u0: VectorField, cfg, nodes: int = 16, tau: float | None = None,
                   name: str = "residual_convergence", negative: bool = False) -> DiagnosticRow:
    """Residual ratio when the node count doubles on one interval.

    The interval defaults to 1/lambda_max of the data, long enough that time
    truncation, not rounding, dominates the residual. With negative=True the
    row instead passes when the ratio stays below the gate.
    """
    from dataclasses import replace

    from .solver import solve_interval

    tau = residual_interval(theta0, cfg) if tau is None else tau
    res = []
    for n in (nodes, 2 * nodes):
        c = replace(cfg, n_time_nodes=n, max_picard_iters=max(cfg.max_picard_iters, 200))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res.append(pde_residual(solve_interval(theta0, u0, tau, c), c))
    ratio = res[0] / res[1] if res[1] > 0 else math.inf
    meta = {"tau": tau, "coarse": res[0], "fine": res[1], "dealias": cfg.dealias, "alpha": cfg.alpha}
    if negative:
        return DiagnosticRow(name, ratio, 3.0, 0.0, "upper", meta)
    return DiagnosticRow(name, ratio, 3.0, 0.0, "lower", meta)


def check_contraction(theta0: ScalarField, u0: VectorField, cfg, tau_scale: float = 1.0,
                      label: str = "") -> list[DiagnosticRow]:
    """Outer-difference ratios of one interval solve at tau_scale times the size condition."""
    from .solver import picard_interval_length, solve_interval

    tag = f"_{label}" if label else ""
    th, ul = float(np.max(np.abs(theta0.samples))), u0.linf()
    if th + ul == 0:
        return [DiagnosticRow(f"contraction_ratio{tag}", 0.0, 0.5, 0.0, "upper", {"iterations": 0})]
    tau = picard_interval_length(th, ul, cfg) * tau_scale
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        seg = solve_interval(theta0, u0, tau, cfg)
    ratios = seg.ratios
    worst = max(ratios) if ratios else 0.0
    meta = {"tau": tau, "iterations": len(seg.outer_differences),
            "differences": " ".join(f"{d:.3e}" for d in seg.outer_differences)}
    gating = tau_scale <= 1.0
    rows = [DiagnosticRow(f"contraction_ratio{tag}", worst, 0.5, 0.0, "upper", meta, gating)]
    if gating:
        rows.append(DiagnosticRow(f"contraction_iterations{tag}", float(len(seg.outer_differences)),
                                  20.0, 0.0, "upper", meta))
    return rows


def check_stability(theta0: ScalarField, cfg, delta: float = 1e-6, seed: int = 1) -> DiagnosticRow:
    """Lipschitz constant of the one-interval solution map under the size condition."""
    from .data import band_limited_random
    from .solver import picard_interval_length, solve_interval

    ctx = cfg.context()
    u0 = ctx.riesz_velocity(theta0)
    bump = band_limited_random(cfg.spec, seed, kmax=4.0)
    th1 = ScalarField(cfg.spec, theta0.samples + delta * bump.samples)
    u1 = ctx.riesz_velocity(th1)
    th_max = max(float(np.max(np.abs(theta0.samples))), float(np.max(np.abs(th1.samples))))
    tau = picard_interval_length(th_max, max(u0.linf(), u1.linf()), cfg)
    a = solve_interval(theta0, u0, tau, cfg)
    b = solve_interval(th1, u1, tau, cfg)
    gap0 = float(np.max(np.abs(th1.samples - theta0.samples))) + float(
        np.max(np.hypot(u1.u1.samples - u0.u1.samples, u1.u2.samples - u0.u2.samples)))
    gap = 0.0
    for ta, ua, tb, ub in zip(a.theta_nodes, a.u_nodes, b.theta_nodes, b.u_nodes):
        g = float(np.max(np.abs(ta.samples - tb.samples))) + float(
            np.max(np.hypot(ua.u1.samples - ub.u1.samples, ua.u2.samples - ub.u2.samples)))
        gap = max(gap, g)
    return DiagnosticRow("stability_constant", gap / gap0, 2.0, 0.0, "upper", {"delta": delta, "tau": tau})


def check_derivatives(segment, cfg, theta0: ScalarField, u0: VectorField) -> list[DiagnosticRow]:
    """Iterated first derivatives against spectral differentiation, plus the sup bound."""
    from .solver import derivative_propagation

    ctx = cfg.context()
    traj = derivative_propagation(segment, cfg)
    err = 0.0
    dmax = 0.0
    for d in traj:
        ik = ctx.ik1 if d.axis == 0 else ctx.ik2
        for th, dth in zip(segment.theta_nodes, d.dtheta_nodes):
            ref = np.fft.ifft2(ik * np.fft.fft2(th.samples)).real
            scale = float(np.max(np.abs(ref)))
            if scale > 0:
                err = max(err, float(np.max(np.abs(dth.samples - ref))) / scale)
            dmax = max(dmax, float(np.max(np.abs(dth.samples))))
    g_th = ctx.gradient(theta0)
    c1_theta = float(np.max(np.abs(theta0.samples))) + float(np.max(g_th.magnitude()))
    du = [ctx.gradient(u0.u1), ctx.gradient(u0.u2)]
    c1_u = u0.linf() + float(np.max(np.sqrt(sum(g.u1.samples**2 + g.u2.samples**2 for g in du))))
    bound = 2 * max(c1_theta, c1_u)
    return [
        DiagnosticRow("derivative_match", err, 0.0, 1e-3, "upper", {"alpha": cfg.alpha}),
        DiagnosticRow("derivative_bound", dmax / bound, 1.0, 0.0, "upper", {"bound": bound}),
    ]


def check_schedule(schedule, cfg, theta_ref: float, u_ref: float) -> list[DiagnosticRow]:
    """tau_n >= tau_1 exp(-lambda S_{n-1}) and coverage of 20 tau_1 within 60 intervals."""
    from .solver import gronwall_constants, plan_schedule

    mu, c_alpha = gronwall_constants(cfg.alpha, cfg.kernel_constant_C)
    lam = mu * c_alpha * theta_ref**mu
    taus, starts = schedule.taus, schedule.starts
    tau1 = taus[0]
    full = taus[:-1] if len(taus) > 1 else taus
    worst = min(t / (tau1 * math.exp(-lam * s)) for t, s in zip(full, starts))
    plan = plan_schedule(theta_ref, u_ref, 20 * tau1, cfg)
    meta = {"lambda": lam, "tau1": tau1, "intervals": len(taus)}
    return [
        DiagnosticRow("schedule_lower_bound", worst, 1.0, 1e-9, "lower", meta),
        DiagnosticRow("schedule_intervals", float(len(taus)), 10.0, 0.0, "lower", meta),
        DiagnosticRow("schedule_coverage_20tau1", float(len(plan)), 60.0, 0.0, "upper",
                      {"covered": sum(plan), "requested": 20 * tau1}),
    ]


def holder_profile(segments, gamma: float, max_radius: float):
    ts, hs = [], []
    for t, th, _ in _nodes(segments):
        if t > 0:
            ts.append(t)
            hs.append(holder_seminorm(th, gamma, max_radius))
    return np.array(ts), np.array(hs)


def fit_holder_bound(ts: np.ndarray, hs: np.ndarray, theta_linf: float, exponent: float) -> tuple[float, float]:
    """Smallest c1 + c2 (both >= 0, summed over nodes) with c1 t^-exponent |theta0| + c2 >= H(t)."""
    from scipy.optimize import linprog

    a = ts ** (-exponent) * theta_linf
    res = linprog(c=[a.sum(), len(a)], A_ub=-np.column_stack([a, np.ones_like(a)]), b_ub=-hs,
                  bounds=[(0, None), (0, None)], method="highs")
    if not res.success:
        raise RuntimeError(res.message)
    return float(res.x[0]), float(res.x[1])


def check_holder_gain(make_data, alpha: float, sizes=(64, 128), domain: float = 2 * np.pi,
                      intervals: int = 3) -> list[DiagnosticRow]:
    """Hoelder seminorm envelope c1 t^{-g/(2a)} |theta0| + c2, g = (2a-1)/2, on two grids.

    The envelope is fitted as the tightest upper bound over the nodes; the
    row compares the two grids' envelopes over the run.
    """
    from .solver import SolverConfig, picard_interval_length, solve_global

    gamma = (2 * alpha - 1) / 2
    exponent = gamma / (2 * alpha)
    fits, finite = [], True
    T = None
    for n in sizes:
        spec = GridSpec.square(n, domain)
        theta0, u0 = make_data(spec)
        cfg = SolverConfig(alpha, 1.0, spec)
        if T is None:
            T = intervals * picard_interval_length(float(np.max(np.abs(theta0.samples))), cfg.mu * u0.linf(), cfg)
        _, segs = solve_global(theta0, u0, T, cfg)
        ts, hs = holder_profile(segs, gamma, domain / 4)
        finite = finite and bool(np.all(np.isfinite(hs)))
        c1, c2 = fit_holder_bound(ts, hs, float(np.max(np.abs(theta0.samples))), exponent)
        fits.append((ts, c1, c2, float(np.max(np.abs(theta0.samples)))))
    (ta, c1a, c2a, ma), (_, c1b, c2b, mb) = fits
    ea = c1a * ta ** (-exponent) * ma + c2a
    eb = c1b * ta ** (-exponent) * mb + c2b
    drift = float(np.max(np.abs(ea - eb) / ea))
    meta = {"gamma": gamma, "c1": c1a, "c2": c2a, "c1_fine": c1b, "c2_fine": c2b}
    return [
        DiagnosticRow(f"holder_finite_alpha={alpha}", 1.0 if finite else 0.0, 1.0, 0.0, "lower", meta),
        DiagnosticRow(f"holder_refinement_alpha={alpha}", drift, 0.0, 0.1, "upper", meta),
    ]


# ---------------------------------------------------------------------------
# Whole suite
# ---------------------------------------------------------------------------

def run_suite(alphas=(0.75, 1.0), n: int = 64, domain: float = 4 * np.pi, seed: int = 0,
              intervals: int = 10, include_kernels: bool = True) -> DiagnosticsReport:
    """Every check for each alpha, on band-limited random data with u0 from the Riesz law."""
    from .data import band_limited_random, generate_data, gaussian_bump, dyadic_bumps
    from .operators import pv_gradient_identity_check
    from .solver import SolverConfig, picard_interval_length, solve_global, sup_norm

    report = DiagnosticsReport()
    if include_kernels:
        report.extend(check_kernel_closed_forms())
        desk = GridSpec.square(128, 40.0)
        report.add(pv_gradient_identity_check(gaussian_bump(GridSpec.square(64, 20.0))))
        report.extend(check_domain_doubling())
        report.extend(check_uniform_annuli(dyadic_bumps(desk), "annuli_dyadic"))
        report.extend(check_uniform_annuli(dyadic_bumps(desk, alternating=True), "annuli_checker"))
    spec = GridSpec.square(n, domain)
    for alpha in alphas:
        if include_kernels:
            report.add(check_dilation(alpha))
            report.extend(check_decay_rates(alpha))
            if alpha < 1:
                report.add(check_lambda_equivalence(alpha))
            report.add(check_commutation(dyadic_bumps(GridSpec.square(128, 40.0), extent=0.5), alpha))
        cfg = SolverConfig(alpha, 1.0, spec)
        theta0, u0 = generate_data("random", spec, seed)
        tau1 = picard_interval_length(sup_norm(theta0), cfg.mu * u0.linf(), cfg)
        schedule, segs = solve_global(theta0, u0, intervals * tau1, cfg)
        report.extend(check_solution_suite(segs, cfg, theta0, u0, f"alpha={alpha}"))
        tag = f"_alpha={alpha}"
        report.add(_tagged(max_principle_negative_control(segs, theta0), tag))
        report.extend(_tagged(r, tag) for r in check_schedule(schedule, cfg, sup_norm(theta0), u0.linf()))
        report.extend(_tagged(r, tag) for r in check_derivatives(segs[0], cfg, theta0, u0))
        mode, mode_u = generate_data("mode", spec, seed, k=(1, 0))
        report.extend(check_contraction(mode, mode_u, cfg, label=f"mode_alpha={alpha}"))
        report.extend(check_contraction(theta0, u0, cfg, label=f"random_alpha={alpha}"))
        report.extend(check_contraction(theta0, u0, cfg, tau_scale=8.0, label=f"random_x8_alpha={alpha}"))
        report.add(check_residual(theta0, u0, cfg, name=f"residual_convergence_alpha={alpha}"))
        band = band_limited_random(spec, seed, kmax=n / 3)
        broken = SolverConfig(alpha, 1.0, spec, dealias=False)
        report.add(check_residual(band, cfg.context().riesz_velocity(band), broken, negative=True,
                                  name=f"residual_negative_control_alpha={alpha}"))
        report.add(_tagged(check_stability(theta0, cfg), tag))
    return report


def _tagged(row: DiagnosticRow, tag: str) -> DiagnosticRow:
    from dataclasses import replace

    return replace(row, check=row.check + tag)
