"""Command-line entry point: kernel tables, solves, the verification suite, data files."""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import logging
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .data import generate_data
from .grid import FieldFileError, GridSpec, ScalarField, write_field

log = logging.getLogger("sqgmild")

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4

DATA_KINDS = ("mode", "bumps", "psi", "random")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters of one subcommand, in flag order."""

    command: str
    params: dict = field(default_factory=dict)

    def payload(self) -> str:
        lines = [f"command={self.command}"]
        lines += [f"{k}={self.params[k]}" for k in sorted(self.params)]
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.payload().encode()).hexdigest()

    def write_manifest(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.txt"
        stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        text = self.payload() + f"version={__version__}\nhash={self.digest}\ncreated={stamp}\n"
        path.write_text(text)
        return path


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def write_csv(path: Path, header, rows, digest: str, meta=None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# manifest={digest}\n")
        if meta:
            fh.write("# {" + ", ".join(f'"{k}": {v!r}' for k, v in meta.items()) + "}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def svg_line_chart(path: Path, series, title: str, xlabel: str, ylabel: str, digest: str,
                   logx: bool = False, logy: bool = False, notes=()) -> None:
    """Minimal standalone SVG line chart; series is a list of (label, xs, ys)."""
    W, H, pad = 640, 420, 60
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = [[(tx(x), ty(y)) for x, y in zip(xs, ys) if (x > 0 or not logx) and (y > 0 or not logy)]
           for _, xs, ys in series]
    allx = [p[0] for s in pts for p in s] or [0.0, 1.0]
    ally = [p[1] for s in pts for p in s] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (W - 2 * pad)

    def sy(v):
        return H - pad - (v - y0) / (y1 - y0) * (H - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
           f"<!-- manifest={digest} -->",
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="24" text-anchor="middle" font-size="14">{title}</text>',
           f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>',
           f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle">{xlabel}{" (log10)" if logx else ""}</text>',
           f'<text x="15" y="{H / 2}" transform="rotate(-90 15 {H / 2})" text-anchor="middle">'
           f'{ylabel}{" (log10)" if logy else ""}</text>']
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{sx(xv):.1f}" y="{H - pad + 16}" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{pad - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
    for i, ((label, _, _), p) in enumerate(zip(series, pts)):
        color = colors[i % len(colors)]
        if p:
            d = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in p)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{d}"/>')
        out.append(f'<text x="{W - pad - 150}" y="{pad + 16 * i}" fill="{color}">{label}</text>')
    for i, note in enumerate(notes):
        out.append(f'<text x="{pad + 10}" y="{pad + 16 * i}">{note}</text>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------

def _alpha_list(text: str) -> list[float]:
    try:
        return [float(a) for a in str(text).split(",") if a.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}") from exc


def _data_kind(text: str) -> str:
    if text in DATA_KINDS or text.startswith("file:"):
        return text
    raise argparse.ArgumentTypeError(f"data must be one of {', '.join(DATA_KINDS)} or file:PATH")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sqgmild", description="Mild solutions of dissipative SQG.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="key=value file with one section per subcommand")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel-table", help="tabulate the unit-time heat kernel profile")
    k.add_argument("--alpha", type=float, default=1.0)
    k.add_argument("--nu", type=float, default=1.0)
    k.add_argument("--rmax", type=float, default=8.0)
    k.add_argument("--points", type=int, default=81)
    k.add_argument("--out", default="kernel_out")

    s = sub.add_parser("solve", help="continue a mild solution over [0, T]")
    s.add_argument("--alpha", type=float, default=0.75)
    s.add_argument("--nu", type=float, default=1.0)
    s.add_argument("--grid", type=int, default=64)
    s.add_argument("--domain", type=float, default=2 * math.pi)
    s.add_argument("--T", dest="T", default="auto", help="final time, or 'auto' for ten first intervals")
    s.add_argument("--nodes", type=int, default=16)
    s.add_argument("--data", type=_data_kind, default="mode")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-intervals", type=int, default=200)
    s.add_argument("--out", default="solve_out")

    v = sub.add_parser("verify-suite", help="run every diagnostic and write report.csv")
    v.add_argument("--alpha", type=_alpha_list, default="0.75,1.0")
    v.add_argument("--grid", type=int, default=64)
    v.add_argument("--domain", type=float, default=4 * math.pi)
    v.add_argument("--intervals", type=int, default=10)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--skip-kernels", action="store_true")
    v.add_argument("--out", default="report.csv")

    d = sub.add_parser("data-gen", help="write (theta0, u0) field files")
    d.add_argument("--data", type=_data_kind, default="random")
    d.add_argument("--grid", type=int, default=64)
    d.add_argument("--domain", type=float, default=2 * math.pi)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", default="data_out")
    return p


def parse_args(argv=None) -> argparse.Namespace:
    """Parse flags; values in a --config file sit beneath explicit flags."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            with open(args.config) as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {args.config}: {exc}") from exc
        if cp.has_section(args.command):
            subparser = parser._subparsers._group_actions[0].choices[args.command]
            actions = {a.dest: a for a in subparser._actions}
            values = {}
            for key, val in cp.items(args.command):
                dest = key.replace("-", "_")
                if dest not in actions:
                    raise ConfigError(f"unknown key {key!r} in section [{args.command}]")
                if isinstance(actions[dest], argparse._StoreTrueAction):
                    try:
                        values[dest] = cp.getboolean(args.command, key)
                    except ValueError as exc:
                        raise ConfigError(f"{key} must be a boolean") from exc
                else:
                    values[dest] = val
            subparser.set_defaults(**values)
            args = parser.parse_args(argv)
    return args


def _validate(args) -> RunConfig:
    params = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    cmd = args.command

    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    if cmd == "kernel-table":
        need(0.5 <= args.alpha <= 1, "kernel-table needs alpha in [1/2, 1]")
        need(args.nu > 0, "nu must be positive")
        need(args.rmax > 0 and args.points >= 2, "need rmax > 0 and at least 2 points")
    if cmd in ("solve", "data-gen", "verify-suite"):
        need(args.grid >= 8 and args.grid % 2 == 0, "grid must be an even integer >= 8")
        need(args.domain > 0, "domain must be positive")
    if cmd == "solve":
        need(0.5 < args.alpha <= 1, "solve needs alpha in (1/2, 1]")
        need(args.nu > 0, "nu must be positive")
        need(args.nodes >= 8, "nodes must be at least 8")
        need(args.max_intervals >= 1, "max-intervals must be positive")
        if args.T != "auto":
            try:
                T = float(args.T)
            except ValueError:
                raise ConfigError(f"T must be a number or 'auto', got {args.T!r}") from None
            need(T > 0, "T must be positive")
    if cmd == "verify-suite":
        need(len(args.alpha) > 0 and all(0.5 < a <= 1 for a in args.alpha), "alphas must lie in (1/2, 1]")
        need(args.intervals >= 1, "intervals must be positive")
        params["alpha"] = ",".join(repr(a) for a in args.alpha)
    return RunConfig(cmd, params)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _field_name(stem: str, digest: str) -> str:
    return f"{stem}_{digest[:8]}.sqgf"


def cmd_kernel_table(args, cfg: RunConfig) -> int:
    from .kernels import heat_kernel_profile

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.write_manifest(out)
    prof = heat_kernel_profile(args.alpha, args.nu)
    r = np.linspace(0.0, args.rmax, args.points)
    g = prof(r)
    dg = prof.derivative(r)
    meta = {"alpha": args.alpha, "nu": args.nu, "r_max": prof.r_max, "mass": prof.mass,
            "quadrature_residual": prof.residual}
    write_csv(out / "kernel_table.csv", ["r", "g", "dg"], zip(r, g, dg), cfg.digest, meta)
    svg_line_chart(out / "kernel_profile.svg", [("g(1, r)", r[1:], g[1:])],
                   f"heat kernel profile, alpha={args.alpha}", "r", "g", cfg.digest, logy=True)
    log.info("wrote %s", out / "kernel_table.csv")
    return EXIT_OK


def cmd_data_gen(args, cfg: RunConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = GridSpec.square(args.grid, args.domain)
    theta, u = generate_data(args.data, spec, args.seed)
    cfg.write_manifest(out)
    write_field(theta, out / _field_name("theta0", cfg.digest))
    write_field(u.u1, out / _field_name("u0_1", cfg.digest))
    write_field(u.u2, out / _field_name("u0_2", cfg.digest))
    return EXIT_OK


def cmd_solve(args, cfg: RunConfig) -> int:
    from .solver import SolverConfig, picard_interval_length, plan_schedule, solve_global, sup_norm

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = GridSpec.square(args.grid, args.domain)
    theta0, u0 = generate_data(args.data, spec, args.seed)
    scfg = SolverConfig(args.alpha, args.nu, spec, n_time_nodes=args.nodes)
    theta_ref, u_ref = sup_norm(theta0), u0.linf()
    if args.T == "auto":
        T = 10 * picard_interval_length(theta_ref, scfg.mu * u_ref, scfg) if theta_ref + u_ref > 0 else 1.0
    else:
        T = float(args.T)
    cfg.write_manifest(out)
    # fail fast when the a priori schedule already exceeds the interval budget
    plan_schedule(theta_ref, u_ref, T, scfg, args.max_intervals)
    schedule, segments = solve_global(theta0, u0, T, scfg, args.max_intervals)
    ctx = scfg.context()

    rows, ts, th_series, u_series = [], [], [], []
    for n, seg in enumerate(segments):
        th_end, u_end = seg.theta_nodes[-1], seg.u_nodes[-1]
        drift = 0.0
        if u_end.linf() > 0:
            ref = ctx.riesz_velocity(th_end)
            drift = float(np.max(np.hypot(u_end.u1.samples - ref.u1.samples,
                                          u_end.u2.samples - ref.u2.samples))) / u_end.linf()
        rows.append([n, schedule.taus[n], schedule.starts[n] + schedule.taus[n],
                     float(np.max(np.abs(th_end.samples))), u_end.linf(), drift,
                     len(seg.outer_differences)])
        for k, (t, th, u) in enumerate(zip(seg.t_nodes, seg.theta_nodes, seg.u_nodes)):
            if n > 0 and k == 0:
                continue
            write_field(th, out / _field_name(f"theta_i{n:03d}_k{k:02d}", cfg.digest))
            write_field(u.u1, out / _field_name(f"u1_i{n:03d}_k{k:02d}", cfg.digest))
            write_field(u.u2, out / _field_name(f"u2_i{n:03d}_k{k:02d}", cfg.digest))
            ts.append(float(t))
            th_series.append(float(np.max(np.abs(th.samples))))
            u_series.append(u.linf())
    write_csv(out / "schedule.csv",
              ["n", "tau_n", "S_n", "theta_linf", "u_linf", "constitutive_drift", "picard_iterations"],
              rows, cfg.digest)
    svg_line_chart(out / "norms.svg", [("|theta|_inf", ts, th_series), ("|u|_inf", ts, u_series)],
                   f"sup norms, alpha={args.alpha}", "t", "norm", cfg.digest)
    log.info("%d intervals cover [0, %.6g]", len(segments), T)
    return EXIT_OK


def cmd_verify_suite(args, cfg: RunConfig) -> int:
    from .verify import DECAY_TIMES, run_suite

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report = run_suite(tuple(args.alpha), n=args.grid, domain=args.domain, seed=args.seed,
                       intervals=args.intervals, include_kernels=not args.skip_kernels)
    cfg.write_manifest(out.parent)
    report.write_csv(out, cfg.digest)
    if not args.skip_kernels:
        from .operators import OperatorContext, kernel_l1_measurements

        for alpha in args.alpha:
            ctx = OperatorContext(alpha, 1.0, GridSpec.square(256, 32.0))
            meas = [kernel_l1_measurements(ctx, t) for t in DECAY_TIMES]
            series, notes = [], []
            for key in ("grad", "k_grad", "lambda", "lambda_grad"):
                vals = [m[key] for m in meas]
                slope = float(np.polyfit(np.log(DECAY_TIMES), np.log(vals), 1)[0])
                series.append((key, DECAY_TIMES, vals))
                notes.append(f"{key}: slope {slope:.3f}")
            svg_line_chart(out.parent / f"decay_alpha{alpha:g}.svg", series, f"kernel L1 norms, alpha={alpha}",
                           "t", "L1 norm", cfg.digest, logx=True, logy=True, notes=notes)
    for row in report.failures():
        log.warning("FAIL %s: measured %.4g, target %.4g (%s, tol %.3g)",
                    row.check, row.measured, row.target, row.mode, row.tolerance)
    return EXIT_OK if report.passed else EXIT_CHECKS_FAILED


COMMANDS = {
    "kernel-table": cmd_kernel_table,
    "solve": cmd_solve,
    "verify-suite": cmd_verify_suite,
    "data-gen": cmd_data_gen,
}


def main(argv=None) -> int:
    from .solver import ConvergenceError, MaxPrincipleError

    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        cfg = _validate(args)
    except ConfigError as exc:
        print(f"sqgmild: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, cfg)
    except (ConvergenceError, MaxPrincipleError) as exc:
        print(f"sqgmild: solver failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (OSError, FieldFileError) as exc:
        print(f"sqgmild: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"sqgmild: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
