import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqgmild.data import band_limited_random, dyadic_bumps, gaussian_bump, generate_data
from sqgmild.grid import GridSpec, ScalarField, VectorField
from sqgmild.solver import SolverConfig, picard_interval_length, solve_global, sup_norm
from sqgmild.verify import (
    DiagnosticRow,
    DiagnosticsReport,
    check_commutation,
    check_contraction,
    check_decay_rates,
    check_derivatives,
    check_holder_gain,
    check_residual,
    check_schedule,
    check_solution_suite,
    check_uniform_annuli,
    fit_holder_bound,
    max_principle_negative_control,
)

SPEC = GridSpec.square(32)


@given(m=st.floats(-10, 10), t=st.floats(-10, 10), tol=st.floats(0, 5))
def test_row_modes(m, t, tol):
    assert DiagnosticRow("x", m, t, tol, "abs").passed == (abs(m - t) <= tol)
    assert DiagnosticRow("x", m, t, tol, "upper").passed == (m <= t + tol)
    assert DiagnosticRow("x", m, t, tol, "lower").passed == (m >= t - tol)
    assert DiagnosticRow("x", m, t, tol, "rel").passed == (abs(m - t) <= tol * abs(t))


def test_row_rejects_nan_and_unknown_mode():
    assert not DiagnosticRow("x", math.nan, 0.0, 1.0, "upper").passed
    with pytest.raises(ValueError):
        DiagnosticRow("x", 0.0, 0.0, 0.0, "between")


def test_report_gating_and_csv(tmp_path):
    rep = DiagnosticsReport()
    rep.add(DiagnosticRow("ok", 0.1, 1.0, 0.0, "upper"))
    rep.add(DiagnosticRow("info", 5.0, 1.0, 0.0, "upper", gating=False))
    assert rep.passed
    rep.add(DiagnosticRow("bad", 5.0, 1.0, 0.0, "upper", {"k": np.float64(2.5)}))
    assert not rep.passed
    assert [r.check for r in rep.failures()] == ["bad"]
    path = tmp_path / "r.csv"
    rep.write_csv(path, "abc123")
    lines = path.read_text().splitlines()
    assert lines[0] == "# manifest=abc123"
    assert lines[1].startswith("check,measured")
    assert lines[-1].endswith("k=2.5")


def test_gaussian_decay_slope():
    rows = check_decay_rates(1.0)
    grad = next(r for r in rows if r.check.startswith("decay_grad_"))
    assert grad.measured == pytest.approx(-0.5, abs=0.02)
    assert all(r.passed for r in rows)


@pytest.mark.parametrize("make", [
    lambda s: gaussian_bump(s),
    lambda s: dyadic_bumps(s),
    lambda s: dyadic_bumps(s, alternating=True),
])
def test_uniform_annuli(make):
    rows = check_uniform_annuli(make(GridSpec.square(128, 40.0)))
    assert all(r.passed for r in rows)
    assert math.isfinite(rows[0].metadata["sup"])


def test_commutation_zero_field():
    assert check_commutation(ScalarField.zeros(GridSpec.square(32, 10.0)), 0.75).measured == 0.0


def run(theta0, u0, alpha=1.0, intervals=3, spec=SPEC):
    cfg = SolverConfig(alpha, 1.0, spec)
    ref = sup_norm(theta0) + cfg.mu * u0.linf()
    tau1 = picard_interval_length(sup_norm(theta0), cfg.mu * u0.linf(), cfg) if ref > 0 else 0.01
    schedule, segs = solve_global(theta0, u0, intervals * tau1, cfg)
    return cfg, schedule, segs


def test_suite_on_pure_diffusion_has_wide_margins():
    theta0, _ = generate_data("mode", SPEC)
    u0 = VectorField.zeros(SPEC)
    cfg, _, segs = run(theta0, u0)
    rows = check_solution_suite(segs, cfg, theta0, u0)
    assert all(r.passed for r in rows)
    for r in rows:
        if r.target == 0.0:
            assert r.measured <= r.tolerance / 10, r.check


def test_suite_on_single_mode_run():
    theta0, u0 = generate_data("mode", SPEC)
    cfg, schedule, segs = run(theta0, u0)
    rows = check_solution_suite(segs, cfg, theta0, u0)
    names = {r.check for r in rows}
    assert {"max_principle", "velocity_bound", "constitutive_drift", "lp_constitutive"} <= names
    assert all(r.passed for r in rows)


def test_suite_on_random_run_and_schedule():
    theta0, u0 = generate_data("random", SPEC, 3)
    cfg, schedule, segs = run(theta0, u0, alpha=0.75, intervals=10)
    rows = check_solution_suite(segs, cfg, theta0, u0)
    rows += check_schedule(schedule, cfg, sup_norm(theta0), u0.linf())
    rows += check_derivatives(segs[0], cfg, theta0, u0)
    rows.append(max_principle_negative_control(segs, theta0))
    bad = [r.check for r in rows if not r.passed]
    assert not bad


def test_negative_control_detects_excess():
    theta0, u0 = generate_data("random", SPEC, 3)
    cfg, _, segs = run(theta0, u0)
    row = max_principle_negative_control(segs, theta0, excess=1e-5)
    assert row.passed
    assert row.metadata["measured"] == pytest.approx(1 + 1e-5)


def test_residual_converges_on_single_mode():
    theta0, u0 = generate_data("mode", SPEC)
    row = check_residual(theta0, u0, SolverConfig(1.0, 1.0, SPEC))
    assert row.passed and row.measured >= 3


def test_residual_negative_control_without_dealiasing():
    band = band_limited_random(SPEC, 0, kmax=SPEC.nx / 3)
    cfg = SolverConfig(1.0, 1.0, SPEC, dealias=False)
    row = check_residual(band, cfg.context().riesz_velocity(band), cfg, negative=True)
    assert row.passed and row.measured < 3


def test_contraction_rows():
    cfg = SolverConfig(1.0, 1.0, SPEC)
    theta0, u0 = generate_data("mode", SPEC)
    assert all(r.passed for r in check_contraction(theta0, u0, cfg))
    big = check_contraction(*generate_data("random", SPEC, 0), cfg, tau_scale=8.0)
    assert len(big) == 1 and not big[0].gating
    zero = check_contraction(ScalarField.zeros(SPEC), VectorField.zeros(SPEC), cfg)
    assert zero[0].passed and zero[0].metadata["iterations"] == 0


def test_holder_envelope_fit_is_tight():
    ts = np.array([0.1, 0.2, 0.4, 0.8])
    hs = 2.0 * ts ** -0.25 + 0.5
    c1, c2 = fit_holder_bound(ts, hs, 1.0, 0.25)
    assert np.all(c1 * ts ** -0.25 + c2 >= hs - 1e-9)
    assert c1 == pytest.approx(2.0, rel=1e-6) and c2 == pytest.approx(0.5, rel=1e-6)


def test_holder_gain_on_two_grids():
    rows = check_holder_gain(lambda s: generate_data("random", s, 0), 0.75, sizes=(32, 64))
    assert all(r.passed for r in rows)
