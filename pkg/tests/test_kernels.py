import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from sqgmild.data import dyadic_bumps, gaussian_bump
from sqgmild.grid import GridSpec, ScalarField
from sqgmild.kernels import (
    LPBlockSpec,
    annulus_pv_convolve,
    four_dim_kernel,
    heat_kernel_at,
    heat_kernel_direct,
    heat_kernel_profile,
    kernel_constant,
    kernel_l1_norms,
    levy_constant,
    lp_project,
    lp_riesz_block,
    riesz_kernel,
    tail_coefficients,
)
from sqgmild.operators import context


@pytest.fixture(scope="module")
def profiles():
    return {a: heat_kernel_profile(a, 1.0) for a in (0.5, 0.75, 1.0)}


def test_gaussian_closed_form(profiles):
    r = np.linspace(0, 8, 161)
    ref = np.exp(-r * r / 4) / (4 * np.pi)
    assert profiles[1.0](0.0) == pytest.approx(0.0795775, abs=1e-7)
    assert np.max(np.abs(profiles[1.0](r) - ref) / ref) <= 1e-6


def test_poisson_closed_form(profiles):
    r = np.linspace(0, 8, 161)
    ref = 1 / (2 * np.pi * (1 + r * r) ** 1.5)
    assert profiles[0.5](0.0) == pytest.approx(0.1591549, abs=1e-7)
    assert np.max(np.abs(profiles[0.5](r) - ref) / ref) <= 1e-6


def test_profile_derivative_matches_closed_form(profiles):
    r = np.linspace(0.1, 6, 40)
    ref = -r / 2 * np.exp(-r * r / 4) / (4 * np.pi)
    assert np.max(np.abs(profiles[1.0].derivative(r) - ref)) <= 1e-8


def test_mass_by_independent_quadrature(profiles):
    prof = profiles[0.75]
    assert prof.mass == pytest.approx(1.0, abs=1e-6)
    # adaptive quadrature of the tabulated profile plus the asymptotic tail series
    inner, _ = integrate.quad(lambda r: 2 * np.pi * r * prof(r), 0, prof.r_max, limit=400)
    k = np.arange(1, 5)
    a = tail_coefficients(0.75, 1.0)
    tail = float(np.sum(2 * np.pi * a * prof.r_max ** (-1.5 * k) / (1.5 * k)))
    assert inner + tail == pytest.approx(1.0, abs=1e-6)


def test_heat_kernel_at_gaussian_origin(profiles):
    assert heat_kernel_at(profiles[1.0], 2.0, np.zeros(2)) == pytest.approx(1 / (8 * np.pi), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.6, 0.75, 1.0])
def test_dilation_against_direct_inversion(alpha):
    prof = heat_kernel_profile(alpha, 1.0)
    r = np.linspace(0, 8, 25)
    direct = heat_kernel_direct(r, alpha, 1.0, 4.0)
    assert np.max(np.abs(heat_kernel_at(prof, 4.0, r) - direct) / direct) <= 1e-6


@settings(max_examples=10, deadline=None)
@given(t=st.floats(0.05, 20.0))
def test_origin_scaling(profiles, t):
    prof = profiles[0.75]
    assert heat_kernel_at(prof, t, 0.0) == pytest.approx(t ** (-1 / 0.75) * prof(0.0), rel=1e-12)


def test_profile_nu_scaling():
    # g_nu(1, r) = nu^{-1/a} g_1(1, r nu^{-1/(2a)})
    a, nu = 0.75, 2.0
    base = heat_kernel_profile(a, 1.0)
    scaled = heat_kernel_profile(a, nu)
    r = np.linspace(0, 6, 13)
    ref = nu ** (-1 / a) * base(r * nu ** (-1 / (2 * a)))
    assert np.max(np.abs(scaled(r) - ref) / ref) <= 1e-8


def test_four_dim_kernel_from_radial_derivative():
    # in four dimensions g4(r) = -(1/(2 pi r)) d/dr g2(r)
    a = 0.75
    prof = heat_kernel_profile(a, 1.0)
    r = np.array([0.5, 1.0, 2.0, 4.0])
    ref = -prof.derivative(r) / (2 * np.pi * r)
    assert np.max(np.abs(four_dim_kernel(r, a, 1.0) - ref) / np.abs(ref)) <= 1e-6


def test_profile_far_field_matches_asymptotic_series():
    a = 0.75
    prof = heat_kernel_profile(a, 1.0)
    coeffs = tail_coefficients(a, 1.0)
    assert coeffs[0] == pytest.approx(levy_constant(a), rel=1e-12)
    r = np.array([20.0, 30.0])
    k = np.arange(1, coeffs.size + 1)
    series = (coeffs[None, :] * r[:, None] ** (-2 - 2 * a * k[None, :])).sum(axis=1)
    assert np.max(np.abs(prof(r) - series) / series) <= 1e-4


def test_profile_rejects_bad_parameters():
    with pytest.raises(ValueError):
        heat_kernel_profile(0.4)
    with pytest.raises(ValueError):
        heat_kernel_profile(0.75, -1.0)
    with pytest.raises(ValueError):
        heat_kernel_profile(0.75, 1.0, r_max=2.0)


def test_riesz_kernel_values():
    assert np.linalg.norm(riesz_kernel([1.0, 0.0])) == pytest.approx(1 / (2 * np.pi))
    with pytest.raises(ValueError):
        riesz_kernel([0.0, 0.0])


@settings(max_examples=30)
@given(x1=st.floats(-5, 5), x2=st.floats(-5, 5))
def test_riesz_kernel_homogeneity_and_perpendicularity(x1, x2):
    x = np.array([x1, x2])
    if np.hypot(x1, x2) < 1e-3:
        return
    k = riesz_kernel(x)
    assert np.allclose(riesz_kernel(2 * x), k / 4, rtol=1e-12, atol=0)
    assert abs(k @ x) <= 1e-12 * np.linalg.norm(k) * np.linalg.norm(x)


def test_annulus_sum_of_constant_vanishes():
    spec = GridSpec.square(32, 8.0)
    f = ScalarField(spec, np.ones(spec.shape))
    v = annulus_pv_convolve(f, spec.hx / 2, 2.0)
    center = v.magnitude()[16, 16]
    assert center <= 1e-12


def test_annulus_sum_of_delta_reproduces_kernel():
    spec = GridSpec.square(32, 8.0)
    a = np.zeros(spec.shape)
    a[16, 16] = 1 / spec.cell_area
    v = annulus_pv_convolve(ScalarField(spec, a), 0.3, 3.0)
    x, y = spec.coords()
    dx, dy = x - x[16, 16], y - y[16, 16]
    rad = np.hypot(dx, dy)
    sel = (rad > 0.3) & (rad < 3.0)
    ref = riesz_kernel(np.stack([dx[sel], dy[sel]], axis=-1))
    assert np.allclose(v.u1.samples[sel], ref[:, 0], rtol=1e-10, atol=1e-12)
    assert np.allclose(v.u2.samples[sel], ref[:, 1], rtol=1e-10, atol=1e-12)
    assert np.all(v.magnitude()[~sel] <= 1e-12)


def test_annulus_rejects_bad_radii():
    f = ScalarField.zeros(GridSpec.square(16, 4.0))
    with pytest.raises(ValueError):
        annulus_pv_convolve(f, 1.0, 0.5)
    with pytest.raises(ValueError):
        annulus_pv_convolve(f, 0.1, 10.0)


def test_annulus_sums_bounded_for_sparse_lattice():
    spec = GridSpec.square(128, 40.0)
    f = dyadic_bumps(spec)
    sups = [annulus_pv_convolve(f, r, R).linf() for r in (0.15, 0.6) for R in (2.0, 8.0, 20.0)]
    assert max(sups) <= 2 * np.max(np.abs(f.samples))


def test_lp_single_mode_inside_shell_is_unchanged():
    spec = GridSpec.square(32)  # unit wavenumber spacing
    f = ScalarField.from_function(spec, lambda x, y: np.cos(2 * x))  # |xi| = 2 = 2^1
    assert np.max(np.abs(lp_project(f, 1).samples - f.samples)) <= 1e-12


@pytest.mark.filterwarnings("ignore:shell")
def test_lp_mean_is_removed():
    spec = GridSpec.square(32)
    f = ScalarField(spec, np.full(spec.shape, 3.0))
    for j in range(-1, 4):
        assert np.max(np.abs(lp_project(f, j).samples)) <= 1e-12


@pytest.mark.filterwarnings("ignore:shell")
def test_lp_partition_of_unity():
    spec = GridSpec.square(64, 8 * np.pi)  # spacing 1/4, shells j >= -2 resolved
    rng = np.random.default_rng(0)
    xi1, xi2 = spec.frequencies()
    mag = np.hypot(xi1, xi2)
    keep = (mag > 0) & (mag <= 4.0)
    c = (rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)) * keep
    f = ScalarField(spec, np.fft.ifft2(c).real + 0.7)
    total = sum(lp_project(f, j).samples for j in range(-3, 4))
    assert np.max(np.abs(total - (f.samples - f.samples.mean()))) <= 1e-10


def test_lp_empty_shell_warns():
    spec = GridSpec.square(16)
    f = ScalarField.from_function(spec, lambda x, y: np.cos(x))
    with pytest.warns(UserWarning):
        out = lp_project(f, -4)
    assert not out.samples.any()


def test_lp_riesz_block_sums_to_riesz_velocity():
    spec = GridSpec.square(32)
    f = ScalarField.from_function(spec, lambda x, y: np.cos(x) + np.sin(3 * y) + 0.5 * np.cos(5 * x + 2 * y))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        blocks = [lp_riesz_block(f, j) for j in range(-2, 5)]
    u = context(1.0, 1.0, spec).riesz_velocity(f)
    assert np.allclose(sum(b.u1.samples for b in blocks), u.u1.samples, atol=1e-12)
    assert np.allclose(sum(b.u2.samples for b in blocks), u.u2.samples, atol=1e-12)


def test_lp_block_support():
    lo, hi = LPBlockSpec(2).support()
    assert (lo, hi) == (2.0, 6.0)
    xi = np.linspace(0, 10, 1001)
    m = LPBlockSpec(2).mask(xi)
    assert np.all(m[(xi <= lo) | (xi >= hi)] == 0)


def test_kernel_l1_norms_gaussian():
    # ||grad g(1)||_1 for the Gaussian is sqrt(pi)/2
    norms = kernel_l1_norms(1.0, 1.0)
    assert norms["grad"] == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-6)
    assert kernel_constant(1.0) == max(norms.values())


def test_centered_bump_lattice_smoke():
    f = gaussian_bump(GridSpec.square(32, 10.0))
    assert np.argmax(f.samples) == 16 * 32 + 16
