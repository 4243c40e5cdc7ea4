import math

import numpy as np
import pytest
from scipy import integrate

from retrialq import ModelParams, Pareto, TransformContext
from retrialq import transforms as tr

from conftest import rand_right_half_plane


def imag_step_derivative(f, h=1e-4):
    # derivative at 0 along the imaginary axis (real axis leaves the domain);
    # two-step extrapolation removes the h^{a-1} singular term
    d1 = (f(1j * h) - f(-1j * h)) / (2j * h)
    d2 = (f(1j * h / 4) - f(-1j * h / 4)) / (1j * h / 2)
    return (2.0 * d2 - d1).real


def test_alpha_at_zero(ctx):
    assert tr.alpha(ctx, 0.0) == pytest.approx(1.0, abs=1e-13)


def test_alpha_mean_is_busy_period_mean(ctx):
    got = -imag_step_derivative(lambda s: tr.alpha(ctx, s))
    assert got == pytest.approx(0.625, rel=1e-6)


def test_alpha_residual_and_two_start_agreement(ctx):
    s = 0.5
    a = tr.alpha(ctx, s)
    assert abs(a - ctx.beta(np.array([s + 0.4 * (1 - a)]))[0]) < 1e-14
    # Picard iteration from 0 and from 1 converges to the same limit
    limits = []
    for x0 in (0.0, 1.0):
        x = complex(x0)
        for _ in range(200):
            x = ctx.beta(np.array([s + 0.4 * (1.0 - x)]))[0]
        limits.append(x)
    assert abs(limits[0] - limits[1]) < 1e-14
    assert abs(a - limits[0]) < 1e-13


def test_alpha_rejects_left_half_plane(ctx):
    with pytest.raises(ValueError):
        tr.alpha(ctx, -0.2)


def test_h_at_one(ctx):
    assert tr.h(ctx, 1.0) == pytest.approx(1.0, abs=1e-13)


def test_h_derivative_at_one_is_vartheta(ctx):
    got = imag_step_derivative(lambda w: tr.h(ctx, 1.0 + w / 0.6) * 0)  # placeholder
    # h'(1) via the substitution s = lambda2(1-z): h(z)=alpha(s), dh/dz = lambda2*(-alpha')
    da = -imag_step_derivative(lambda s: tr.alpha(ctx, s))
    assert 0.6 * da == pytest.approx(0.375, rel=1e-6)


def test_h_at_zero_direct_iteration_oracle(ctx):
    # direct iteration of the defining equation x = beta(lam - lam1 x) from two starts
    for x0 in (0.0, 1.0):
        x = complex(x0)
        for _ in range(200):
            x = ctx.beta(np.array([1.0 - 0.4 * x]))[0]
        assert abs(tr.h(ctx, 0.0) - x) < 1e-13


def test_h_rejects_outside_disk(ctx):
    with pytest.raises(ValueError):
        tr.h(ctx, 1.2)


def test_kappa_normalization_and_dual_form(ctx):
    assert tr.kappa(ctx, 0.0) == pytest.approx(1.0, abs=1e-15)
    for s in (0.3, 0.05 + 0.7j, 1.4 - 0.3j):
        k14 = tr.kappa(ctx, s)
        al = tr.alpha(ctx, s)
        ae = (1.0 - al) / (0.625 * s)
        k20 = (1.0 - 0.375) * ae / (1.0 - 0.375 * ae)
        assert abs(k14 - k20) < 1e-10


def test_kappa_mean_positive(ctx):
    assert -imag_step_derivative(lambda s: tr.kappa(ctx, s)) > 0


def test_omega_normalization_and_bounds(ctx):
    assert tr.omega(ctx, 0.0) == pytest.approx(1.0, abs=1e-15)
    s = np.linspace(0.05, 2.0, 30)
    om = tr.omega(ctx, s).real
    assert np.all(np.diff(om) < 0)           # decreasing on [0, 2]
    assert np.all(om >= 1.0 - s - 1e-12)     # omega >= 1 - s since |kappa| <= 1
    assert np.all(np.abs(tr.omega(ctx, s).imag) < 1e-13)


def test_omega_against_adaptive_quadrature_oracle(ctx):
    # independent route: scipy adaptive quadrature of kappa on [0, s]
    val, err = integrate.quad(lambda u: tr.kappa(ctx, u).real, 0.0, 0.5,
                              limit=400, epsabs=1e-13, epsrel=1e-13)
    assert tr.omega(ctx, 0.5).real == pytest.approx(1.0 - val, abs=1e-11)


def test_tau_normalization_and_poisson_series(ctx):
    assert tr.tau(ctx, 0.0) == pytest.approx(1.0, abs=1e-14)
    om = tr.omega(ctx, 0.4)
    # Poisson mixture sum_k psi^k/k! e^{-psi} omega^k, truncated below 1e-14
    psi = 1.0
    total, k, term = 0.0, 0, math.exp(-psi)
    while abs(term) > 1e-16 or k < 5:
        total += term * om ** k
        k += 1
        term *= psi / k
        if k > 200:
            break
    assert abs(tr.tau(ctx, 0.4) - total) < 1e-13


def test_tau_degenerates_when_retrial_rate_explodes():
    p = ModelParams(lam=1.0, q=0.4, mu=1e12, service=Pareto(a=2.5, x_m=0.3))
    c = TransformContext(p)
    for s in (0.3, 1.0, 2.0):
        assert abs(tr.tau(c, s) - 1.0) < 1e-11


def test_eta_affine_in_kappa(ctx):
    assert tr.eta(ctx, 0.0) == pytest.approx(1.0, abs=1e-14)
    assert tr.eta(ctx, 0.3) == pytest.approx(0.625 + 0.375 * tr.kappa(ctx, 0.3), abs=1e-14)


def test_eta_degenerates_without_orbit_load():
    p = ModelParams(lam=1.0, q=0.9999, mu=1.0, service=Pareto(a=2.5, x_m=0.3))
    c = TransformContext(p)
    assert abs(tr.eta(c, 0.7) - 1.0) < 1e-3


def test_xi_closed_form_vs_series(ctx):
    assert tr.xi(ctx, 0.0) == pytest.approx(1.0, abs=1e-14)
    be = ctx.eq_lst(np.array([0.4 + 0.0j]))[0]
    total = sum((1 - 0.2) * 0.2 ** (n - 1) * be ** n for n in range(1, 51))
    assert abs(tr.xi(ctx, 0.4) - total) < 1e-12


def test_xi_single_term_when_rho1_vanishes():
    p = ModelParams(lam=1.0, q=1e-9, mu=1.0, service=Pareto(a=2.5, x_m=0.3))
    c = TransformContext(p)
    be = c.eq_lst(np.array([0.7 + 0.0j]))[0]
    assert abs(tr.xi(c, 0.7) - be) < 1e-8


def test_gamma_normalization_and_dual_form(ctx):
    assert tr.gamma_lst(ctx, 0.0) == pytest.approx(1.0, abs=1e-12)
    for s in (0.25, 0.6 + 0.4j, 1.2 - 0.9j):
        direct = tr.gamma_lst(ctx, s, form="direct")
        ratio = tr.gamma_lst(ctx, s, form="ratio")
        assert abs(direct - ratio) < 1e-10


def test_gamma_mean_positive(ctx):
    assert -imag_step_derivative(lambda s: tr.gamma_lst(ctx, s)) > 0


def test_contraction_certificate(ctx):
    # observed Picard ratios bounded by rho1 on the inversion circle
    n = 2048
    theta = 2 * np.pi * np.arange(n // 2 + 1) / n
    s = 0.6 * (1.0 - np.exp(1j * theta))
    x = ctx.beta(s + 0.4)
    prev_delta = None
    worst = 0.0
    for _ in range(40):
        xn = ctx.beta(s + 0.4 * (1.0 - x))
        delta = np.abs(xn - x)
        if prev_delta is not None:
            mask = prev_delta > 1e-9
            if mask.any():
                worst = max(worst, float(np.max(delta[mask] / prev_delta[mask])))
        prev_delta = delta
        x = xn
    assert worst <= 0.2 + 1e-6


def test_kernels_map_into_unit_disk(ctx):
    s = rand_right_half_plane(10 ** 4, seed=5)
    al = 1.0 - ctx.one_minus_alpha(s)
    assert np.all(np.abs(al) <= 1 + 1e-12)
    D = 1.0 - al
    for f in (tr.kappa, tr.eta, tr.xi, tr.gamma_lst):
        assert np.all(np.abs(f(ctx, s)) <= 1 + 1e-12), f.__name__
    # omega/tau are quadrature-heavy: a reduced random sample plus the circle grid
    s_small = rand_right_half_plane(300, seed=6)
    assert np.all(np.abs(tr.omega(ctx, s_small)) <= 1 + 1e-12)
    assert np.all(np.abs(tr.tau(ctx, s_small)) <= 1 + 1e-12)
    g = ctx.circle_grid(2 ** 13)
    for arr in (g.kappa2, g.omega2, g.tau2, g.eta2, g.xi1, g.gamma2):
        assert np.all(np.abs(arr) <= 1 + 1e-11)


def test_conjugate_symmetry(ctx):
    s = rand_right_half_plane(64, seed=9)
    for f in (tr.kappa, tr.eta, tr.xi, tr.gamma_lst, tr.omega, tr.tau):
        a = f(ctx, s)
        b = f(ctx, np.conj(s))
        assert np.max(np.abs(np.conj(a) - b)) < 1e-12, f.__name__
    assert np.max(np.abs(np.conj(tr.alpha(ctx, s)) - tr.alpha(ctx, np.conj(s)))) < 1e-13


def test_h_fixed_point_residual_on_grid(ctx):
    g = ctx.circle_grid(4096)
    hvals = g.h
    resid = np.abs(hvals - ctx.beta(1.0 - 0.4 * hvals - 0.6 * g.z))
    assert resid.max() < 10 * ctx.tolerances.fixed_point_tol


def test_grid_matches_scalar_evaluations(ctx):
    g = ctx.circle_grid(2 ** 12)
    for idx in (1, 7, 100, 1024, 2048):
        s = g.s2[idx]
        assert abs(g.kappa2[idx] - tr.kappa(ctx, s)) < 1e-12
        assert abs(g.omega2[idx] - tr.omega(ctx, s)) < 5e-12
        assert abs(g.tau2[idx] - tr.tau(ctx, s)) < 5e-12
        assert abs(g.gamma2[idx] - tr.gamma_lst(ctx, s)) < 1e-10
        assert abs(g.xi1[idx] - tr.xi(ctx, g.s1[idx])) < 1e-12


def test_context_rejects_inconsistent_derived(ref_params):
    from dataclasses import replace
    from retrialq import derive
    d = derive(ref_params)
    with pytest.raises(ValueError):
        TransformContext(ref_params, derived=replace(d, psi=d.psi + 0.1))


def test_tolerances_defaults(ctx):
    t = ctx.tolerances
    assert t.fixed_point_tol == 1e-14
    assert t.quadrature_tol == 1e-12
    assert t.max_iter == 10 ** 6
