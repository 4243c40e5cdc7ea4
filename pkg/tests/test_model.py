import math

import numpy as np
import pytest
from scipy import integrate

from retrialq import (Deterministic, Exponential, ModelParams, Pareto,
                      derive, validate)
from retrialq.model import (sample_service, sample_service_equilibrium,
                            service_equilibrium_lst, service_lst,
                            service_mean, service_second_moment)

from conftest import mp_pareto_eq_lst, mp_pareto_lst, rand_right_half_plane


class FixedU:
    """Fake generator returning preset uniforms (quantile tests)."""

    def __init__(self, u):
        self.u = np.asarray(u, dtype=float)

    def random(self, size=None):
        return self.u if size is not None else float(self.u)


def test_validate_ref_ok(ref_params):
    assert validate(ref_params) == []


def test_validate_unstable():
    p = ModelParams(lam=1.0, q=0.4, mu=1.0, service=Pareto(a=2.5, x_m=0.7))
    # beta1 = 2.5*0.7/1.5 = 7/6, rho = 7/6 >= 1
    v = validate(p)
    assert len(v) == 1 and v[0].startswith("unstable")


def test_validate_q_endpoints():
    for q in (0.0, 1.0, -0.1, 1.3):
        p = ModelParams(lam=1.0, q=q, mu=1.0, service=Pareto(a=2.5, x_m=0.3))
        assert any("q must lie in open interval" in v for v in validate(p))


def test_validate_service_parameters():
    bad = [Pareto(a=1.0, x_m=0.3), Pareto(a=2.5, x_m=0.0),
           Exponential(rate=0.0), Deterministic(value=-1.0)]
    for svc in bad:
        p = ModelParams(lam=1.0, q=0.4, mu=1.0, service=svc)
        assert validate(p)


def test_derive_ref_values(ref_params):
    d = derive(ref_params)
    assert d.lambda1 == pytest.approx(0.4, abs=1e-15)
    assert d.lambda2 == pytest.approx(0.6, abs=1e-15)
    assert d.rho1 == pytest.approx(0.2, abs=1e-15)
    assert d.rho2 == pytest.approx(0.3, abs=1e-15)
    assert d.rho == pytest.approx(0.5, abs=1e-15)
    assert d.vartheta == pytest.approx(0.375, abs=1e-15)
    assert d.psi == pytest.approx(1.0, abs=1e-15)
    assert d.alpha1 == pytest.approx(0.625, abs=1e-15)
    assert d.stable


def test_derive_h0_against_quadrature(ref_params):
    # h0 = (1 - beta(lambda1))/(beta1 lambda1), beta by independent quadrature
    d = derive(ref_params)
    beta_l1 = mp_pareto_lst(2.5, 0.3, 0.4).real
    assert d.h0 == pytest.approx((1.0 - beta_l1) / (0.5 * 0.4), rel=1e-11)
    assert 0.0 < d.h0 < 1.0


def test_derive_q_swap_symmetry():
    a = derive(ModelParams(lam=1.3, q=0.3, mu=0.8, service=Pareto(a=3.0, x_m=0.2)))
    b = derive(ModelParams(lam=1.3, q=0.7, mu=0.8, service=Pareto(a=3.0, x_m=0.2)))
    assert a.lambda1 == pytest.approx(b.lambda2) and a.lambda2 == pytest.approx(b.lambda1)
    assert a.rho1 == pytest.approx(b.rho2) and a.rho2 == pytest.approx(b.rho1)


def test_derive_refuses_exactly_when_validate_fails():
    cases = [
        ModelParams(lam=1.0, q=0.4, mu=1.0, service=Pareto(a=2.5, x_m=0.3)),
        ModelParams(lam=1.0, q=0.4, mu=1.0, service=Pareto(a=2.5, x_m=0.7)),
        ModelParams(lam=0.0, q=0.4, mu=1.0, service=Exponential(rate=1.0)),
        ModelParams(lam=0.5, q=0.5, mu=2.0, service=Deterministic(value=0.5)),
    ]
    for p in cases:
        if validate(p):
            with pytest.raises(ValueError):
                derive(p)
        else:
            derive(p)


def test_exponential_lst_closed_form():
    svc = Exponential(rate=2.0)
    for s in (0.0, 0.5, 3.0):
        assert service_lst(svc, s) == pytest.approx(2.0 / (2.0 + s), rel=1e-14)
        # exponential is its own equilibrium distribution
        assert service_equilibrium_lst(svc, s) == pytest.approx(2.0 / (2.0 + s), rel=1e-14)


def test_pareto_lst_normalization_and_quadrature_oracle():
    svc = Pareto(a=2.5, x_m=0.3)
    assert service_lst(svc, 0.0) == pytest.approx(1.0, abs=1e-14)
    # independent adaptive quadrature of the density form at s=1
    oracle, err = integrate.quad(
        lambda t: math.exp(-t) * 2.5 * 0.3 ** 2.5 * t ** (-3.5), 0.3, np.inf,
        limit=400, epsabs=1e-14, epsrel=1e-13)
    got = service_lst(svc, 1.0)
    assert abs(got.real - oracle) / oracle < 1e-10
    assert abs(got.imag) < 1e-14
    # complex arguments against the mpmath oracle
    for s in [1j, 0.3 + 2.1j, 2.0 - 0.7j, 1e-6 + 1e-5j]:
        ref = mp_pareto_lst(2.5, 0.3, s)
        assert abs(service_lst(svc, s) - ref) < 1e-12


def test_pareto_equilibrium_lst_against_quadrature():
    svc = Pareto(a=2.5, x_m=0.3)
    assert service_equilibrium_lst(svc, 0.0) == pytest.approx(1.0, abs=1e-14)
    beta1 = service_mean(svc)

    def tail(t):
        return 1.0 if t < 0.3 else (0.3 / t) ** 2.5

    lo, _ = integrate.quad(lambda t: math.exp(-0.4 * t) * tail(t) / beta1,
                           0.0, 0.3, limit=400, epsabs=1e-14, epsrel=1e-13)
    hi, _ = integrate.quad(lambda t: math.exp(-0.4 * t) * tail(t) / beta1,
                           0.3, np.inf, limit=400, epsabs=1e-14, epsrel=1e-13)
    oracle = lo + hi
    assert service_equilibrium_lst(svc, 0.4).real == pytest.approx(oracle, abs=1e-9)
    for s in [2j, 1.5 + 0.5j]:
        assert abs(service_equilibrium_lst(svc, s) - mp_pareto_eq_lst(2.5, 0.3, s)) < 1e-11


def test_lst_rejects_left_half_plane():
    svc = Pareto(a=2.5, x_m=0.3)
    with pytest.raises(ValueError):
        service_lst(svc, -0.1)
    with pytest.raises(ValueError):
        service_equilibrium_lst(svc, -1e-3 + 1j)


def test_lst_bounded_on_right_half_plane():
    s = rand_right_half_plane(1000, seed=11)
    for svc in (Pareto(a=2.5, x_m=0.3), Pareto(a=1.5, x_m=1.0),
                Exponential(rate=2.0), Deterministic(value=0.5)):
        assert np.all(np.abs(service_lst(svc, s)) <= 1.0 + 1e-12)
        assert np.all(np.abs(service_equilibrium_lst(svc, s)) <= 1.0 + 1e-12)


def test_lst_derivative_at_zero_is_minus_mean():
    # imaginary-direction central difference (the real axis would leave the
    # legal domain for the heavy-tailed family)
    h = 1e-4
    for svc in (Pareto(a=2.5, x_m=0.3), Pareto(a=3.5, x_m=1.2), Exponential(rate=2.0)):
        d = (service_lst(svc, 1j * h) - service_lst(svc, -1j * h)) / (2j * h)
        assert d.real == pytest.approx(-service_mean(svc), rel=1e-6)


def test_sampling_quantiles():
    svc = Pareto(a=2.5, x_m=0.3)
    assert sample_service(svc, FixedU(0.0)) == pytest.approx(0.3)  # lower endpoint
    assert sample_service(Exponential(rate=2.0), FixedU(0.7)) == \
        pytest.approx(-math.log(0.3) / 2.0)
    # equilibrium inverse CDF is piecewise: linear below x_m, power-law above
    knee = 1.0 - 1.0 / 2.5
    assert sample_service_equilibrium(svc, FixedU(0.3)) == pytest.approx(0.3 * 0.5)
    assert sample_service_equilibrium(svc, FixedU(knee)) == pytest.approx(0.3)
    u = 0.9
    assert sample_service_equilibrium(svc, FixedU(u)) == \
        pytest.approx(0.3 * (2.5 * 0.1) ** (-1.0 / 1.5))
    assert sample_service_equilibrium(Deterministic(value=2.0), FixedU(0.25)) == 0.5


def test_equilibrium_sampling_mean_matches_moment_formula():
    svc = Pareto(a=2.5, x_m=0.3)
    # E[T_e] = int t (1-F(t)) dt / beta1 = beta2/(2 beta1), by quadrature
    beta1 = service_mean(svc)
    lo, _ = integrate.quad(lambda t: t / beta1, 0.0, 0.3, limit=200)
    hi, _ = integrate.quad(lambda t: t * (0.3 / t) ** 2.5 / beta1,
                           0.3, np.inf, limit=200)
    oracle = lo + hi
    assert oracle == pytest.approx(service_second_moment(svc) / (2 * beta1), rel=1e-10)
    rng = np.random.default_rng(123)
    draws = sample_service_equilibrium(svc, rng, size=10 ** 6)
    se = draws.std() / math.sqrt(draws.size)
    assert abs(draws.mean() - oracle) < 3 * se
