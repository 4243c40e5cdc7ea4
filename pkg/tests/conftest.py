import numpy as np
import pytest

from retrialq import ModelParams, Pareto, Exponential, Deterministic, TransformContext

# reference parameter set used throughout: lam=1, q=0.4, mu=1, Pareto(2.5, 0.3)
# beta1 = 0.5, rho = 0.5, vartheta = 0.375, psi = 1, alpha1 = 0.625


@pytest.fixture(scope="session")
def ref_params():
    return ModelParams(lam=1.0, q=0.4, mu=1.0, service=Pareto(a=2.5, x_m=0.3))


@pytest.fixture(scope="session")
def ctx(ref_params):
    return TransformContext(ref_params)


@pytest.fixture(scope="session")
def expo_params():
    return ModelParams(lam=1.0, q=0.4, mu=1.0, service=Exponential(rate=2.0))


@pytest.fixture(scope="session")
def expo_ctx(expo_params):
    return TransformContext(expo_params)


def mp_pareto_lst(a, xm, s, dps=40):
    """Independent Pareto LST oracle: mpmath tanh-sinh quadrature of the
    density form, on a ray rotated to keep the exponential non-oscillatory."""
    import mpmath as mp
    mp.mp.dps = dps
    s = mp.mpc(s)
    if abs(s) == 0:
        return complex(1.0)
    phi = -mp.arg(s)
    e = mp.e ** (1j * phi)
    f = lambda r: mp.e ** (-s * (xm + r * e)) * a * xm ** a * (xm + r * e) ** (-a - 1) * e
    pts = [0] + [xm * 2 ** k for k in range(0, 40)] + [mp.inf]
    return complex(mp.quad(f, pts))


def mp_pareto_eq_lst(a, xm, s, dps=40):
    """Independent equilibrium-LST oracle via (1 - beta(s))/(beta1 s)."""
    import mpmath as mp
    if abs(s) == 0:
        return complex(1.0)
    beta1 = a * xm / (a - 1.0)
    return complex((1.0 - mp.mpc(mp_pareto_lst(a, xm, s, dps))) / (beta1 * mp.mpc(s)))


def rand_right_half_plane(n, seed, radius=4.0):
    rng = np.random.default_rng(seed)
    return rng.random(n) * radius + 1j * (rng.random(n) * 2 * radius - radius)
