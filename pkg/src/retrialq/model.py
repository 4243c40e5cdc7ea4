"""Model primitives: arrival/retrial parameters, service-time families,
and the scalar quantities derived from them.

The queue has Poisson arrivals at rate lambda; a blocked arrival joins the
priority queue with probability q or the orbit with probability 1-q; each
orbiting customer retries at rate mu.  Service times are i.i.d. from one of
three families (Pareto, exponential, deterministic).  Everything downstream
(transform kernels, generating functions, tail laws, simulation) consumes a
validated ``ModelParams`` plus the ``DerivedQuantities`` computed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend

__all__ = [
    "Pareto", "Exponential", "Deterministic", "ServiceDistribution",
    "ModelParams", "DerivedQuantities", "validate", "derive",
    "service_mean", "service_second_moment", "service_tail",
    "service_lst", "service_equilibrium_lst",
    "sample_service", "sample_service_equilibrium",
]


@dataclass(frozen=True)
class Pareto:
    """Pareto service time: P{T > t} = (x_m/t)^a for t >= x_m, 1 below.

    The tail is regularly varying with index a and constant slowly varying
    factor L = x_m^a, which is what the asymptotics module consumes.
    """
    a: float
    x_m: float

    kind = "pareto"


@dataclass(frozen=True)
class Exponential:
    """Exponential service time with the given rate (light-tailed)."""
    rate: float

    kind = "exponential"


@dataclass(frozen=True)
class Deterministic:
    """Constant service time; included for light-tail sanity checks only."""
    value: float

    kind = "deterministic"


ServiceDistribution = Pareto | Exponential | Deterministic


@dataclass(frozen=True)
class ModelParams:
    """Primitive model inputs.

    lam    -- Poisson arrival rate, > 0
    q      -- probability a blocked arrival joins the priority queue,
              strictly inside (0, 1); both endpoints degenerate the model
              (q=1 removes the orbit, q=0 the queue) and several downstream
              formulas divide by q or 1-q, so they are rejected
    mu     -- per-customer retrial rate, > 0
    service -- service-time distribution
    """
    lam: float
    q: float
    mu: float
    service: ServiceDistribution


@dataclass(frozen=True)
class DerivedQuantities:
    """Scalar quantities derived from ModelParams.

    lambda1/lambda2 split the arrival rate by the join probability;
    rho = rho1 + rho2 is the offered load (stability iff rho < 1);
    vartheta = rho2/(1-rho1) < 1 under stability;
    psi = rho/(mu (1-rho));
    alpha1 = beta1/(1-rho1) is the mean busy period of the M/G/1 queue
    with arrival rate lambda1;
    h0 = beta_e(lambda1), the equilibrium-service LST at lambda1.
    """
    lambda1: float
    lambda2: float
    rho1: float
    rho2: float
    rho: float
    vartheta: float
    psi: float
    alpha1: float
    h0: float
    stable: bool


def service_mean(service: ServiceDistribution) -> float:
    """Mean service time beta1."""
    if isinstance(service, Pareto):
        return service.a * service.x_m / (service.a - 1.0)
    if isinstance(service, Exponential):
        return 1.0 / service.rate
    return service.value


def service_second_moment(service: ServiceDistribution) -> float:
    """Second moment of the service time; inf for Pareto with a <= 2."""
    if isinstance(service, Pareto):
        if service.a <= 2.0:
            return math.inf
        return service.a * service.x_m ** 2 / (service.a - 2.0)
    if isinstance(service, Exponential):
        return 2.0 / service.rate ** 2
    return service.value ** 2


def service_tail(service: ServiceDistribution, t) -> np.ndarray:
    """P{T > t}, vectorized over t."""
    t = np.asarray(t, dtype=float)
    if isinstance(service, Pareto):
        return np.where(t < service.x_m, 1.0,
                        (service.x_m / np.maximum(t, service.x_m)) ** service.a)
    if isinstance(service, Exponential):
        return np.exp(-service.rate * t)
    return np.where(t < service.value, 1.0, 0.0)


def validate(params: ModelParams) -> list[str]:
    """Check admissibility and stability; return all violations (empty if OK)."""
    v = []
    if not params.lam > 0:
        v.append("lambda must be > 0")
    if not params.mu > 0:
        v.append("mu must be > 0")
    if not 0.0 < params.q < 1.0:
        v.append("q must lie in open interval (0,1)")
    s = params.service
    if isinstance(s, Pareto):
        if not s.a > 1.0:
            v.append("Pareto tail index a must be > 1 (finite mean)")
        if not s.x_m > 0:
            v.append("Pareto scale x_m must be > 0")
    elif isinstance(s, Exponential):
        if not s.rate > 0:
            v.append("exponential rate must be > 0")
    elif isinstance(s, Deterministic):
        if not s.value > 0:
            v.append("deterministic service value must be > 0")
    else:
        v.append(f"unknown service distribution {s!r}")
    if not v:
        beta1 = service_mean(s)
        if not (math.isfinite(beta1) and beta1 > 0):
            v.append("service mean must be finite and positive")
        else:
            rho = params.lam * beta1
            if rho >= 1.0:
                v.append(f"unstable: rho={rho:.6g} >= 1")
    return v


def derive(params: ModelParams) -> DerivedQuantities:
    """Compute all derived scalars; raises ValueError on invalid params."""
    violations = validate(params)
    if violations:
        raise ValueError("invalid model parameters: " + "; ".join(violations))
    beta1 = service_mean(params.service)
    lambda1 = params.lam * params.q
    lambda2 = params.lam * (1.0 - params.q)
    rho1 = lambda1 * beta1
    rho2 = lambda2 * beta1
    rho = rho1 + rho2
    h0 = float(service_equilibrium_lst(params.service, lambda1).real)
    return DerivedQuantities(
        lambda1=lambda1,
        lambda2=lambda2,
        rho1=rho1,
        rho2=rho2,
        rho=rho,
        vartheta=rho2 / (1.0 - rho1),
        psi=rho / (params.mu * (1.0 - rho)),
        alpha1=beta1 / (1.0 - rho1),
        h0=h0,
        stable=rho < 1.0,
    )


def _require_right_half_plane(s: np.ndarray) -> None:
    if np.any(s.real < 0):
        raise ValueError("LST requires Re(s) >= 0")


def service_equilibrium_lst(service: ServiceDistribution, s):
    """Equilibrium (stationary-excess) LST beta_e(s) = (1 - beta(s))/(beta1 s).

    Evaluated directly as the transform of the scaled survival function,
    beta_e(s) = (1/beta1) int_0^inf e^{-st} (1-F(t)) dt, which is stable at
    small |s| where the quotient form cancels; beta_e(0) = 1.
    Accepts scalars or arrays with Re(s) >= 0.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    _require_right_half_plane(s_arr)
    if isinstance(service, Pareto):
        out = _backend.pareto_eq_lst(service.a, service.x_m, s_arr)
    elif isinstance(service, Exponential):
        # exponential is its own equilibrium distribution
        out = service.rate / (service.rate + s_arr)
    else:
        # uniform on [0, value]
        out = _em1_ratio(s_arr * service.value)
    return out if np.ndim(s) else complex(out[0])


def service_lst(service: ServiceDistribution, s):
    """Service-time LST beta(s) = int e^{-st} dF(t) for Re(s) >= 0.

    For Pareto this evaluates beta = 1 - beta1 * s * beta_e(s) with beta_e
    from the survival-transform quadrature; |beta(s)| <= 1 and beta(0) = 1.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    _require_right_half_plane(s_arr)
    if isinstance(service, Pareto):
        beta1 = service_mean(service)
        out = 1.0 - beta1 * s_arr * _backend.pareto_eq_lst(service.a, service.x_m, s_arr)
    elif isinstance(service, Exponential):
        out = service.rate / (service.rate + s_arr)
    else:
        out = np.exp(-s_arr * service.value)
    return out if np.ndim(s) else complex(out[0])


# (1 - e^{-w})/w with a small-|w| series; used for the deterministic family
_EM1_COEF = np.array([1.0 / math.factorial(k + 1) for k in range(13)])


def _em1_ratio(w: np.ndarray) -> np.ndarray:
    out = np.empty_like(w)
    small = np.abs(w) < 0.05
    wb = w[~small]
    out[~small] = (1.0 - np.exp(-wb)) / wb
    ws = w[small]
    acc = np.full_like(ws, _EM1_COEF[12])
    for k in range(11, -1, -1):
        acc = acc * (-ws) + _EM1_COEF[k]
    out[small] = acc
    return out


def sample_service(service: ServiceDistribution, rng: np.random.Generator, size=None):
    """Draw service times by exact inverse CDF."""
    u = rng.random(size)
    if isinstance(service, Pareto):
        return service.x_m * (1.0 - u) ** (-1.0 / service.a)
    if isinstance(service, Exponential):
        return -np.log1p(-u) / service.rate
    return np.full_like(np.asarray(u, dtype=float), service.value) if size is not None \
        else service.value


def sample_service_equilibrium(service: ServiceDistribution, rng: np.random.Generator,
                               size=None):
    """Draw from the equilibrium distribution F_e(x) = (1/beta1) int_0^x (1-F).

    Pareto: F_e is linear below x_m and power-law above; inverted piecewise.
    Exponential: equilibrium equals the original law.  Deterministic:
    uniform on [0, value].
    """
    u = rng.random(size)
    if isinstance(service, Pareto):
        a, xm = service.a, service.x_m
        beta1 = service_mean(service)
        knee = 1.0 - 1.0 / a  # F_e(x_m)
        u = np.asarray(u)
        below = u * beta1
        above = xm * (a * (1.0 - u)) ** (-1.0 / (a - 1.0))
        out = np.where(u <= knee, below, above)
        return out if size is not None else float(out)
    if isinstance(service, Exponential):
        return -np.log1p(-u) / service.rate
    return u * service.value
