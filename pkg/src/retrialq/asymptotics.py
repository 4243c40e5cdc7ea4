"""Closed-form regularly-varying tail laws and tools to confront them.

Under a Pareto service tail P{T > t} = (x_m/t)^a (so L = x_m^a is a
constant slowly varying factor), every stationary count studied here has a
power-law tail C * L * j^{-sigma}.  The constants chain through three
transfer rules: Karamata/compound transfer for geometric and Poisson sums,
Poisson-count transfer P{N_lam(T) > j} ~ P{T > j/lam} (multiplying C by
lam^sigma), and tail dominance of independent sums.  Orbit-given-idle
decays with index a, every busy-server count with the heavier index a-1.

Light-tailed services (exponential, deterministic) admit no such law;
every constructor rejects them with LightTailError.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import model as _model

__all__ = [
    "LightTailError", "TailLaw", "SlopeFit",
    "c_kappa", "tail_T_alpha", "tail_T_kappa", "tail_T_omega", "tail_T_tau",
    "tail_T_xi", "tail_R0", "tail_R11", "tail_R12", "tail_Mc",
    "tail_H2_given_H1_0", "tail_Mb2_given_Mb1_0", "tail_R12_given_R11_0",
    "fit_loglog", "tail_law_to_json",
]


class LightTailError(ValueError):
    """Raised when a regular-variation law is requested for a light tail."""


@dataclass(frozen=True)
class TailLaw:
    """Asymptotic predictor P{X > j} ~ C * L * j^(-sigma)."""
    target: str
    sigma: float
    C: float
    L: float

    def __post_init__(self):
        if not (self.sigma > 0 and self.C > 0 and self.L > 0):
            raise ValueError("tail law requires sigma, C, L > 0")

    def predict(self, j):
        return self.C * self.L * np.asarray(j, dtype=float) ** (-self.sigma)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    range: tuple
    residual: float


def _heavy(ctx):
    svc = ctx.params.service
    if not isinstance(svc, _model.Pareto):
        raise LightTailError(
            f"{svc.kind} service is light-tailed: no regular-variation tail law")
    return svc.a, svc.x_m ** svc.a


def c_kappa(ctx) -> float:
    """Constant of the T_kappa tail: 1/(beta1 (1-rho)(a-1)(1-rho1)^{a-1})."""
    a, _ = _heavy(ctx)
    d = ctx.derived
    beta1 = _model.service_mean(ctx.params.service)
    return 1.0 / (beta1 * (1.0 - d.rho) * (a - 1.0) * (1.0 - d.rho1) ** (a - 1.0))


def tail_T_alpha(ctx) -> TailLaw:
    """Busy period: P{T_alpha > t} ~ (1-rho1)^{-(a+1)} t^{-a} L(t)."""
    a, L = _heavy(ctx)
    return TailLaw("T_alpha", a, (1.0 - ctx.derived.rho1) ** (-(a + 1.0)), L)


def tail_T_kappa(ctx) -> TailLaw:
    a, L = _heavy(ctx)
    return TailLaw("T_kappa", a - 1.0, c_kappa(ctx), L)


def tail_T_omega(ctx) -> TailLaw:
    a, L = _heavy(ctx)
    return TailLaw("T_omega", a, (1.0 - 1.0 / a) * c_kappa(ctx), L)


def tail_T_tau(ctx) -> TailLaw:
    a, L = _heavy(ctx)
    return TailLaw("T_tau", a, (1.0 - 1.0 / a) * c_kappa(ctx) * ctx.derived.psi, L)


def tail_T_xi(ctx) -> TailLaw:
    """Geometric sum of equilibrium services: C = 1/((1-rho1)(a-1) beta1)."""
    a, L = _heavy(ctx)
    beta1 = _model.service_mean(ctx.params.service)
    return TailLaw("T_xi", a - 1.0,
                   1.0 / ((1.0 - ctx.derived.rho1) * (a - 1.0) * beta1), L)


def tail_R0(ctx) -> TailLaw:
    """Orbit given idle: C = lam lam2^a / (a mu (1-rho)^2 (1-rho1)^{a-1})."""
    a, L = _heavy(ctx)
    d = ctx.derived
    C = (ctx.params.lam * d.lambda2 ** a
         / (a * ctx.params.mu * (1.0 - d.rho) ** 2 * (1.0 - d.rho1) ** (a - 1.0)))
    return TailLaw("R0", a, C, L)


def tail_R11(ctx) -> TailLaw:
    """Queue given busy: C = lam1^{a-1} / ((1-rho1)(a-1) beta1)."""
    a, L = _heavy(ctx)
    d = ctx.derived
    beta1 = _model.service_mean(ctx.params.service)
    C = d.lambda1 ** (a - 1.0) / ((1.0 - d.rho1) * (a - 1.0) * beta1)
    return TailLaw("R11", a - 1.0, C, L)


def tail_R12(ctx) -> TailLaw:
    """Orbit given busy: C = lam2^{a-1} / (beta1 (1-rho)(a-1)(1-rho1)^{a-1})."""
    a, L = _heavy(ctx)
    d = ctx.derived
    beta1 = _model.service_mean(ctx.params.service)
    C = (d.lambda2 ** (a - 1.0)
         / (beta1 * (1.0 - d.rho) * (a - 1.0) * (1.0 - d.rho1) ** (a - 1.0)))
    return TailLaw("R12", a - 1.0, C, L)


def tail_Mc(ctx) -> TailLaw:
    """Mc factor: C = lam2^a / ((1-rho)(a-1)(1-rho1)^a)."""
    a, L = _heavy(ctx)
    d = ctx.derived
    C = d.lambda2 ** a / ((1.0 - d.rho) * (a - 1.0) * (1.0 - d.rho1) ** a)
    return TailLaw("Mc", a - 1.0, C, L)


def tail_H2_given_H1_0(ctx) -> TailLaw:
    """H2 given H1=0: C = [beta(lam1)/(1-beta(lam1))] lam2^a/(1-rho1)^{a+1}."""
    a, L = _heavy(ctx)
    d = ctx.derived
    bl1 = float(_model.service_lst(ctx.params.service, d.lambda1).real)
    C = bl1 / (1.0 - bl1) * d.lambda2 ** a / (1.0 - d.rho1) ** (a + 1.0)
    return TailLaw("H2_given_H1_0", a, C, L)


def tail_Mb2_given_Mb1_0(ctx) -> TailLaw:
    """Mb2 given Mb1=0: the geometric sum over H copies concentrates a
    factor rho1 h0/(1 - rho1 h0) onto the H2|H1=0 constant."""
    a, L = _heavy(ctx)
    d = ctx.derived
    base = tail_H2_given_H1_0(ctx)
    C = d.rho1 * d.h0 / (1.0 - d.rho1 * d.h0) * base.C
    return TailLaw("Mb2_given_Mb1_0", a, C, L)


def tail_R12_given_R11_0(ctx) -> TailLaw:
    """Orbit given busy server and empty queue: Mc dominates the sum, so the
    law coincides with tail_Mc."""
    law = tail_Mc(ctx)
    return TailLaw("R12_given_R11_0", law.sigma, law.C, law.L)


def fit_loglog(ccdf_values, j_lo: int, j_hi: int, npoints: int = 24) -> SlopeFit:
    """Least-squares slope of log c_j against log j on log-spaced indices.

    Requires j_hi/j_lo >= 10, at least 10 usable points, and strictly
    positive ccdf values across the range.
    """
    values = getattr(ccdf_values, "values", ccdf_values)
    if j_hi < 10 * j_lo:
        raise ValueError("fit range must span at least one decade")
    js = np.unique(np.round(np.geomspace(j_lo, j_hi, max(npoints, 10))).astype(int))
    if js.size < 10:
        raise ValueError("need at least 10 distinct fit points")
    c = np.asarray(values, dtype=float)[js]
    if np.any(c <= 0.0):
        raise ValueError("ccdf must be strictly positive on the fit range")
    x = np.log(js.astype(float))
    y = np.log(c)
    A = np.vstack([x, np.ones_like(x)]).T
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ sol - y) ** 2)))
    return SlopeFit(slope=float(sol[0]), intercept=float(sol[1]),
                    range=(int(j_lo), int(j_hi)), residual=resid)


def tail_law_to_json(law: TailLaw) -> str:
    return json.dumps({"target": law.target, "sigma": law.sigma,
                       "C": law.C, "L": law.L}, sort_keys=True)
