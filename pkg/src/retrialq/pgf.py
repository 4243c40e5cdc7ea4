"""Stationary generating functions of the queue assembled from the kernels.

Conditioned on an idle server, the orbit size has PGF R0; conditioned on a
busy server, (queue, orbit) has the two-dimensional PGF R1, which factors
into four independent pieces:

    R1(z1,z2) = Ma(z1,z2) * Mb(z1,z2) * Mc(z2) * R0(z2)

Ma is an equilibrium-service Poisson count split across queue/orbit, Mb a
geometric sum of the two-dimensional H increments, Mc an orbit-only factor,
and R0 the idle-orbit PGF.  Each factory returns an evaluable handle; where
two independent formulas exist (R0, Mc) both are exposed and the test suite
holds them against each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import transforms as _tr

__all__ = [
    "PgfHandle", "R0_pgf", "R0_integral_pgf", "Ma_pgf", "H_pgf", "Mb_pgf",
    "Mc_pgf", "Mc_rational_pgf", "R1_pgf", "marginal_R11_pgf",
    "marginal_R12_pgf", "cond_R12_given_R11_0_pgf", "cond_H2_given_H1_0_pgf",
]


@dataclass(frozen=True)
class PgfHandle:
    """Evaluable probability generating function.

    eval   -- z -> value (arity 1) or (z1, z2) -> value (arity 2); accepts
              scalars or arrays on the closed unit polydisk
    grid   -- optional fast evaluator on the half circle exp(2 pi i k/N),
              k = 0..N/2 (arity 1)
    grid2  -- optional full-torus evaluator (arity 2)
    """
    label: str
    arity: int
    eval: Callable
    grid: Callable | None = None
    grid2: Callable | None = None

    def __call__(self, *z):
        return self.eval(*z)

    def unit_circle(self, n):
        """Values at z_k = exp(2 pi i k/n), k = 0..n/2."""
        if self.arity != 1:
            raise ValueError("unit_circle applies to arity-1 handles")
        if self.grid is not None:
            return self.grid(n)
        theta = 2.0 * np.pi * np.arange(n // 2 + 1) / n
        return np.asarray(self.eval(np.exp(1j * theta)), dtype=complex)

    def torus(self, n1, n2):
        """Values at (z1_j, z2_k) over the full n1 x n2 torus."""
        if self.arity != 2:
            raise ValueError("torus applies to arity-2 handles")
        if self.grid2 is not None:
            return self.grid2(n1, n2)
        w1 = np.exp(2j * np.pi * np.arange(n1) / n1)
        w2 = np.exp(2j * np.pi * np.arange(n2) / n2)
        return np.asarray(self.eval(w1[:, None], w2[None, :]), dtype=complex)


def R0_pgf(ctx) -> PgfHandle:
    """Orbit-size PGF given an idle server: tau(lambda2 - lambda2 z)."""
    lam2 = ctx.derived.lambda2

    def ev(z):
        return _tr.tau(ctx, lam2 * (1.0 - np.asarray(z, dtype=complex)))

    return PgfHandle("R0", 1, ev, grid=lambda n: ctx.circle_grid(n).tau2)


def R0_integral_pgf(ctx) -> PgfHandle:
    """Secondary route for R0: exp{-(lam/mu) int_z^1 (1-h(u))/(h(u)-u) du}.

    The integrand's removable singularity at u = 1 (limit vartheta/(1 -
    vartheta)) is resolved by panels refined geometrically toward 1.
    """
    d = ctx.derived
    ratio = ctx.params.lam / ctx.params.mu
    xs, ws = _tr._omega_segment_nodes(16)

    def ev(z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        seg = 1.0 - z
        u = (1.0 - seg[:, None] * xs[None, :]).ravel()
        D = ctx.one_minus_alpha(d.lambda2 * (1.0 - u))
        integ = (D / ((1.0 - u) - D)).reshape(z.size, xs.size)
        val = np.exp(-ratio * seg * (integ @ ws))
        return val if val.size > 1 else complex(val[0])

    return PgfHandle("R0_integral", 1, ev)


def Ma_pgf(ctx) -> PgfHandle:
    """Split equilibrium-service Poisson count: beta_e(lam - lam1 z1 - lam2 z2)."""
    d = ctx.derived
    lam = ctx.params.lam

    def ev(z1, z2):
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        s = lam - d.lambda1 * z1 - d.lambda2 * z2
        out = ctx.eq_lst(np.atleast_1d(s))
        return out.reshape(np.broadcast(z1, z2).shape) if np.ndim(s) else complex(out[0])

    return PgfHandle("Ma", 2, ev)


def _neg_beta_prime(ctx, w):
    """-beta'(w) for Re(w) >= 0 via an imaginary-direction central step."""
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    out = np.empty_like(w)
    tiny = np.abs(w) < 1e-12
    out[tiny] = ctx._beta1
    if np.any(~tiny):
        delta = 1e-5
        wb = w[~tiny]
        out[~tiny] = -(ctx.beta(wb + 1j * delta) - ctx.beta(wb - 1j * delta)) / (2j * delta)
    return out


def H_pgf(ctx) -> PgfHandle:
    """Two-dimensional increment PGF H(z1,z2).

    H = (1/rho1) [beta(lam - lam1 z1 - lam2 z2) - h(z2)] / (z1 - h(z2)),
    with the removable singularity at z1 = h(z2) patched by the derivative
    form (lam1/rho1) * (-beta'(lam - lam1 z1 - lam2 z2)) inside a guard
    radius of 1e-6; H(1,1) = 1.
    """
    d = ctx.derived
    lam = ctx.params.lam

    def ev(z1, z2):
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        shape = np.broadcast(z1, z2).shape
        z1b = np.broadcast_to(z1, shape).ravel()
        z2b = np.broadcast_to(z2, shape).ravel()
        w = lam - d.lambda1 * z1b - d.lambda2 * z2b
        hz = 1.0 - ctx.one_minus_alpha(d.lambda2 * (1.0 - z2b))
        denom = z1b - hz
        out = np.empty(z1b.shape, dtype=complex)
        near = np.abs(denom) < 1e-6
        far = ~near
        if np.any(far):
            out[far] = (ctx.beta(w[far]) - hz[far]) / denom[far] / d.rho1
        if np.any(near):
            out[near] = d.lambda1 / d.rho1 * _neg_beta_prime(ctx, w[near])
        return out.reshape(shape) if shape else complex(out[0])

    return PgfHandle("H", 2, ev)


def Mb_pgf(ctx) -> PgfHandle:
    """Geometric sum of H increments: (1-rho1) / (1 - rho1 H(z1,z2))."""
    r1 = ctx.derived.rho1
    Hh = H_pgf(ctx)

    def ev(z1, z2):
        return (1.0 - r1) / (1.0 - r1 * Hh.eval(z1, z2))

    return PgfHandle("Mb", 2, ev)


def Mc_pgf(ctx) -> PgfHandle:
    """Orbit-only factor: eta(lambda2 - lambda2 z)."""
    lam2 = ctx.derived.lambda2

    def ev(z):
        return _tr.eta(ctx, lam2 * (1.0 - np.asarray(z, dtype=complex)))

    return PgfHandle("Mc", 1, ev, grid=lambda n: ctx.circle_grid(n).eta2)


def Mc_rational_pgf(ctx) -> PgfHandle:
    """Secondary route for Mc: (1-rho)/(1-rho1) * (1-z)/(h(z)-z).

    The removable singularity at z = 1 is patched by its limit 1 inside a
    guard radius of 1e-8.
    """
    d = ctx.derived
    c = (1.0 - d.rho) / (1.0 - d.rho1)

    def ev(z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.ones(z.shape, dtype=complex)
        ok = np.abs(1.0 - z) >= 1e-8
        if np.any(ok):
            hz = _tr.h(ctx, z[ok])
            out[ok] = c * (1.0 - z[ok]) / (hz - z[ok])
        return out if out.size > 1 else complex(out[0])

    return PgfHandle("Mc_rational", 1, ev)


def R1_pgf(ctx) -> PgfHandle:
    """Joint (queue, orbit) PGF given a busy server: the four-factor product."""
    Ma = Ma_pgf(ctx)
    Mb = Mb_pgf(ctx)
    Mc = Mc_pgf(ctx)
    R0 = R0_pgf(ctx)

    def ev(z1, z2):
        return Ma.eval(z1, z2) * Mb.eval(z1, z2) * Mc.eval(z2) * R0.eval(z2)

    def grid2(n1, n2):
        w1 = np.exp(2j * np.pi * np.arange(n1) / n1)
        w2 = np.exp(2j * np.pi * np.arange(n2) / n2)
        col = Mc.eval(w2) * R0.eval(w2)            # shared z2 factors, one row
        return Ma.eval(w1[:, None], w2[None, :]) \
            * Mb.eval(w1[:, None], w2[None, :]) * col[None, :]

    return PgfHandle("R1", 2, ev, grid2=grid2)


def marginal_R11_pgf(ctx) -> PgfHandle:
    """Queue-size PGF given busy: xi(lambda1 - lambda1 z)."""
    lam1 = ctx.derived.lambda1

    def ev(z):
        return _tr.xi(ctx, lam1 * (1.0 - np.asarray(z, dtype=complex)))

    return PgfHandle("R11", 1, ev, grid=lambda n: ctx.circle_grid(n).xi1)


def marginal_R12_pgf(ctx) -> PgfHandle:
    """Orbit-size PGF given busy: kappa * tau composed with lambda2(1-z)."""
    lam2 = ctx.derived.lambda2

    def ev(z):
        s = lam2 * (1.0 - np.asarray(z, dtype=complex))
        return _tr.kappa(ctx, s) * _tr.tau(ctx, s)

    def grid(n):
        ws = ctx.circle_grid(n)
        return ws.kappa2 * ws.tau2

    return PgfHandle("R12", 1, ev, grid=grid)


def cond_R12_given_R11_0_pgf(ctx) -> PgfHandle:
    """Orbit-size PGF given busy server and empty queue.

    By independence of the four summands of (R11, R12):
    [Ma(0,z)/Ma(0,1)] * [Mb(0,z)/Mb(0,1)] * Mc(z) * R0(z), where
    Ma(0,z) = beta_e(lam - lam2 z) and Mb(0,z) runs through H(0,z).
    """
    d = ctx.derived
    ma01 = d.h0                                   # beta_e(lambda1)
    mb01 = (1.0 - d.rho1) / (1.0 - d.rho1 * d.h0)
    Mc = Mc_pgf(ctx)
    R0 = R0_pgf(ctx)

    def ev(z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        s2 = d.lambda2 * (1.0 - z)
        ma = ctx.eq_lst(s2 + d.lambda1)
        hz = 1.0 - ctx.one_minus_alpha(s2)
        h0z = (hz - ctx.beta(s2 + d.lambda1)) / (d.rho1 * hz)
        mb = (1.0 - d.rho1) / (1.0 - d.rho1 * h0z)
        out = (ma / ma01) * (mb / mb01) * Mc.eval(z) * R0.eval(z)
        return out if out.size > 1 else complex(out[0])

    def grid(n):
        ws = ctx.circle_grid(n)
        ma = ctx.eq_lst(ws.s2 + d.lambda1)
        h0z = (ws.h - ws.beta_s2_lambda1) / (d.rho1 * ws.h)
        mb = (1.0 - d.rho1) / (1.0 - d.rho1 * h0z)
        return (ma / ma01) * (mb / mb01) * ws.eta2 * ws.tau2

    return PgfHandle("R12_given_R11_0", 1, ev, grid=grid)


def cond_H2_given_H1_0_pgf(ctx) -> PgfHandle:
    """PGF of H2 given H1 = 0: gamma(lambda2 - lambda2 z) = H(0,z)/H(0,1)."""
    lam2 = ctx.derived.lambda2

    def ev(z):
        return _tr.gamma_lst(ctx, lam2 * (1.0 - np.asarray(z, dtype=complex)))

    return PgfHandle("H2_given_H1_0", 1, ev, grid=lambda n: ctx.circle_grid(n).gamma2)
