"""Scalar transform kernels of the stationary analysis.

All kernels live on the closed right half-plane Re(s) >= 0 (equivalently
|z| <= 1 after the Poisson-count substitution s = c(1-z)) and map it into
the closed unit disk:

  alpha  -- busy-period LST of the M/G/1 queue with arrival rate lambda1,
            the unique fixed point alpha(s) = beta(s + lambda1 - lambda1*alpha(s))
  h      -- alpha(lambda2 - lambda2 z), the orbit-arrival count transform
  kappa  -- geometric compound of equilibrium busy periods
  omega  -- 1 - int_0^s kappa(u) du
  tau    -- exp(psi*(omega(s) - 1)), a Poisson compound of omega
  eta    -- 1 - vartheta + vartheta*kappa(s)
  xi     -- geometric compound of equilibrium services
  gamma  -- transform behind the conditional law of H2 given H1 = 0

Internally everything is expressed through D(s) = 1 - alpha(s), which the
backend iterates without cancellation, so quantities like kappa keep full
relative accuracy near s = 0.  Grid evaluation on inversion circles is
cached per context and reuses coarse-to-fine continuation for D.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from . import model as _model

__all__ = [
    "Tolerances", "TransformContext", "ConvergenceError", "QuadratureError",
    "alpha", "h", "kappa", "omega", "tau", "eta", "xi", "gamma_lst",
]


class ConvergenceError(RuntimeError):
    """Fixed-point iteration exhausted max_iter."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class Tolerances:
    fixed_point_tol: float = 1e-14
    quadrature_tol: float = 1e-12
    max_iter: int = 10 ** 6


def _service_code(service):
    if isinstance(service, _model.Pareto):
        return 0, service.a, service.x_m
    if isinstance(service, _model.Exponential):
        return 1, service.rate, 0.0
    return 2, service.value, 0.0


@dataclass
class TransformContext:
    """Immutable bundle of parameters, derived scalars and tolerances.

    Carries a write-once cache for grid evaluations; all kernel evaluations
    are pure and safe to call concurrently.
    """
    params: _model.ModelParams
    derived: _model.DerivedQuantities = None
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        recomputed = _model.derive(self.params)
        if self.derived is None:
            self.derived = recomputed
        else:
            for name in ("lambda1", "lambda2", "rho1", "rho2", "rho",
                         "vartheta", "psi", "alpha1", "h0"):
                if abs(getattr(self.derived, name) - getattr(recomputed, name)) > 1e-12:
                    raise ValueError(f"derived quantities inconsistent with params ({name})")
        self._cache = {}
        self._lock = threading.Lock()
        self._kind, self._pa, self._pb = _service_code(self.params.service)
        self._beta1 = _model.service_mean(self.params.service)

    # -- service transform helpers (array in, array out) --

    def eq_lst(self, s):
        s = np.asarray(s, dtype=complex)
        if self._kind == 0:
            return _backend.pareto_eq_lst(self._pa, self._pb, s)
        return np.atleast_1d(_model.service_equilibrium_lst(self.params.service, s))

    def one_minus_beta(self, s):
        # 1 - beta(s) = beta1 * s * beta_e(s), exact arithmetic
        s = np.asarray(s, dtype=complex)
        return self._beta1 * s * self.eq_lst(s)

    def beta(self, s):
        return 1.0 - self.one_minus_beta(s)

    def one_minus_alpha(self, s, warm=None):
        """D(s) = 1 - alpha(s) by Picard iteration (contraction rho1 < 1)."""
        s = np.asarray(s, dtype=complex)
        if np.any(s.real < -1e-15):
            raise ValueError("alpha requires Re(s) >= 0")
        try:
            D, _ = _backend.solve_one_minus_alpha(
                self._kind, self._pa, self._pb, self.derived.lambda1, s,
                D0=warm, tol=self.tolerances.fixed_point_tol,
                maxit=self.tolerances.max_iter)
        except RuntimeError as exc:
            raise ConvergenceError(str(exc)) from exc
        return D

    def circle_grid(self, n):
        """Cached kernel arrays on the half circle z = e^{2 pi i k/n}, k=0..n/2."""
        with self._lock:
            grid = self._cache.get(n)
            if grid is None:
                grid = CircleGrid(self, n)
                self._cache[n] = grid
            return grid


def _as_complex_array(s):
    arr = np.atleast_1d(np.asarray(s, dtype=complex))
    return arr, np.ndim(s) == 0


def _check_rhp(arr):
    if np.any(arr.real < -1e-15):
        raise ValueError("transform kernels require Re(s) >= 0")


def alpha(ctx: TransformContext, s):
    """Busy-period LST alpha(s), Re(s) >= 0; alpha(0) = 1 when rho1 < 1."""
    arr, scalar = _as_complex_array(s)
    _check_rhp(arr)
    out = 1.0 - ctx.one_minus_alpha(arr)
    return complex(out[0]) if scalar else out


def h(ctx: TransformContext, z):
    """h(z) = alpha(lambda2 - lambda2 z) on the closed unit disk."""
    arr, scalar = _as_complex_array(z)
    if np.any(np.abs(arr) > 1.0 + 1e-12):
        raise ValueError("h requires |z| <= 1")
    out = 1.0 - ctx.one_minus_alpha(ctx.derived.lambda2 * (1.0 - arr))
    return complex(out[0]) if scalar else out


def _kappa_from_D(ctx, s, D):
    d = ctx.derived
    out = np.ones(s.shape, dtype=complex)
    tiny = np.abs(s) < 1e-10
    nz = ~tiny
    out[nz] = (1.0 - d.rho) / ctx._beta1 * D[nz] / (s[nz] - d.lambda2 * D[nz])
    # |s| < 1e-10: geometric-compound form with alpha_e -> 1 (continuous limit)
    return out


def kappa(ctx: TransformContext, s):
    """kappa(s) = (1-rho)/beta1 * (1-alpha(s)) / (s - lambda2 + lambda2 alpha(s)).

    Equals the geometric compound (1-vartheta) alpha_e(s) / (1 - vartheta
    alpha_e(s)); kappa(0) = 1.
    """
    arr, scalar = _as_complex_array(s)
    _check_rhp(arr)
    D = ctx.one_minus_alpha(arr)
    out = _kappa_from_D(ctx, arr, D)
    return complex(out[0]) if scalar else out


_OMEGA_LEVELS = 40


def _omega_segment_nodes(gln):
    # geometric panels on (0, 1] refined toward the branch point at 0
    x, w = np.polynomial.legendre.leggauss(gln)
    xs, ws = [], []
    for j in range(_OMEGA_LEVELS):
        hi, lo = 2.0 ** (-j), 2.0 ** (-j - 1)
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        xs.append(mid + half * x)
        ws.append(half * w)
    xs.append(np.array([2.0 ** (-_OMEGA_LEVELS - 1)]))
    ws.append(np.array([2.0 ** (-_OMEGA_LEVELS)]))
    return np.concatenate(xs), np.concatenate(ws)


def _omega_segment(ctx, svals, gln):
    # omega along the straight segment 0 -> s (stays in Re >= 0 by convexity)
    xs, ws = _omega_segment_nodes(gln)
    u = (svals[:, None] * xs[None, :]).ravel()
    D = ctx.one_minus_alpha(u)
    k = _kappa_from_D(ctx, u, D).reshape(svals.size, xs.size)
    return 1.0 - svals * (k @ ws)


def omega(ctx: TransformContext, s):
    """omega(s) = 1 - int_0^s kappa(u) du along the straight segment from 0.

    Composite Gauss-Legendre on panels refined geometrically toward the
    branch point at u = 0; the node count is doubled until two estimates
    agree within quadrature_tol.
    """
    arr, scalar = _as_complex_array(s)
    _check_rhp(arr)
    out = np.ones(arr.shape, dtype=complex)
    nz = np.abs(arr) > 0
    sv = arr[nz]
    if sv.size:
        est = _omega_segment(ctx, sv, 16)
        ref = _omega_segment(ctx, sv, 32)
        if np.max(np.abs(est - ref)) > ctx.tolerances.quadrature_tol:
            est, ref = ref, _omega_segment(ctx, sv, 64)
            if np.max(np.abs(est - ref)) > ctx.tolerances.quadrature_tol:
                raise QuadratureError("omega quadrature did not settle")
        out[nz] = ref
    return complex(out[0]) if scalar else out


def tau(ctx: TransformContext, s):
    """tau(s) = exp(psi*omega(s) - psi); tau(0) = 1."""
    om = omega(ctx, s)
    return np.exp(ctx.derived.psi * (om - 1.0))


def eta(ctx: TransformContext, s):
    """eta(s) = 1 - vartheta + vartheta*kappa(s)."""
    return 1.0 - ctx.derived.vartheta + ctx.derived.vartheta * kappa(ctx, s)


def xi(ctx: TransformContext, s):
    """xi(s) = (1-rho1) beta_e(s) / (1 - rho1 beta_e(s)); xi(0) = 1."""
    arr, scalar = _as_complex_array(s)
    _check_rhp(arr)
    be = ctx.eq_lst(arr)
    out = (1.0 - ctx.derived.rho1) * be / (1.0 - ctx.derived.rho1 * be)
    return complex(out[0]) if scalar else out


def gamma_lst(ctx: TransformContext, s, form="direct"):
    """Transform of the conditional orbit-increment law behind H2 | H1 = 0.

    form="direct": [beta(s+lambda1-lambda1*alpha(s)) - beta(s+lambda1)]
                   / [(1-beta(lambda1)) * alpha(s)]
    form="ratio":  [1 - beta(s+lambda1)/alpha(s)] / (1-beta(lambda1))

    The two are algebraically equal through the fixed-point identity of
    alpha; gamma(0) = 1.
    """
    arr, scalar = _as_complex_array(s)
    _check_rhp(arr)
    d = ctx.derived
    D = ctx.one_minus_alpha(arr)
    al = 1.0 - D
    bl1 = ctx.beta(np.array([d.lambda1], dtype=complex))[0]
    beta_shift = ctx.beta(arr + d.lambda1)
    if form == "ratio":
        out = (1.0 - beta_shift / al) / (1.0 - bl1)
    elif form == "direct":
        num = ctx.beta(arr + d.lambda1 * D) - beta_shift
        out = num / ((1.0 - bl1) * al)
    else:
        raise ValueError("form must be 'direct' or 'ratio'")
    return complex(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# grid evaluation on inversion circles
# ---------------------------------------------------------------------------

_CONTINUATION_BASE = 2 ** 13
_OMEGA_EXACT_STARTS = 32


class CircleGrid:
    """Kernel arrays on the half grid z_k = e^{2 pi i k/n}, k = 0..n/2.

    Built lazily; D is solved with coarse-to-fine continuation (the n/2 grid
    interleaves), omega is integrated cumulatively along the circle with the
    first few points pinned by the straight-segment rule.
    """

    def __init__(self, ctx, n):
        if n < 2 or n & (n - 1):
            raise ValueError("grid size must be a power of two")
        self.ctx = ctx
        self.n = n
        self.theta = 2.0 * np.pi * np.arange(n // 2 + 1) / n
        self.z = np.exp(1j * self.theta)
        self._vals = {}

    def _get(self, name, build):
        v = self._vals.get(name)
        if v is None:
            v = build()
            self._vals[name] = v
        return v

    # grid arguments
    @property
    def s2(self):
        return self._get("s2", lambda: self.ctx.derived.lambda2 * (1.0 - self.z))

    @property
    def s1(self):
        return self._get("s1", lambda: self.ctx.derived.lambda1 * (1.0 - self.z))

    @property
    def D2(self):
        """1 - alpha on the lambda2 grid, via continuation from coarser grids."""
        def build():
            ctx, n = self.ctx, self.n
            if n <= _CONTINUATION_BASE:
                return ctx.one_minus_alpha(self.s2)
            coarse = ctx.circle_grid(n // 2).D2
            D0 = np.empty(n // 2 + 1, dtype=complex)
            D0[0::2] = coarse
            pad = np.empty(coarse.size + 2, dtype=complex)
            pad[1:-1] = coarse
            pad[0] = np.conj(coarse[1])      # conjugate symmetry across theta=0
            pad[-1] = np.conj(coarse[-2])    # and across theta=pi
            D0[1::2] = (-pad[:-3] + 9.0 * pad[1:-2] + 9.0 * pad[2:-1] - pad[3:]) / 16.0
            return ctx.one_minus_alpha(self.s2, warm=D0)
        return self._get("D2", build)

    @property
    def h(self):
        return self._get("h", lambda: 1.0 - self.D2)

    @property
    def kappa2(self):
        return self._get("kappa2", lambda: _kappa_from_D(self.ctx, self.s2, self.D2))

    @property
    def omega2(self):
        """omega on the lambda2 grid: straight-segment starts, then a
        cumulative 4-point rule along the circle (path-independent since
        kappa is analytic off the origin in the closed right half-plane)."""
        def build():
            ctx = self.ctx
            th, s2 = self.theta, self.s2
            m = th.size
            k0 = _OMEGA_EXACT_STARTS
            if m <= 4 * k0:
                out = np.ones(m, dtype=complex)
                out[1:] = _omega_segment(ctx, s2[1:], 32)
                return out
            f = self.kappa2 * (-1j) * ctx.derived.lambda2 * np.exp(1j * th)
            hstep = th[1] - th[0]
            pan = np.empty(m - 1, dtype=complex)
            pan[1:m - 2] = hstep * (-f[0:m - 3] + 13.0 * f[1:m - 2]
                                    + 13.0 * f[2:m - 1] - f[3:m]) / 24.0
            pan[0] = hstep * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0
            pan[m - 2] = hstep * (f[m - 4] - 5.0 * f[m - 3]
                                  + 19.0 * f[m - 2] + 9.0 * f[m - 1]) / 24.0
            om = np.empty(m, dtype=complex)
            om[0] = 1.0
            om[1:] = 1.0 - np.cumsum(pan)
            exact = _omega_segment(ctx, s2[1:k0 + 1], 32)
            om[k0 + 1:] += exact[-1] - om[k0]
            om[1:k0 + 1] = exact
            return om
        return self._get("omega2", build)

    @property
    def tau2(self):
        return self._get("tau2", lambda: np.exp(self.ctx.derived.psi * (self.omega2 - 1.0)))

    @property
    def eta2(self):
        vth = self.ctx.derived.vartheta
        return self._get("eta2", lambda: 1.0 - vth + vth * self.kappa2)

    @property
    def eq_lst1(self):
        return self._get("eq_lst1", lambda: self.ctx.eq_lst(self.s1))

    @property
    def xi1(self):
        def build():
            r1 = self.ctx.derived.rho1
            be = self.eq_lst1
            return (1.0 - r1) * be / (1.0 - r1 * be)
        return self._get("xi1", build)

    @property
    def beta_s2_lambda1(self):
        """beta(s2 + lambda1) = beta(lambda - lambda2 z) on the grid."""
        return self._get("beta_s2_lambda1",
                         lambda: self.ctx.beta(self.s2 + self.ctx.derived.lambda1))

    @property
    def gamma2(self):
        def build():
            d = self.ctx.derived
            bl1 = self.ctx.beta(np.array([d.lambda1], dtype=complex))[0]
            return (1.0 - self.beta_s2_lambda1 / (1.0 - self.D2)) / (1.0 - bl1)
        return self._get("gamma2", build)
