"""Discrete-event simulation of the physical queue plus brute-force oracles.

The DES follows the physical rules directly (Poisson arrivals, Bernoulli
routing of blocked arrivals, head-of-queue priority at completions,
per-customer Poisson retrials realized as an Exponential(n*mu) race, which
is equivalent by memorylessness and O(1) per event).  Statistics are
time-weighted joint histograms collected after a warmup, split into batches
for batch-means standard errors.

The decomposition-based samplers and quadrature oracles below give routes
to the same distributions that share nothing with the transform/inversion
pipeline, which is what makes the cross-checks in the test suite binding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from . import _backend
from . import model as _model
from .inversion import Pmf
from .transforms import _service_code

__all__ = [
    "SimConfig", "StatAccumulator", "run_des",
    "sample_busy_period", "sample_busy_periods",
    "sample_R11", "sample_R11_many",
    "oracle_pmf_R11", "oracle_joint_Ma",
]


@dataclass(frozen=True)
class SimConfig:
    """Run configuration: horizon/warmup in model time, explicit 64-bit seed.

    Histogram caps truncate only the recorded histograms (dynamics are
    exact); index cap+1 is the overflow cell, so normalization stays exact.
    Warmup defaults to 1% of the horizon.
    """
    horizon: float
    seed: int
    warmup: float | None = None
    queue_cap: int = 512
    orbit_cap: int = 4096
    replications: int = 1
    n_batches: int = 32

    def effective_warmup(self) -> float:
        w = 0.01 * self.horizon if self.warmup is None else self.warmup
        if not w < self.horizon:
            raise ValueError("warmup must be smaller than horizon")
        return w


@dataclass
class StatAccumulator:
    """Per-batch time-weighted histograms over (server state, queue, orbit).

    Rows are batches (replications contribute independent batches after an
    associative merge); columns are counts with the last column as the
    overflow cell.  Row sums of idle_orbit plus busy_queue reproduce the
    post-warmup time of each batch.
    """
    idle_orbit: np.ndarray
    busy_queue: np.ndarray
    busy_orbit: np.ndarray
    batch_length: float
    warmup: float
    events: int = 0
    seeds: tuple = ()

    def merge(self, other: "StatAccumulator") -> "StatAccumulator":
        if abs(self.batch_length - other.batch_length) > 1e-9:
            raise ValueError("cannot merge accumulators with different batch lengths")
        return StatAccumulator(
            idle_orbit=np.vstack([self.idle_orbit, other.idle_orbit]),
            busy_queue=np.vstack([self.busy_queue, other.busy_queue]),
            busy_orbit=np.vstack([self.busy_orbit, other.busy_orbit]),
            batch_length=self.batch_length,
            warmup=self.warmup,
            events=self.events + other.events,
            seeds=self.seeds + other.seeds,
        )

    def _batch_fractions(self, which: str) -> np.ndarray:
        busy_t = self.busy_queue.sum(axis=1)
        if which == "busy":
            return busy_t / self.batch_length
        return 1.0 - busy_t / self.batch_length

    def idle_probability(self) -> tuple[float, float]:
        """Batch-means estimate and standard error of P{server idle}."""
        fr = self._batch_fractions("idle")
        return float(fr.mean()), float(fr.std(ddof=1) / math.sqrt(fr.size))

    def utilization(self) -> tuple[float, float]:
        fr = self._batch_fractions("busy")
        return float(fr.mean()), float(fr.std(ddof=1) / math.sqrt(fr.size))

    _HISTS = {"orbit_given_idle": "idle_orbit",
              "queue_given_busy": "busy_queue",
              "orbit_given_busy": "busy_orbit"}

    def cond_pmf(self, which: str) -> np.ndarray:
        """Conditional pmf estimate (total weights normalized)."""
        h = getattr(self, self._HISTS[which])
        tot = h.sum()
        return h.sum(axis=0) / tot

    def cond_pmf_se(self, which: str) -> np.ndarray:
        """Per-cell standard errors from batch-level proportions."""
        h = getattr(self, self._HISTS[which])
        prop = h / h.sum(axis=1, keepdims=True)
        return prop.std(axis=0, ddof=1) / math.sqrt(prop.shape[0])


def run_des(params: _model.ModelParams, cfg: SimConfig) -> StatAccumulator:
    """Run cfg.replications independent replications and merge them."""
    violations = _model.validate(params)
    if violations:
        raise ValueError("invalid model parameters: " + "; ".join(violations))
    kind, pa, pb = _service_code(params.service)
    warmup = cfg.effective_warmup()
    acc = None
    for rep in range(cfg.replications):
        seed = _backend.replication_seed(cfg.seed, rep)
        idle_orbit, busy_queue, busy_orbit, events = _backend.des_run(
            kind, pa, pb, params.lam, params.q, params.mu,
            cfg.horizon, warmup, seed, cfg.queue_cap, cfg.orbit_cap,
            cfg.n_batches)
        one = StatAccumulator(
            idle_orbit=idle_orbit, busy_queue=busy_queue, busy_orbit=busy_orbit,
            batch_length=(cfg.horizon - warmup) / cfg.n_batches,
            warmup=warmup, events=events, seeds=(seed,))
        acc = one if acc is None else acc.merge(one)
    return acc


# ---------------------------------------------------------------------------
# decomposition samplers
# ---------------------------------------------------------------------------


def sample_busy_period(params: _model.ModelParams, rng: np.random.Generator) -> float:
    """One busy period of the M/G/1 queue with arrival rate lambda1.

    One initial service; each service's Poisson(lambda1 * length) arrivals
    add further services; ends when the backlog clears.
    """
    lam1 = params.lam * params.q
    pending = 1
    total = 0.0
    while pending > 0:
        svc = float(_model.sample_service(params.service, rng))
        total += svc
        pending += int(rng.poisson(lam1 * svc)) - 1
    return total


def sample_busy_periods(params: _model.ModelParams, n: int, seed: int) -> np.ndarray:
    """n busy periods through the backend loop (fast path for large n)."""
    kind, pa, pb = _service_code(params.service)
    return _backend.busy_periods(kind, pa, pb, params.lam * params.q, n, seed)


def sample_R11(params: _model.ModelParams, rng: np.random.Generator) -> int:
    """One draw of the queue length given busy, via the decomposition:
    Geometric(1-rho1) many equilibrium services, then a Poisson count."""
    d = _model.derive(params)
    j = int(rng.geometric(1.0 - d.rho1))
    total = float(np.sum(_model.sample_service_equilibrium(params.service, rng, size=j)))
    return int(rng.poisson(d.lambda1 * total))


def sample_R11_many(params: _model.ModelParams, n: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Vectorized batch of sample_R11 draws."""
    d = _model.derive(params)
    js = rng.geometric(1.0 - d.rho1, size=n)
    draws = _model.sample_service_equilibrium(params.service, rng, size=int(js.sum()))
    bounds = np.concatenate([[0], np.cumsum(js)[:-1]])
    totals = np.add.reduceat(draws, bounds)
    return rng.poisson(d.lambda1 * totals)


# ---------------------------------------------------------------------------
# brute-force pmf oracles (quadrature + convolution; no transforms, no FFT)
# ---------------------------------------------------------------------------


def _equilibrium_density(service):
    beta1 = _model.service_mean(service)

    def dens(t):
        return _model.service_tail(service, t) / beta1

    if isinstance(service, _model.Pareto):
        breaks, upper = [service.x_m], math.inf
    elif isinstance(service, _model.Exponential):
        breaks, upper = [], math.inf
    else:
        breaks, upper = [], service.value
    return dens, breaks, upper


def _poisson_mixture_pmf(rate, service, j_max):
    """pmf of N_rate(T) for T ~ equilibrium service law, by quadrature."""
    dens, breaks, upper = _equilibrium_density(service)
    out = np.empty(j_max + 1)
    for k in range(j_max + 1):
        hi = (k + 12.0 * math.sqrt(k + 1.0) + 40.0) / rate
        if upper < math.inf:
            hi = upper
        pts = [b for b in breaks if 0.0 < b < hi]
        val, _ = integrate.quad(
            lambda t: stats.poisson.pmf(k, rate * t) * dens(t),
            0.0, hi, points=pts or None, limit=400, epsabs=1e-13, epsrel=1e-11)
        out[k] = val
    return out


def oracle_pmf_R11(params: _model.ModelParams, j_max: int) -> Pmf:
    """Brute-force pmf of the queue length given busy on 0..j_max.

    Quadrature of the Poisson mixture against the explicit equilibrium
    density, then the geometric compound by repeated discrete convolution
    truncated once rho1^n < 1e-14.  Independent of transforms and FFT.
    """
    d = _model.derive(params)
    p1 = _poisson_mixture_pmf(d.lambda1, params.service, j_max)
    out = np.zeros(j_max + 1)
    conv = p1.copy()
    n = 1
    while d.rho1 ** (n - 1) > 1e-14:
        out += (1.0 - d.rho1) * d.rho1 ** (n - 1) * conv
        conv = np.convolve(conv, p1)[:j_max + 1]
        n += 1
    return Pmf(out, alias_bound=max(0.0, 1.0 - float(out.sum())),
               source_label="R11_oracle")


def oracle_joint_Ma(params: _model.ModelParams, k_max: int, m_max: int) -> np.ndarray:
    """Brute-force joint pmf of the split equilibrium Poisson count.

    Cell (k, m): integrate Poisson(k+m; lam*t) * Binomial(k; k+m, q) against
    the equilibrium service density.
    """
    dens, breaks, upper = _equilibrium_density(params.service)
    lam, q = params.lam, params.q
    out = np.empty((k_max + 1, m_max + 1))
    for k in range(k_max + 1):
        for m in range(m_max + 1):
            n = k + m
            hi = (n + 12.0 * math.sqrt(n + 1.0) + 40.0) / lam
            if upper < math.inf:
                hi = upper
            pts = [b for b in breaks if 0.0 < b < hi]
            val, _ = integrate.quad(
                lambda t: (stats.poisson.pmf(n, lam * t)
                           * stats.binom.pmf(k, n, q) * dens(t)),
                0.0, hi, points=pts or None, limit=400, epsabs=1e-13, epsrel=1e-11)
            out[k, m] = val
    return out
