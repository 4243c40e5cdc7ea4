"""Pure-Python (numpy) backend for the hot kernels.

Mirrors the compiled extension ``retrialq._kernels``: the Pareto
survival-transform quadrature, the busy-period fixed-point solve, the
discrete-event simulation loop, and the busy-period sampler.  The DES and
samplers draw from a xoshiro256** stream implemented identically in both
backends, so short runs can be compared across backends bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"

_GLX16, _GLW16 = np.polynomial.legendre.leggauss(16)
_EM1_COEF = [1.0 / math.factorial(k + 1) for k in range(13)]

# ---------------------------------------------------------------------------
# Pareto survival transform E(s)/beta1 = (1/beta1) int_0^inf e^{-st}(1-F(t)) dt
# ---------------------------------------------------------------------------


def _em1_ratio(w):
    # (1 - e^{-w})/w, series below |w|=0.05 to avoid cancellation
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


def _pareto_panels(a, xm, smin, beta1):
    # dyadic panels in the ray coordinate r; stop when the remaining tail
    # bound e^{-|s|R} xm^a R^{1-a}/(a-1) is negligible; panel widths capped
    # so Gauss-Legendre resolves the exponential factor
    panels = []
    lo, hi = 0.0, xm
    while True:
        panels.append((lo, hi))
        bound = math.exp(-min(smin * hi, 700.0)) * xm ** a * hi ** (1.0 - a) / (a - 1.0)
        if bound < 1e-17 * beta1 or len(panels) > 500:
            break
        lo = hi
        width = hi
        if smin * hi > 24.0:
            width = min(width, 24.0 / smin)
        hi = hi + width
    return panels


def pareto_eq_lst(a, xm, s):
    """Equilibrium LST of Pareto(a, x_m) at complex s (Re >= 0), vectorized.

    Integrates e^{-st}(1-F(t)) along the rotated ray t = x_m + r e^{-i arg s}
    (the integrand is analytic in the right half t-plane and decays on the
    closing arc), so the exponential factor never oscillates.
    """
    s = np.asarray(s, dtype=complex)
    beta1 = a * xm / (a - 1.0)
    out = np.empty(s.shape, dtype=complex)
    zero = s == 0
    out[zero] = 1.0
    sn = s[~zero]
    if sn.size == 0:
        return out
    res = np.empty_like(sn)
    order = np.argsort(np.abs(sn))
    for i0 in range(0, sn.size, 4096):
        idx = order[i0:i0 + 4096]
        sc = sn[idx]
        sa = np.abs(sc)
        eiphi = np.conj(sc) / sa
        # [0, x_m] piece has survival 1: closed form x_m (1-e^{-s x_m})/(s x_m)
        acc = xm * _em1_ratio(sc * xm)
        for lo, hi in _pareto_panels(a, xm, sa.min(), beta1):
            mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
            r = mid + half * _GLX16
            tnode = xm + r[None, :] * eiphi[:, None]
            integ = np.exp(-sc[:, None] * tnode) * (xm / tnode) ** a
            acc += half * (integ @ _GLW16) * eiphi
        res[idx] = acc / beta1
    out[~zero] = res
    return out


def _eq_lst(kind, pa, pb, s):
    if kind == 0:
        return pareto_eq_lst(pa, pb, s)
    if kind == 1:
        return pa / (pa + s)
    return _em1_ratio(s * pa)


def _service_mean(kind, pa, pb):
    if kind == 0:
        return pa * pb / (pa - 1.0)
    if kind == 1:
        return 1.0 / pa
    return pa


def solve_one_minus_alpha(kind, pa, pb, lam1, s, D0=None, tol=1e-14, maxit=1000000):
    """Fixed point D(s) = 1 - beta(s + lam1*D(s)) by Picard iteration.

    D = 1 - alpha(s) where alpha is the busy-period LST of the M/G/1 queue
    with arrival rate lam1.  The update is evaluated as
    beta1*(s+lam1 D)*beta_e(s+lam1 D), which keeps full relative accuracy in
    D near s=0.  Contraction modulus is rho1 = lam1*beta1 < 1.  Returns
    (D, iterations); raises RuntimeError if maxit is exhausted.
    """
    s = np.asarray(s, dtype=complex)
    beta1 = _service_mean(kind, pa, pb)
    if D0 is None:
        D = beta1 * (s + lam1) * _eq_lst(kind, pa, pb, s + lam1)
    else:
        D = np.array(D0, dtype=complex, copy=True)
    active = np.ones(s.shape, dtype=bool)
    it = 0
    while active.any():
        if it >= maxit:
            raise RuntimeError("fixed point did not converge within max_iter")
        idx = np.flatnonzero(active)
        w = s[idx] + lam1 * D[idx]
        Dn = beta1 * w * _eq_lst(kind, pa, pb, w)
        delta = np.abs(Dn - D[idx])
        D[idx] = Dn
        active[idx[delta < tol]] = False
        it += 1
    return D, it


# ---------------------------------------------------------------------------
# xoshiro256** stream (bit-identical to the compiled backend)
# ---------------------------------------------------------------------------

_M64 = (1 << 64) - 1


class Xoshiro256:
    """xoshiro256** seeded via splitmix64."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed):
        x = seed & _M64
        st = []
        for _ in range(4):
            x = (x + 0x9E3779B97F4A7C15) & _M64
            z = x
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
            st.append(z ^ (z >> 31))
        self.s0, self.s1, self.s2, self.s3 = st

    def next_u64(self):
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        x = (s1 * 5) & _M64
        result = (((x << 7) | (x >> 57)) & _M64) * 9 & _M64
        t = (s1 << 17) & _M64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _M64
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def uniform(self):
        # 53-bit mantissa in [0, 1)
        return (self.next_u64() >> 11) * 1.1102230246251565e-16


def replication_seed(seed, rep):
    """Distinct 64-bit stream seed per replication."""
    return (seed + rep * 0x9E3779B97F4A7C15) & _M64


def xoshiro_uniforms(seed, n):
    """First n uniforms of the stream (used for backend cross-checks)."""
    rng = Xoshiro256(seed)
    return np.array([rng.uniform() for _ in range(n)])


def _sample_service_u(kind, pa, pb, u):
    if kind == 0:
        return pb * (1.0 - u) ** (-1.0 / pa)
    if kind == 1:
        return -math.log(1.0 - u) / pa
    return pa


def _poisson_draw(mean, rng):
    # Knuth product method below mean 10, Hormann PTRS rejection above;
    # both consume the uniform stream identically in each backend
    if mean <= 0.0:
        return 0
    if mean < 10.0:
        limit = math.exp(-mean)
        k = 0
        p = 1.0
        while True:
            p *= rng.uniform()
            if p <= limit:
                return k
            k += 1
    b = 0.931 + 2.53 * math.sqrt(mean)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_mean = math.log(mean)
    while True:
        v = rng.uniform()
        u = rng.uniform() - 0.5
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + mean + 0.43)
        if us >= 0.07 and v <= v_r:
            return int(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                <= k * log_mean - mean - math.lgamma(k + 1.0)):
            return int(k)


def busy_periods(kind, pa, pb, lam1, n, seed):
    """Sample n M/G/1 busy periods (arrival rate lam1) into an array.

    Each busy period is one initial service plus the sub-busy periods of the
    Poisson(lam1 * service) arrivals that land during each service.
    """
    rng = Xoshiro256(seed)
    out = np.empty(n, dtype=float)
    for i in range(n):
        pending = 1
        total = 0.0
        while pending > 0:
            svc = _sample_service_u(kind, pa, pb, rng.uniform())
            total += svc
            pending += _poisson_draw(lam1 * svc, rng) - 1
        out[i] = total
    return out


def des_run(kind, pa, pb, lam, q, mu, horizon, warmup, seed, qcap, ocap, nbatch):
    """Single replication of the retrial-queue DES.

    Event mechanics: Poisson(lam) arrivals; an arrival enters service if the
    server is idle, otherwise joins the queue w.p. q or the orbit w.p. 1-q;
    on completion the head of the queue (if any) enters service; when idle
    with n orbiting customers, an Exponential(n*mu) retrial races the next
    arrival.  Pending exponential draws are redrawn after every event, which
    is distribution-exact by memorylessness; the non-memoryless service
    completion is kept as an absolute time.

    Returns (idle_orbit, busy_queue, busy_orbit, events) where the first
    three are (nbatch, cap+2) time-weighted histograms over post-warmup
    time; index cap+1 is the overflow cell.
    """
    rng = Xoshiro256(seed)
    idle_orbit = np.zeros((nbatch, ocap + 2), dtype=float)
    busy_queue = np.zeros((nbatch, qcap + 2), dtype=float)
    busy_orbit = np.zeros((nbatch, ocap + 2), dtype=float)
    batchlen = (horizon - warmup) / nbatch
    inf = math.inf

    t = 0.0
    busy = False
    queue = 0
    orbit = 0
    comp = inf
    events = 0

    while t < horizon:
        dt_arr = -math.log(1.0 - rng.uniform()) / lam
        if busy:
            if t + dt_arr < comp:
                ev, ev_t = 0, t + dt_arr          # arrival
            else:
                ev, ev_t = 1, comp                # completion
        else:
            if orbit > 0:
                dt_ret = -math.log(1.0 - rng.uniform()) / (orbit * mu)
            else:
                dt_ret = inf
            if dt_arr <= dt_ret:
                ev, ev_t = 0, t + dt_arr
            else:
                ev, ev_t = 2, t + dt_ret          # successful retrial

        # time-weighted accumulation over [t, min(ev_t, horizon))
        hi_t = ev_t if ev_t < horizon else horizon
        lo_t = t if t > warmup else warmup
        if hi_t > lo_t:
            if busy:
                qi = queue if queue <= qcap else qcap + 1
                oi = orbit if orbit <= ocap else ocap + 1
            else:
                oi = orbit if orbit <= ocap else ocap + 1
            pos = lo_t
            while pos < hi_t:
                b = int((pos - warmup) / batchlen)
                if b >= nbatch:
                    b = nbatch - 1
                bend = warmup + (b + 1) * batchlen
                seg_end = hi_t if hi_t < bend else bend
                seg = seg_end - pos
                if seg <= 0.0:
                    break
                if busy:
                    busy_queue[b, qi] += seg
                    busy_orbit[b, oi] += seg
                else:
                    idle_orbit[b, oi] += seg
                pos = seg_end

        t = ev_t
        events += 1
        if t >= horizon:
            break
        if ev == 0:
            if busy:
                if rng.uniform() < q:
                    queue += 1
                else:
                    orbit += 1
            else:
                busy = True
                comp = t + _sample_service_u(kind, pa, pb, rng.uniform())
        elif ev == 1:
            if queue > 0:
                queue -= 1
                comp = t + _sample_service_u(kind, pa, pb, rng.uniform())
            else:
                busy = False
                comp = inf
        else:
            orbit -= 1
            busy = True
            comp = t + _sample_service_u(kind, pa, pb, rng.uniform())

    return idle_orbit, busy_queue, busy_orbit, events
