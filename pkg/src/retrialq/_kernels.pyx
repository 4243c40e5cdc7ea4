# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the hot kernels.

Same algorithms and same xoshiro256** stream as ``_kernels_py``; the two
backends are interchangeable and cross-checked in the test suite.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt, floor, lgamma, fabs, pow, INFINITY

cnp.import_array()

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double complex cpow(double complex, double complex)
    double cabs(double complex)
    double complex conj(double complex)

BACKEND_NAME = "compiled"

cdef double GLX[16]
cdef double GLW[16]
_glx, _glw = np.polynomial.legendre.leggauss(16)
for _i in range(16):
    GLX[_i] = _glx[_i]
    GLW[_i] = _glw[_i]

cdef double EM1_COEF[13]
import math as _math
for _i in range(13):
    EM1_COEF[_i] = 1.0 / _math.factorial(_i + 1)


cdef inline double complex _em1_ratio(double complex w) nogil:
    # (1 - e^{-w})/w with a series guard below |w| = 0.05
    cdef double complex acc
    cdef int k
    if cabs(w) < 0.05:
        acc = EM1_COEF[12]
        for k in range(11, -1, -1):
            acc = acc * (-w) + EM1_COEF[k]
        return acc
    return (1.0 - cexp(-w)) / w


cdef double complex _pareto_eq_lst_scalar(double a, double xm, double beta1,
                                          double complex s) nogil:
    cdef double complex acc, eiphi, tnode, integ
    cdef double sa, lo, hi, mid, half, width, bound, r
    cdef int j, npan
    if s == 0:
        return 1.0
    sa = cabs(s)
    eiphi = conj(s) / sa
    acc = xm * _em1_ratio(s * xm)
    lo = 0.0
    hi = xm
    npan = 0
    while True:
        mid = 0.5 * (hi + lo)
        half = 0.5 * (hi - lo)
        integ = 0.0
        for j in range(16):
            r = mid + half * GLX[j]
            tnode = xm + r * eiphi
            integ = integ + GLW[j] * cexp(-s * tnode) * cpow(xm / tnode, a)
        acc = acc + half * integ * eiphi
        npan += 1
        bound = sa * hi
        if bound > 700.0:
            bound = 700.0
        bound = exp(-bound) * pow(xm, a) * pow(hi, 1.0 - a) / (a - 1.0)
        if bound < 1e-17 * beta1 or npan > 500:
            break
        lo = hi
        width = hi
        if sa * hi > 24.0 and width > 24.0 / sa:
            width = 24.0 / sa
        hi = hi + width
    return acc / beta1


cdef inline double complex _eq_lst_scalar(int kind, double pa, double pb,
                                          double beta1, double complex s) nogil:
    if kind == 0:
        return _pareto_eq_lst_scalar(pa, pb, beta1, s)
    if kind == 1:
        return pa / (pa + s)
    return _em1_ratio(s * pa)


cdef inline double _service_mean(int kind, double pa, double pb) nogil:
    if kind == 0:
        return pa * pb / (pa - 1.0)
    if kind == 1:
        return 1.0 / pa
    return pa


def pareto_eq_lst(double a, double xm, s):
    """Equilibrium LST of Pareto(a, x_m) at complex s (Re >= 0), vectorized."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] sv = \
        np.ascontiguousarray(np.asarray(s, dtype=complex).ravel())
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(sv.shape[0], dtype=complex)
    cdef double beta1 = a * xm / (a - 1.0)
    cdef Py_ssize_t i
    for i in range(sv.shape[0]):
        out[i] = _pareto_eq_lst_scalar(a, xm, beta1, sv[i])
    return out.reshape(np.asarray(s, dtype=complex).shape)


def solve_one_minus_alpha(int kind, double pa, double pb, double lam1, s,
                          D0=None, double tol=1e-14, long maxit=1000000):
    """Per-point Picard iteration for D(s) = 1 - beta(s + lam1*D(s))."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] sv = \
        np.ascontiguousarray(np.asarray(s, dtype=complex).ravel())
    cdef Py_ssize_t n = sv.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] D = np.empty(n, dtype=complex)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] Dinit
    cdef double beta1 = _service_mean(kind, pa, pb)
    cdef Py_ssize_t i
    cdef long it, itmax = 0
    cdef bint converged
    cdef double complex d, dn, w
    if D0 is not None:
        Dinit = np.ascontiguousarray(np.asarray(D0, dtype=complex).ravel())
    for i in range(n):
        if D0 is None:
            w = sv[i] + lam1
            d = beta1 * w * _eq_lst_scalar(kind, pa, pb, beta1, w)
        else:
            d = Dinit[i]
        converged = False
        for it in range(maxit):
            w = sv[i] + lam1 * d
            dn = beta1 * w * _eq_lst_scalar(kind, pa, pb, beta1, w)
            if cabs(dn - d) < tol:
                d = dn
                converged = True
                if it + 1 > itmax:
                    itmax = it + 1
                break
            d = dn
        if not converged:
            raise RuntimeError("fixed point did not converge within max_iter")
        D[i] = d
    return D.reshape(np.asarray(s, dtype=complex).shape), itmax


# ---------------------------------------------------------------------------
# xoshiro256** (bit-identical to the Python backend)
# ---------------------------------------------------------------------------

cdef struct XoState:
    unsigned long long s0, s1, s2, s3


cdef inline unsigned long long _rotl(unsigned long long x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef void _xo_seed(XoState* st, unsigned long long seed) nogil:
    cdef unsigned long long x = seed, z
    cdef unsigned long long* words = <unsigned long long*> st
    cdef int i
    for i in range(4):
        x = x + <unsigned long long> 0x9E3779B97F4A7C15ULL
        z = x
        z = (z ^ (z >> 30)) * <unsigned long long> 0xBF58476D1CE4E5B9ULL
        z = (z ^ (z >> 27)) * <unsigned long long> 0x94D049BB133111EBULL
        words[i] = z ^ (z >> 31)


cdef inline unsigned long long _xo_next(XoState* st) nogil:
    cdef unsigned long long result = _rotl(st.s1 * 5ULL, 7) * 9ULL
    cdef unsigned long long t = st.s1 << 17
    st.s2 ^= st.s0
    st.s3 ^= st.s1
    st.s1 ^= st.s2
    st.s0 ^= st.s3
    st.s2 ^= t
    st.s3 = _rotl(st.s3, 45)
    return result


cdef inline double _xo_uniform(XoState* st) nogil:
    return <double> (_xo_next(st) >> 11) * 1.1102230246251565e-16


def replication_seed(seed, rep):
    """Distinct 64-bit stream seed per replication."""
    return (seed + rep * 0x9E3779B97F4A7C15) & ((1 << 64) - 1)


def xoshiro_uniforms(seed, Py_ssize_t n):
    """First n uniforms of the stream (used for backend cross-checks)."""
    cdef XoState st
    _xo_seed(&st, <unsigned long long> seed)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=float)
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = _xo_uniform(&st)
    return out


cdef inline double _sample_service_u(int kind, double pa, double pb, double u) nogil:
    if kind == 0:
        return pb * pow(1.0 - u, -1.0 / pa)
    if kind == 1:
        return -log(1.0 - u) / pa
    return pa


cdef long _poisson_draw(double mean, XoState* st) nogil:
    cdef double limit, p, b, a, inv_alpha, v_r, log_mean, v, u, us
    cdef long k
    if mean <= 0.0:
        return 0
    if mean < 10.0:
        limit = exp(-mean)
        k = 0
        p = 1.0
        while True:
            p *= _xo_uniform(st)
            if p <= limit:
                return k
            k += 1
    b = 0.931 + 2.53 * sqrt(mean)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_mean = log(mean)
    while True:
        v = _xo_uniform(st)
        u = _xo_uniform(st) - 0.5
        us = 0.5 - fabs(u)
        k = <long> floor((2.0 * a / us + b) * u + mean + 0.43)
        if us >= 0.07 and v <= v_r:
            return k
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (log(v) + log(inv_alpha) - log(a / (us * us) + b)
                <= k * log_mean - mean - lgamma(k + 1.0)):
            return k


def busy_periods(int kind, double pa, double pb, double lam1, Py_ssize_t n, seed):
    """Sample n M/G/1 busy periods (arrival rate lam1)."""
    cdef XoState st
    _xo_seed(&st, <unsigned long long> seed)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=float)
    cdef Py_ssize_t i
    cdef long pending
    cdef double total, svc
    for i in range(n):
        pending = 1
        total = 0.0
        while pending > 0:
            svc = _sample_service_u(kind, pa, pb, _xo_uniform(&st))
            total += svc
            pending += _poisson_draw(lam1 * svc, &st) - 1
        out[i] = total
    return out


def des_run(int kind, double pa, double pb, double lam, double q, double mu,
            double horizon, double warmup, seed, int qcap, int ocap, int nbatch):
    """Single replication of the retrial-queue DES (see _kernels_py.des_run)."""
    cdef XoState st
    _xo_seed(&st, <unsigned long long> seed)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] idle_orbit = np.zeros((nbatch, ocap + 2))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] busy_queue = np.zeros((nbatch, qcap + 2))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] busy_orbit = np.zeros((nbatch, ocap + 2))
    cdef double batchlen = (horizon - warmup) / nbatch
    cdef double t = 0.0, comp = INFINITY
    cdef bint busy = False
    cdef long queue = 0, orbit = 0
    cdef long long events = 0
    cdef int ev, b, qi, oi
    cdef double dt_arr, dt_ret, ev_t, hi_t, lo_t, pos, bend, seg_end, seg

    while t < horizon:
        dt_arr = -log(1.0 - _xo_uniform(&st)) / lam
        if busy:
            if t + dt_arr < comp:
                ev = 0
                ev_t = t + dt_arr
            else:
                ev = 1
                ev_t = comp
        else:
            if orbit > 0:
                dt_ret = -log(1.0 - _xo_uniform(&st)) / (orbit * mu)
            else:
                dt_ret = INFINITY
            if dt_arr <= dt_ret:
                ev = 0
                ev_t = t + dt_arr
            else:
                ev = 2
                ev_t = t + dt_ret

        hi_t = ev_t if ev_t < horizon else horizon
        lo_t = t if t > warmup else warmup
        if hi_t > lo_t:
            if busy:
                qi = <int> queue if queue <= qcap else qcap + 1
                oi = <int> orbit if orbit <= ocap else ocap + 1
            else:
                oi = <int> orbit if orbit <= ocap else ocap + 1
            pos = lo_t
            while pos < hi_t:
                b = <int> ((pos - warmup) / batchlen)
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
                if _xo_uniform(&st) < q:
                    queue += 1
                else:
                    orbit += 1
            else:
                busy = True
                comp = t + _sample_service_u(kind, pa, pb, _xo_uniform(&st))
        elif ev == 1:
            if queue > 0:
                queue -= 1
                comp = t + _sample_service_u(kind, pa, pb, _xo_uniform(&st))
            else:
                busy = False
                comp = INFINITY
        else:
            orbit -= 1
            busy = True
            comp = t + _sample_service_u(kind, pa, pb, _xo_uniform(&st))

    return idle_orbit, busy_queue, busy_orbit, int(events)
