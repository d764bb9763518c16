# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Scalar channel moment kernel, compiled implementation.

Mirrors _kernels_py.mid_moments exactly (same piece decomposition, same
stabilized tail formulas) with a scalar loop over the node arrays. See the
numpy module for the math.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, log1p, sqrt, M_PI, INFINITY
from scipy.special.cython_special cimport erfcx, log_ndtr, ndtr

cnp.import_array()

cdef double LOG_2PI = log(2.0 * M_PI)
cdef double SQRT_2PI = sqrt(2.0 * M_PI)


cdef inline double _phi(double x) nogil:
    return exp(-0.5 * x * x) / SQRT_2PI


cdef inline double _mills(double x) nogil:
    return sqrt(2.0 / M_PI) / erfcx(x / sqrt(2.0))


cdef inline double _qratio(double x) nogil:
    # Phi(-x) / phi(x)
    return sqrt(M_PI / 2.0) * erfcx(x / sqrt(2.0))


cdef inline void _lower_trunc(double mu, double sig2, double a,
                              double* mean, double* var) nogil:
    cdef double alpha = (a - mu) / sqrt(sig2)
    cdef double m = _mills(alpha)
    cdef double v = sig2 * (1.0 - m * (m - alpha))
    mean[0] = mu + sqrt(sig2) * m
    var[0] = v if v > 0.0 else 0.0


cdef inline void _upper_trunc(double mu, double sig2, double b,
                              double* mean, double* var) nogil:
    cdef double beta = (b - mu) / sqrt(sig2)
    cdef double m = _mills(-beta)
    cdef double v = sig2 * (1.0 - m * (m + beta))
    mean[0] = mu - sqrt(sig2) * m
    var[0] = v if v > 0.0 else 0.0


cdef inline void _two_sided(double mu, double sig2, double lo, double hi,
                            double* mean, double* var) nogil:
    cdef double sig = sqrt(sig2)
    cdef double a = (lo - mu) / sig
    cdef double b = (hi - mu) / sig
    cdef double r1, r2, d, den, mid, aa, bb, v
    if b - a < 1e-7:
        mid = 0.5 * (a + b)
        r1 = mid
        r2 = mid * mid - 1.0
    elif a >= 0.0:
        d = exp(0.5 * (a * a - b * b))
        den = _qratio(a) - d * _qratio(b)
        r1 = (1.0 - d) / den
        r2 = (a - b * d) / den
    elif b <= 0.0:
        aa = -b
        bb = -a
        d = exp(0.5 * (aa * aa - bb * bb))
        den = _qratio(aa) - d * _qratio(bb)
        r1 = -(1.0 - d) / den
        r2 = (aa - bb * d) / den
    else:
        den = ndtr(b) - ndtr(a)
        r1 = (_phi(a) - _phi(b)) / den
        r2 = (a * _phi(a) - b * _phi(b)) / den
    mean[0] = mu + sig * r1
    v = sig2 * (1.0 + r2 - r1 * r1)
    var[0] = v if v > 0.0 else 0.0


cdef inline double _log_gauss_mass(double a, double b) nogil:
    cdef double la, lb, mid
    if b - a < 1e-12:
        mid = 0.5 * (a + b)
        if b <= a:
            return -INFINITY
        return log(b - a) - 0.5 * mid * mid - 0.5 * LOG_2PI
    if b <= 0.0:
        la = log_ndtr(a)
        lb = log_ndtr(b)
        return lb + log1p(-exp(la - lb))
    if a >= 0.0:
        la = log_ndtr(-a)
        lb = log_ndtr(-b)
        return la + log1p(-exp(lb - la))
    return log1p(-(ndtr(a) + ndtr(-b)))


cdef inline void _mix3(double lm0, double tm0, double tv0, double um0, double uv0,
                       double lm1, double tm1, double tv1, double um1, double uv1,
                       double lm2, double tm2, double tv2, double um2, double uv2,
                       int npieces,
                       double* log_z, double* t_mean, double* t_var,
                       double* u_mean, double* u_var) nogil:
    cdef double top = lm0
    cdef double w0, w1, w2, norm, m1, m2
    if npieces > 1 and lm1 > top:
        top = lm1
    if npieces > 2 and lm2 > top:
        top = lm2
    w0 = exp(lm0 - top)
    w1 = exp(lm1 - top) if npieces > 1 else 0.0
    w2 = exp(lm2 - top) if npieces > 2 else 0.0
    norm = w0 + w1 + w2
    log_z[0] = top + log(norm)
    w0 /= norm
    w1 /= norm
    w2 /= norm
    m1 = w0 * tm0 + w1 * tm1 + w2 * tm2
    m2 = w0 * (tv0 + tm0 * tm0) + w1 * (tv1 + tm1 * tm1) + w2 * (tv2 + tm2 * tm2)
    t_mean[0] = m1
    m2 = m2 - m1 * m1
    t_var[0] = m2 if m2 > 0.0 else 0.0
    m1 = w0 * um0 + w1 * um1 + w2 * um2
    m2 = w0 * (uv0 + um0 * um0) + w1 * (uv1 + um1 * um1) + w2 * (uv2 + um2 * um2)
    u_mean[0] = m1
    m2 = m2 - m1 * m1
    u_var[0] = m2 if m2 > 0.0 else 0.0


def mid_moments(int kind, double A, double tau, B, omega):
    """Compiled twin of _kernels_py.mid_moments. Same contract."""
    if A < 0.0:
        raise ValueError("tilt curvature A must be nonnegative")
    if not tau > 0.0:
        raise ValueError("channel variance tau must be positive")
    if kind not in (0, 1, 2):
        raise ValueError(f"unknown activation code {kind}")

    Ba, Oa = np.broadcast_arrays(np.asarray(B, dtype=np.float64),
                                 np.asarray(omega, dtype=np.float64))
    shape = Ba.shape
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Bf = np.ascontiguousarray(Ba).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Of = np.ascontiguousarray(Oa).ravel()
    cdef Py_ssize_t n = Bf.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] log_z = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t_mean = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t_var = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u_mean = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u_var = np.empty(n)

    cdef double sq = sqrt(tau)
    cdef Py_ssize_t i
    cdef double b, w, lam, mu_bar, tau_bar, log_full, sb
    cdef double lm0, tm0, tv0, um0, uv0
    cdef double lm1, tm1, tv1, um1, uv1
    cdef double lm2, tm2, tv2, um2, uv2

    with nogil:
        for i in range(n):
            b = Bf[i]
            w = Of[i]
            lam = 1.0 + A * tau
            mu_bar = (w + b * tau) / lam
            tau_bar = tau / lam
            log_full = -0.5 * log(lam) + (b * w + 0.5 * b * b * tau
                                          - 0.5 * A * w * w) / lam
            if kind == 0:
                log_z[i] = log_full
                t_mean[i] = mu_bar
                t_var[i] = tau_bar
                u_mean[i] = mu_bar
                u_var[i] = tau_bar
            elif kind == 1:
                lm0 = log_ndtr(-w / sq)
                tm0 = 0.0
                tv0 = 0.0
                _upper_trunc(w, tau, 0.0, &um0, &uv0)
                lm1 = log_full + log_ndtr(mu_bar / sqrt(tau_bar))
                _lower_trunc(mu_bar, tau_bar, 0.0, &tm1, &tv1)
                um1 = tm1
                uv1 = tv1
                _mix3(lm0, tm0, tv0, um0, uv0,
                      lm1, tm1, tv1, um1, uv1,
                      0.0, 0.0, 0.0, 0.0, 0.0, 2,
                      &log_z[i], &t_mean[i], &t_var[i], &u_mean[i], &u_var[i])
            else:
                lm0 = -0.5 * A - b + log_ndtr((-1.0 - w) / sq)
                tm0 = -1.0
                tv0 = 0.0
                _upper_trunc(w, tau, -1.0, &um0, &uv0)
                lm1 = -0.5 * A + b + log_ndtr((w - 1.0) / sq)
                tm1 = 1.0
                tv1 = 0.0
                _lower_trunc(w, tau, 1.0, &um1, &uv1)
                sb = sqrt(tau_bar)
                lm2 = log_full + _log_gauss_mass((-1.0 - mu_bar) / sb,
                                                 (1.0 - mu_bar) / sb)
                _two_sided(mu_bar, tau_bar, -1.0, 1.0, &tm2, &tv2)
                um2 = tm2
                uv2 = tv2
                _mix3(lm0, tm0, tv0, um0, uv0,
                      lm1, tm1, tv1, um1, uv1,
                      lm2, tm2, tv2, um2, uv2, 3,
                      &log_z[i], &t_mean[i], &t_var[i], &u_mean[i], &u_var[i])

    return (log_z.reshape(shape), t_mean.reshape(shape), t_var.reshape(shape),
            u_mean.reshape(shape), u_var.reshape(shape))


def backend_name():
    return "cython"
