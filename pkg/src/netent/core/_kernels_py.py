"""Scalar channel moment kernel, numpy implementation.

A scalar channel maps a pre-activation u ~ N(omega, tau) to t = act(u),
where tau = V + noise_var bundles the conditioning variance V and the
additive pre-activation noise. The kernel evaluates, for arrays of tilt
coefficients B and means omega at fixed (A, tau),

    Z(A, B, tau, omega) = E_u[ exp(-A t^2 / 2 + B t) ],   t = act(u),

together with the mean and variance of t and of u under the tilted
measure. Every quantity used upstream (free-entropy integrands, update
expectations, derivative operators) is a linear functional of these five
outputs:

    d/dB   log Z = <t>
    d2/dB2 log Z = Var(t)
    d/dw   log Z = (<u> - omega) / tau
    d2/dw2 log Z = (Var(u) - tau) / tau^2

Activations are piecewise linear, so Z splits into saturated pieces
(t constant, a Gaussian mass times a constant tilt) and live pieces
(t = u, a completed-square Gaussian mass). Piece masses are combined in
log space; tail masses and Mills ratios go through erfcx so the kernel
stays finite far into the tails.

Activation codes: 0 linear, 1 relu, 2 hardtanh.
"""

import numpy as np
from scipy.special import erfcx, log_ndtr, ndtr

_LOG_2PI = float(np.log(2.0 * np.pi))
_SQRT_2PI = float(np.sqrt(2.0 * np.pi))

KIND_LINEAR = 0
KIND_RELU = 1
KIND_HARDTANH = 2


def _phi(x):
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def _mills(x):
    # phi(x) / Phi(-x), stable for large positive x
    return np.sqrt(2.0 / np.pi) / erfcx(x / np.sqrt(2.0))


def _lower_trunc_moments(mu, sig2, a):
    """Mean and variance of N(mu, sig2) truncated to [a, inf)."""
    alpha = (a - mu) / np.sqrt(sig2)
    m = _mills(alpha)
    mean = mu + np.sqrt(sig2) * m
    var = sig2 * np.maximum(1.0 - m * (m - alpha), 0.0)
    return mean, var


def _upper_trunc_moments(mu, sig2, b):
    """Mean and variance of N(mu, sig2) truncated to (-inf, b]."""
    beta = (b - mu) / np.sqrt(sig2)
    m = _mills(-beta)
    mean = mu - np.sqrt(sig2) * m
    var = sig2 * np.maximum(1.0 - m * (m + beta), 0.0)
    return mean, var


def _two_sided_ratios(a, b):
    """r1 = (phi(a)-phi(b))/mass, r2 = (a phi(a)-b phi(b))/mass on [a, b]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    r1 = np.empty_like(a)
    r2 = np.empty_like(a)

    narrow = (b - a) < 1e-7
    if np.any(narrow):
        mid = 0.5 * (a + b)
        r1[narrow] = mid[narrow]
        r2[narrow] = (mid * mid - 1.0)[narrow]

    wide = ~narrow
    # right tail: normalize by phi(a)
    right = wide & (a >= 0.0)
    if np.any(right):
        aa, bb = a[right], b[right]
        d = np.exp(0.5 * (aa * aa - bb * bb))
        q = lambda x: np.sqrt(np.pi / 2.0) * erfcx(x / np.sqrt(2.0))
        den = q(aa) - d * q(bb)
        r1[right] = (1.0 - d) / den
        r2[right] = (aa - bb * d) / den
    # left tail: mirror of the right tail
    left = wide & (b <= 0.0)
    if np.any(left):
        aa, bb = -b[left], -a[left]
        d = np.exp(0.5 * (aa * aa - bb * bb))
        q = lambda x: np.sqrt(np.pi / 2.0) * erfcx(x / np.sqrt(2.0))
        den = q(aa) - d * q(bb)
        r1[left] = -(1.0 - d) / den
        r2[left] = (aa - bb * d) / den
    # straddles zero: direct evaluation is safe, mass is O(1)
    mid = wide & (a < 0.0) & (b > 0.0)
    if np.any(mid):
        aa, bb = a[mid], b[mid]
        mass = ndtr(bb) - ndtr(aa)
        r1[mid] = (_phi(aa) - _phi(bb)) / mass
        r2[mid] = (aa * _phi(aa) - bb * _phi(bb)) / mass
    return r1, r2


def _two_sided_moments(mu, sig2, a, b):
    sig = np.sqrt(sig2)
    alpha = (a - mu) / sig
    beta = (b - mu) / sig
    r1, r2 = _two_sided_ratios(alpha, beta)
    mean = mu + sig * r1
    var = sig2 * np.maximum(1.0 + r2 - r1 * r1, 0.0)
    return mean, var


def _log_gauss_mass(a, b):
    """log(Phi(b) - Phi(a)) elementwise, stable in both tails."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty_like(a)

    narrow = (b - a) < 1e-12
    if np.any(narrow):
        with np.errstate(divide="ignore"):
            out[narrow] = (np.log(np.maximum(b - a, 0.0)) - 0.5 * (0.5 * (a + b)) ** 2
                           - 0.5 * _LOG_2PI)[narrow]

    left = (~narrow) & (b <= 0.0)
    if np.any(left):
        la = log_ndtr(a[left])
        lb = log_ndtr(b[left])
        out[left] = lb + np.log1p(-np.exp(la - lb))
    right = (~narrow) & (a >= 0.0)
    if np.any(right):
        la = log_ndtr(-a[right])
        lb = log_ndtr(-b[right])
        out[right] = la + np.log1p(-np.exp(lb - la))
    mid = (~narrow) & (a < 0.0) & (b > 0.0)
    if np.any(mid):
        out[mid] = np.log1p(-(ndtr(a[mid]) + ndtr(-b[mid])))
    return out


def _live_piece(A, tau, B, omega):
    """Completed-square parameters for a piece where t = u.

    Returns (log_full, mu_bar, tau_bar): log of the untruncated tilted
    mass, and the tilted Gaussian mean / variance of u.
    """
    lam = 1.0 + A * tau
    mu_bar = (omega + B * tau) / lam
    tau_bar = tau / lam
    log_full = -0.5 * np.log(lam) + (B * omega + 0.5 * B * B * tau
                                     - 0.5 * A * omega * omega) / lam
    return log_full, mu_bar, tau_bar


def _combine(pieces):
    """Mix per-piece (logm, t_mean, t_var, u_mean, u_var) tuples."""
    logms = np.stack([p[0] for p in pieces])
    log_z = logms.max(axis=0)
    # guard: all-(-inf) cannot occur, every kind has a full-support union
    w = np.exp(logms - log_z)
    norm = w.sum(axis=0)
    log_z = log_z + np.log(norm)
    w /= norm

    def mix(mean_idx, var_idx):
        m1 = sum(w[i] * pieces[i][mean_idx] for i in range(len(pieces)))
        m2 = sum(w[i] * (pieces[i][var_idx] + pieces[i][mean_idx] ** 2)
                 for i in range(len(pieces)))
        return m1, np.maximum(m2 - m1 * m1, 0.0)

    t_mean, t_var = mix(1, 2)
    u_mean, u_var = mix(3, 4)
    return log_z, t_mean, t_var, u_mean, u_var


def mid_moments(kind, A, tau, B, omega):
    """Tilted log-normalizer and (t, u) moments for one scalar channel.

    Parameters
    ----------
    kind : int
        Activation code (0 linear, 1 relu, 2 hardtanh).
    A : float
        Tilt curvature, A >= 0.
    tau : float
        Variance of u given omega (conditioning variance plus noise), > 0.
    B, omega : ndarray
        Tilt fields and conditioning means, broadcast to a common shape.

    Returns
    -------
    (log_z, t_mean, t_var, u_mean, u_var) : tuple of ndarray
    """
    B = np.asarray(B, dtype=float)
    omega = np.asarray(omega, dtype=float)
    B, omega = np.broadcast_arrays(B, omega)
    if A < 0.0:
        raise ValueError("tilt curvature A must be nonnegative")
    if not tau > 0.0:
        raise ValueError("channel variance tau must be positive")
    sq = np.sqrt(tau)

    if kind == KIND_LINEAR:
        log_full, mu_bar, tau_bar = _live_piece(A, tau, B, omega)
        tv = np.full_like(B, tau_bar)
        return log_full, mu_bar.copy(), tv, mu_bar, tv.copy()

    if kind == KIND_RELU:
        # saturated piece u <= 0, t = 0
        um0, uv0 = _upper_trunc_moments(omega, tau, 0.0)
        p0 = (log_ndtr(-omega / sq), np.zeros_like(B), np.zeros_like(B), um0, uv0)
        # live piece u >= 0, t = u
        log_full, mu_bar, tau_bar = _live_piece(A, tau, B, omega)
        um1, uv1 = _lower_trunc_moments(mu_bar, tau_bar, 0.0)
        p1 = (log_full + log_ndtr(mu_bar / np.sqrt(tau_bar)), um1, uv1,
              um1.copy(), uv1.copy())
        return _combine([p0, p1])

    if kind == KIND_HARDTANH:
        # saturated u <= -1, t = -1
        umm, uvm = _upper_trunc_moments(omega, tau, -1.0)
        pm = (-0.5 * A - B + log_ndtr((-1.0 - omega) / sq),
              np.full_like(B, -1.0), np.zeros_like(B), umm, uvm)
        # saturated u >= 1, t = +1
        ump, uvp = _lower_trunc_moments(omega, tau, 1.0)
        pp = (-0.5 * A + B + log_ndtr((omega - 1.0) / sq),
              np.ones_like(B), np.zeros_like(B), ump, uvp)
        # live piece -1 <= u <= 1
        log_full, mu_bar, tau_bar = _live_piece(A, tau, B, omega)
        sb = np.sqrt(tau_bar)
        umc, uvc = _two_sided_moments(mu_bar, tau_bar, -1.0, 1.0)
        pc = (log_full + _log_gauss_mass((-1.0 - mu_bar) / sb, (1.0 - mu_bar) / sb),
              umc, uvc, umc.copy(), uvc.copy())
        return _combine([pm, pp, pc])

    raise ValueError(f"unknown activation code {kind}")


def backend_name():
    return "numpy"
