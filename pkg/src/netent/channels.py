"""Scalar channels: tilted normalizers, their derivatives, and the
free-entropy integrals built from them.

A channel takes a pre-activation z, adds N(0, noise_var), and applies a
pointwise activation (linear, relu or hardtanh). Everything the layered
potential needs from a channel reduces to Gaussian expectations of the
tilted log-normalizers

    log Z(A, B, V, omega)         (hidden variable t = act(z + noise))
    log Z_out(y, V, omega)        (observed output y)

and of their first two derivatives in B and omega. The heavy lifting for
the hidden case is done by the core moment kernel; this module builds the
outer quadratures:

  * K_mid(A, V, rho):   E log Z over w ~ N(0, rho - V), t | w through the
                        channel, and b = A t + sqrt(A) xi with xi ~ N(0,1).
  * K_out(V, rho):      E over w of the output differential free entropy
                        integral(Z_out log Z_out dy), closed form per piece.
  * update expectations E d2/dB2 log Z and E d2/domega2 log Z under the
    same measures.

All piecewise integrals put activation boundaries at quadrature window
ends: the hidden measure is factorized u-first (Gauss-Legendre per piece
over the u marginal, Gauss-Hermite over w | u and over the tilt field),
and the output average uses Gauss-Legendre panels refined at the
saturation thresholds. Windows span truncation_radius standard deviations.
Seeded plain Monte Carlo twins of the K integrals are kept for
cross-checking the quadratures.
"""

import dataclasses
import functools

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy.special import erfcx, log_ndtr, ndtr

from . import core

_LOG_2PI = float(np.log(2.0 * np.pi))

ACTIVATIONS = ("linear", "relu", "hardtanh")
_ACT_CODE = {"linear": core.KIND_LINEAR, "relu": core.KIND_RELU,
             "hardtanh": core.KIND_HARDTANH}


@dataclasses.dataclass(frozen=True)
class PriorSpec:
    """Input law, iid over coordinates. Only the Gaussian family is used."""

    kind: str = "gaussian"
    variance: float = 1.0

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValueError("only the gaussian prior is supported")
        if self.variance <= 0:
            raise ValueError("prior variance must be positive")


@dataclasses.dataclass(frozen=True)
class ChannelSpec:
    """Pointwise activation plus additive pre-activation Gaussian noise."""

    activation: str
    noise_var: float = 0.0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.noise_var < 0:
            raise ValueError("noise_var must be nonnegative")


@dataclasses.dataclass(frozen=True)
class QuadratureConfig:
    """legendre_order rules the u integrals (piece windows and the output
    panels), hermite_order the conditional w | u Gaussian, b_hermite_order
    the tilt-field Gaussian. The b integrand is analytic in b, so its rule
    can run lower order than the piece integrals."""

    hermite_order: int = 20
    legendre_order: int = 40
    b_hermite_order: int = 20
    truncation_radius: float = 8.0
    mc_samples: int = 200_000

    def __post_init__(self):
        if min(self.hermite_order, self.legendre_order,
               self.b_hermite_order) < 2:
            raise ValueError("quadrature orders must be at least 2")
        if self.truncation_radius <= 0:
            raise ValueError("truncation_radius must be positive")


DEFAULT_QUAD = QuadratureConfig()


@functools.lru_cache(maxsize=64)
def _gh(order):
    """Nodes and weights for E[f(x)], x ~ N(0,1)."""
    x, w = hermegauss(order)
    return x, w / np.sqrt(2.0 * np.pi)


@functools.lru_cache(maxsize=64)
def _gl(order):
    return leggauss(order)


def _mills_ratio(x):
    # phi(x) / Phi(x), stable for very negative x
    return np.sqrt(2.0 / np.pi) / erfcx(-x / np.sqrt(2.0))


def _phi(x):
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def _logphi_dd(x):
    # second derivative of log Phi at x
    r = _mills_ratio(x)
    return -r * (x + r)


def _pieces(activation):
    """(kind, lo, hi, t_value) decomposition; t_value None on live pieces."""
    if activation == "linear":
        return (("live", -np.inf, np.inf, None),)
    if activation == "relu":
        return (("atom", -np.inf, 0.0, 0.0), ("live", 0.0, np.inf, None))
    if activation == "hardtanh":
        return (("atom", -np.inf, -1.0, -1.0), ("atom", 1.0, np.inf, 1.0),
                ("live", -1.0, 1.0, None))
    raise ValueError(activation)


# ----------------------------------------------------------------- priors

def log_z0(prior, A, B):
    """log E exp(-A t^2 / 2 + B t) for t drawn from the prior."""
    rho0 = prior.variance
    lam = 1.0 + A * rho0
    B = np.asarray(B, dtype=float)
    return -0.5 * np.log(lam) + 0.5 * B * B * rho0 / lam


def d_db_log_z0(prior, A, B):
    rho0 = prior.variance
    return np.asarray(B, dtype=float) * rho0 / (1.0 + A * rho0)


def d2_db2_log_z0(prior, A, B):
    rho0 = prior.variance
    return np.full_like(np.asarray(B, dtype=float), rho0 / (1.0 + A * rho0))


def k0(prior, A):
    """Prior free-entropy term at tilt precision A."""
    rho0 = prior.variance
    return 0.5 * A * rho0 - 0.5 * np.log1p(A * rho0)


def scalar_mi_gaussian_noise(prior, A):
    """Mutual information of t ~ prior observed through unit-precision-A
    additive Gaussian noise, per coordinate."""
    return 0.5 * np.log1p(A * prior.variance)


# ----------------------------------------------- hidden-channel operators

def _require_tau(channel, V):
    tau = V + channel.noise_var
    if not tau > 0.0:
        raise ValueError("V + noise_var must be positive for this channel")
    return tau


def log_z_mid(channel, A, B, V, omega):
    tau = _require_tau(channel, V)
    out = core.mid_moments(_ACT_CODE[channel.activation], A, tau, B, omega)
    return out[0]


def d_db_log_z_mid(channel, A, B, V, omega):
    tau = _require_tau(channel, V)
    out = core.mid_moments(_ACT_CODE[channel.activation], A, tau, B, omega)
    return out[1]


def d2_db2_log_z_mid(channel, A, B, V, omega):
    tau = _require_tau(channel, V)
    out = core.mid_moments(_ACT_CODE[channel.activation], A, tau, B, omega)
    return out[2]


def d_dw_log_z_mid(channel, A, B, V, omega):
    tau = _require_tau(channel, V)
    out = core.mid_moments(_ACT_CODE[channel.activation], A, tau, B, omega)
    return (out[3] - np.asarray(omega, dtype=float)) / tau


def d2_dw2_log_z_mid(channel, A, B, V, omega):
    tau = _require_tau(channel, V)
    out = core.mid_moments(_ACT_CODE[channel.activation], A, tau, B, omega)
    return (out[4] - tau) / (tau * tau)


def _mid_nodes(channel, A, V, rho, quad):
    """Quadrature nodes (B, omega, weight) for the hidden-channel measure.

    Factorized u-first: marginally u ~ N(0, m2 + tau), integrated piece by
    piece with Gauss-Legendre so activation boundaries are window ends and
    never interior kinks; w | u is the conditional Gaussian (Hermite); the
    tilt field b = A t + sqrt(A) xi (Hermite). Integrating w marginally
    instead resolves neither the saturation transition layers of width
    sqrt(tau) nor a bounded live strip once rho - V is large.
    """
    if A < 0.0:
        raise ValueError("A must be nonnegative")
    tau = _require_tau(channel, V)
    m2 = max(rho - V, 1e-12)
    s2u = m2 + tau
    su = np.sqrt(s2u)
    w_slope = m2 / s2u
    w_sd = np.sqrt(m2 * tau / s2u)
    xw, ww = _gh(quad.hermite_order)
    xb, wb = _gh(quad.b_hermite_order)
    sqa = np.sqrt(A)
    R = quad.truncation_radius * su
    # two boundary layers meet at each activation edge: the tilted
    # posterior mixes pieces within sqrt(tau / (1 + A tau)), and the
    # channel mass itself (and w | u) turns over within sqrt(tau)
    scale = np.sqrt(tau / (1.0 + A * tau))
    sq_tau = np.sqrt(tau)
    layer_scales = (scale, quad.truncation_radius * scale,
                    sq_tau, quad.truncation_radius * sq_tau)
    wide = max(layer_scales)
    n_edge = max(12, quad.legendre_order // 2)

    def u_panels(lo_c, hi_c, edges):
        cuts = {lo_c, hi_c}
        for c in edges:
            for s in layer_scales:
                for e in (c - s, c + s):
                    if lo_c < e < hi_c:
                        cuts.add(e)
        bounds = sorted(cuts)
        out = []
        for a, b in zip(bounds[:-1], bounds[1:]):
            if b - a <= 1e-13 * (hi_c - lo_c):
                continue
            out.append((a, b, quad.legendre_order
                        if b - a > wide * (1 + 1e-9) else n_edge))
        return out

    B_parts, O_parts, Q_parts = [], [], []
    for kind, lo, hi, t_val in _pieces(channel.activation):
        lo_c = max(lo, -R)
        hi_c = min(hi, R)
        if not hi_c > lo_c:
            continue
        edges = [c for c in (lo, hi) if np.isfinite(c)]
        for a, b_hi, order in u_panels(lo_c, hi_c, edges):
            xu, wu = _gl(order)
            half = 0.5 * (b_hi - a)
            u = 0.5 * (b_hi + a) + half * xu               # (nu,)
            qu = wu * half * _phi(u / su) / su
            w = w_slope * u[:, None] + w_sd * xw[None, :]  # (nu, nw)
            qw = qu[:, None] * ww[None, :]
            t = np.full_like(u, t_val) if kind == "atom" else u
            b = A * t[:, None, None] + sqa * xb[None, None, :]
            shape = (u.size, xw.size, xb.size)
            B_parts.append(np.broadcast_to(b, shape).ravel())
            O_parts.append(np.broadcast_to(w[:, :, None], shape).ravel())
            Q_parts.append((qw[:, :, None] * wb[None, None, :]).ravel())

    return (np.concatenate(B_parts), np.concatenate(O_parts),
            np.concatenate(Q_parts), tau)


def mid_expectations(channel, A, V, rho, quad):
    """(E log Z, E d2B log Z, E d2w log Z) under the channel measure."""
    if channel.activation == "linear":
        # all three expectations are Gaussian moments, no quadrature
        tau = _require_tau(channel, V)
        lam = 1.0 + A * tau
        e_w2 = max(rho - V, 0.0)
        e_t2 = e_w2 + tau
        e_bw = A * e_w2
        e_b2 = A * A * e_t2 + A
        k = -0.5 * np.log(lam) + (e_bw + 0.5 * e_b2 * tau
                                  - 0.5 * A * e_w2) / lam
        return float(k), tau / lam, -A / lam
    B, O, Q, tau = _mid_nodes(channel, A, V, rho, quad)
    log_z, _, t_var, _, u_var = core.mid_moments(
        _ACT_CODE[channel.activation], A, tau, B, O)
    k = float(np.dot(Q, log_z))
    e_d2b = float(np.dot(Q, t_var))
    e_d2w = float(np.dot(Q, (u_var - tau) / (tau * tau)))
    return k, e_d2b, e_d2w


def k_mid(channel, A, V, rho, quad=DEFAULT_QUAD):
    """Free-entropy term E log Z for a hidden channel.

    A is the tilt precision arriving from the layer above, V the
    conditioning variance, rho the second moment of the pre-activation.
    """
    return mid_expectations(channel, A, V, rho, quad)[0]


def e_d2b_mid(channel, A, V, rho, quad=DEFAULT_QUAD):
    return mid_expectations(channel, A, V, rho, quad)[1]


def e_d2w_mid(channel, A, V, rho, quad=DEFAULT_QUAD):
    return mid_expectations(channel, A, V, rho, quad)[2]


def k_mid_mc(channel, A, V, rho, quad=DEFAULT_QUAD, seed=0):
    """Monte Carlo twin of k_mid, for validating the quadrature."""
    rng = np.random.Generator(np.random.Philox(seed))
    n = quad.mc_samples
    tau = _require_tau(channel, V)
    w = rng.normal(0.0, np.sqrt(max(rho - V, 1e-12)), size=n)
    u = w + rng.normal(0.0, np.sqrt(tau), size=n)
    t = apply_activation(channel.activation, u)
    b = A * t + np.sqrt(A) * rng.normal(size=n)
    log_z = log_z_mid(channel, A, b, V, w)
    return float(np.mean(log_z)), float(np.std(log_z) / np.sqrt(n))


# ----------------------------------------------- output-channel operators

def log_z_out(channel, y, V, omega):
    """log Z for an observed output y.

    The reference measure on y has atoms at the saturation values (0 for
    relu, -1 and +1 for hardtanh) and Lebesgue density elsewhere; y exactly
    equal to a saturation value addresses the atom.
    """
    tau = _require_tau(channel, V)
    sq = np.sqrt(tau)
    omega = np.asarray(omega, dtype=float)
    y = float(y)
    act = channel.activation
    if act == "linear":
        return -0.5 * _LOG_2PI - np.log(sq) - 0.5 * (y - omega) ** 2 / tau
    if act == "relu":
        if y == 0.0:
            return log_ndtr(-omega / sq)
        if y > 0.0:
            return -0.5 * _LOG_2PI - np.log(sq) - 0.5 * (y - omega) ** 2 / tau
        return np.full_like(omega, -np.inf)
    if y == -1.0:
        return log_ndtr((-1.0 - omega) / sq)
    if y == 1.0:
        return log_ndtr((omega - 1.0) / sq)
    if -1.0 < y < 1.0:
        return -0.5 * _LOG_2PI - np.log(sq) - 0.5 * (y - omega) ** 2 / tau
    return np.full_like(omega, -np.inf)


def d_dw_log_z_out(channel, y, V, omega):
    tau = _require_tau(channel, V)
    sq = np.sqrt(tau)
    omega = np.asarray(omega, dtype=float)
    y = float(y)
    act = channel.activation
    if act == "relu" and y == 0.0:
        return -_mills_ratio(-omega / sq) / sq
    if act == "hardtanh" and y == -1.0:
        return -_mills_ratio((-1.0 - omega) / sq) / sq
    if act == "hardtanh" and y == 1.0:
        return _mills_ratio((omega - 1.0) / sq) / sq
    return (y - omega) / tau


def d2_dw2_log_z_out(channel, y, V, omega):
    tau = _require_tau(channel, V)
    sq = np.sqrt(tau)
    omega = np.asarray(omega, dtype=float)
    y = float(y)
    act = channel.activation
    if act == "relu" and y == 0.0:
        return _logphi_dd(-omega / sq) / tau
    if act == "hardtanh" and y == -1.0:
        return _logphi_dd((-1.0 - omega) / sq) / tau
    if act == "hardtanh" and y == 1.0:
        return _logphi_dd((omega - 1.0) / sq) / tau
    return np.full_like(omega, -1.0 / tau)


def _xlogx(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x > 0.0, x * np.log(np.maximum(x, 1e-300)), 0.0)
    return out


def _w_panel_nodes(centers, m2, tau, quad):
    """Gauss-Legendre panels over w ~ N(0, m2), refined at the saturation
    thresholds, where output integrands vary on the scale sqrt(tau). A
    plain Hermite rule on the marginal skips those layers entirely once
    sqrt(tau) << sqrt(m2).
    """
    sm = np.sqrt(m2)
    st = np.sqrt(tau)
    R = quad.truncation_radius
    cuts = {-R * sm, R * sm}
    for k in (1.0, 3.0):
        cuts.update((-k * sm, k * sm))
    for c in centers:
        for e in (c - R * st, c, c + R * st):
            cuts.add(min(max(e, -R * sm), R * sm))
    bounds = sorted(cuts)
    xl, wl = _gl(quad.legendre_order)
    nodes, weights = [], []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if not hi > lo:
            continue
        half = 0.5 * (hi - lo)
        n = 0.5 * (hi + lo) + half * xl
        nodes.append(n)
        weights.append(wl * half * _phi(n / sm) / sm)
    return np.concatenate(nodes), np.concatenate(weights)


def k_out(channel, V, rho, quad=DEFAULT_QUAD):
    """Output free-entropy term E over w of integral(Z_out log Z_out dy).

    Equals minus the conditional differential entropy (per unit) of the
    channel output given its input field w ~ N(0, rho - V), with
    conditioning variance V. All inner y-integrals are closed forms; only
    the w average is quadrature.
    """
    tau = _require_tau(channel, V)
    act = channel.activation
    if act == "linear":
        return -0.5 * (_LOG_2PI + 1.0) - 0.5 * np.log(tau)
    m2 = max(rho - V, 1e-12)
    sq = np.sqrt(tau)
    if act == "relu":
        w, qw = _w_panel_nodes((0.0,), m2, tau, quad)
        wh = w / sq
        atom = ndtr(-wh) * log_ndtr(-wh)
        live = (-0.5 * (_LOG_2PI + 1.0) - 0.5 * np.log(tau)) * ndtr(wh) \
            + 0.5 * wh * _phi(wh)
        return float(np.dot(qw, atom + live))
    w, qw = _w_panel_nodes((-1.0, 1.0), m2, tau, quad)
    a = (-1.0 - w) / sq
    b = (1.0 - w) / sq
    atom_lo = ndtr(a) * log_ndtr(a)
    atom_hi = ndtr(-b) * log_ndtr(-b)
    mass = ndtr(b) - ndtr(a)
    live = (-0.5 * (_LOG_2PI + 1.0) - 0.5 * np.log(tau)) * mass \
        + 0.5 * (b * _phi(b) - a * _phi(a))
    return float(np.dot(qw, atom_lo + atom_hi + live))


def e_d2w_out(channel, V, rho, quad=DEFAULT_QUAD):
    """E over (w, y) of d2/domega2 log Z_out at omega = w."""
    tau = _require_tau(channel, V)
    act = channel.activation
    if act == "linear":
        return -1.0 / tau
    m2 = max(rho - V, 1e-12)
    sq = np.sqrt(tau)
    if act == "relu":
        w, qw = _w_panel_nodes((0.0,), m2, tau, quad)
        wh = w / sq
        val = ndtr(-wh) * _logphi_dd(-wh) / tau - ndtr(wh) / tau
        return float(np.dot(qw, val))
    w, qw = _w_panel_nodes((-1.0, 1.0), m2, tau, quad)
    a = (-1.0 - w) / sq
    b = (1.0 - w) / sq
    val = (ndtr(a) * _logphi_dd(a) + ndtr(-b) * _logphi_dd(-b)
           - (ndtr(b) - ndtr(a))) / tau
    return float(np.dot(qw, val))


def k_out_mc(channel, V, rho, quad=DEFAULT_QUAD, seed=0):
    """Monte Carlo twin of k_out."""
    rng = np.random.Generator(np.random.Philox(seed))
    n = quad.mc_samples
    tau = _require_tau(channel, V)
    w = rng.normal(0.0, np.sqrt(max(rho - V, 1e-12)), size=n)
    u = w + rng.normal(0.0, np.sqrt(tau), size=n)
    y = apply_activation(channel.activation, u)
    vals = np.array([log_z_out(channel, float(yi), V, wi)
                     for yi, wi in zip(y, w)])
    return float(np.mean(vals)), float(np.std(vals) / np.sqrt(n))


def channel_conditional_entropy_term(channel, rho_pre, quad=DEFAULT_QUAD):
    """E log p(t | z) for z ~ N(0, rho_pre) through the channel.

    This is k_out with zero conditioning variance; adding it (times the
    layer's width ratio) to the entropy turns it into the mutual
    information with the layer below. Needs noise_var > 0.
    """
    if channel.noise_var <= 0.0:
        raise ValueError("conditional entropy term needs noise_var > 0")
    return k_out(channel, 0.0, rho_pre, quad)


def rho_next(channel, v):
    """Second moment of act(z + noise) for z ~ N(0, v)."""
    t0 = v + channel.noise_var
    act = channel.activation
    if act == "linear":
        return t0
    if act == "relu":
        return 0.5 * t0
    beta = 1.0 / np.sqrt(t0)
    inner = (ndtr(beta) - ndtr(-beta)) - 2.0 * beta * _phi(beta)
    return float(t0 * inner + 2.0 * ndtr(-beta))


def apply_activation(activation, x):
    x = np.asarray(x, dtype=float)
    if activation == "linear":
        return x
    if activation == "relu":
        return np.maximum(x, 0.0)
    if activation == "hardtanh":
        return np.clip(x, -1.0, 1.0)
    raise ValueError(activation)
