"""Reference values the solver outputs are validated against.

Three independent routes:

  * exact covariance propagation for fully linear networks (entropies and
    mutual informations from log-determinants, no asymptotics),
  * the closed single-layer formula I = E_lam log(1 + lam / noise) / 2 in
    terms of the weight spectrum alone,
  * nonparametric estimates from samples: a k-nearest-neighbor entropy
    estimator and a Gaussian-mixture pairwise upper bound.

All entropies are differential, in nats.
"""

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma, gammaln, logsumexp

_LOG_2PI = float(np.log(2.0 * np.pi))


class DuplicatePointsError(ValueError):
    """Zero nearest-neighbor distances break the kNN estimator."""


def _linear_chain_covariances(net, layer, noise_convention="as_specified"):
    """Covariance of t_layer and of t_layer given t_0 for a linear net."""
    for ch in net.channels[:layer]:
        if ch.activation != "linear":
            raise ValueError("exact Gaussian oracle needs linear channels")
    cov = net.prior.variance * np.eye(net.n_units[0])
    cond = np.zeros((net.n_units[0], net.n_units[0]))
    for k in range(layer):
        w = net.weights[k]
        nv = net.channels[k].noise_var
        if noise_convention == "target_layer_only":
            nv = nv if k == layer - 1 else 0.0
        elif noise_convention != "as_specified":
            raise ValueError(f"unknown noise convention {noise_convention!r}")
        eye = nv * np.eye(w.shape[0])
        cov = w @ cov @ w.T + eye
        cond = w @ cond @ w.T + eye
    return cov, cond


def exact_gaussian_entropy(net, layer, noise_convention="as_specified"):
    """H(t_layer) per input unit for a realized linear network."""
    cov, _ = _linear_chain_covariances(net, layer, noise_convention)
    n = cov.shape[0]
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0:
        raise ValueError("degenerate layer covariance; add noise")
    return (0.5 * n * (_LOG_2PI + 1.0) + 0.5 * logdet) / net.n_units[0]


def exact_gaussian_mi(net, layer, noise_convention="as_specified"):
    """I(t_0; t_layer) per input unit for a realized linear network."""
    cov, cond = _linear_chain_covariances(net, layer, noise_convention)
    s1, ld1 = np.linalg.slogdet(cov)
    s2, ld2 = np.linalg.slogdet(cond)
    if s1 <= 0 or s2 <= 0:
        raise ValueError("degenerate covariance; the mutual information "
                         "needs noise on the path to the target layer")
    return 0.5 * (ld1 - ld2) / net.n_units[0]


def linear_replica_closed_form(spectrum, noise_var):
    """I(t_0; W t_0 + noise) per input unit from the spectrum alone.

    Equals E_lam log(1 + lam / noise_var) / 2 over the spectrum of W^T W
    (zero padded to the input width, so rank deficit contributes nothing).
    Exact at finite size for Empirical spectra of realized matrices with a
    unit Gaussian prior; the wide-network limit for AnalyticMP.
    """
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    return 0.5 * (spectrum.log_moment(1.0, noise_var)
                  - np.log(noise_var))


def kraskov_entropy(samples, k=4, metric="euclidean", jitter_scale=None,
                    seed=0):
    """k-nearest-neighbor differential entropy estimate, in nats.

    H_hat = psi(N) - psi(k) + log V_d + (d / N) sum_i log r_i with r_i the
    distance from point i to its k-th neighbor and V_d the unit-ball
    volume of the chosen metric. Exact duplicates give r_i = 0 and are an
    error unless jitter_scale is set, in which case iid N(0, jitter^2)
    is added to every coordinate first (seeded).
    """
    x = np.ascontiguousarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[0] <= k:
        raise ValueError("need a 2-d sample array with more than k rows")
    n, d = x.shape
    if jitter_scale is not None:
        rng = np.random.Generator(np.random.Philox(seed))
        x = x + rng.normal(0.0, jitter_scale, size=x.shape)
    if metric == "euclidean":
        p = 2.0
        log_vd = 0.5 * d * np.log(np.pi) - gammaln(0.5 * d + 1.0)
    elif metric == "chebyshev":
        p = np.inf
        log_vd = d * np.log(2.0)
    else:
        raise ValueError("metric must be euclidean or chebyshev")
    tree = cKDTree(x)
    dist, _ = tree.query(x, k=k + 1, p=p)
    r = dist[:, -1]
    if np.any(r <= 0.0):
        raise DuplicatePointsError(
            "duplicate points give zero neighbor distances; pass "
            "jitter_scale to break ties")
    return float(digamma(n) - digamma(k) + log_vd + d * np.mean(np.log(r)))


def kolchinsky_entropy_upper(centers, noise_var, mode="noisy_sample",
                             chunk=1024, return_se=False):
    """Pairwise-distance upper bound on the entropy of a Gaussian mixture.

    Treats the rows of centers as the component means of an equal-weight
    mixture of N(mu_i, noise_var I) and returns

        H_hat = d/2 log(2 pi e s^2)
                - mean_i [ logsumexp_j( -|mu_i - mu_j|^2 / (2 s^2) ) - log N ]

    which upper bounds the true mixture entropy. mode records how the
    centers were produced: "noisy_sample" for raw samples of the layer,
    "parametric" for the deterministic (noise-free) images with the noise
    put back through noise_var. The formula is the same; the mode is kept
    so result tables stay self-describing. With return_se the standard
    error of the mean over the per-center terms comes back as well.
    """
    if mode not in ("noisy_sample", "parametric"):
        raise ValueError("mode must be noisy_sample or parametric")
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    x = np.ascontiguousarray(centers, dtype=float)
    n, d = x.shape
    sq = np.sum(x * x, axis=1)
    inner = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (x[lo:hi] @ x.T)
        np.maximum(d2, 0.0, out=d2)
        inner[lo:hi] = logsumexp(-0.5 * d2 / noise_var, axis=1)
    val = float(0.5 * d * (_LOG_2PI + 1.0 + np.log(noise_var))
                - np.mean(inner) + np.log(n))
    if not return_se:
        return val
    se = float(np.std(inner, ddof=1) / np.sqrt(n))
    return val, se
