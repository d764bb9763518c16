"""Spectral densities of weight Gram matrices and their transforms.

A layer with weight matrix W of shape (n_out, n_in) enters the theory only
through the eigenvalue distribution of W^T W (aspect ratio
alpha = n_out / n_in). Three families are supported:

  * AnalyticMP: the wide-matrix limit law for iid N(0, scale / n_in)
    entries. Mean eigenvalue alpha * scale, bulk support
    scale * [(1 - sqrt(alpha))^2, (1 + sqrt(alpha))^2], plus a point mass
    max(0, 1 - alpha) at zero.
  * PointMass: all eigenvalues equal (orthogonal-column weights).
  * Empirical: an explicit eigenvalue list, e.g. from a realized matrix.

On top of the laws the module provides the two scalar transforms the
replica potential needs: the Stieltjes transform S(z) = E[1 / (lam - z)]
evaluated off the support, and the rectangular log-determinant term

    f_w(x) = min stationary over theta of
             2 alpha theta + (alpha - 1) log(1 - theta) + E log(x lam + g),
             g(theta) = (1 - theta) (1 - alpha theta),

whose stationarity condition is the scalar fixed point theta = psi(theta, x)
with psi(theta, gamma) = 1 - gamma / S(-g(theta) / gamma). The objective is
unbounded below in theta, so "min" means the stationary branch continued
from theta(0) = 0. f_w(0) = 0 for every spectrum.
"""

import dataclasses

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq, minimize_scalar


class SpectrumDomainError(ValueError):
    """Argument outside the domain of a spectral transform."""


class StationaryPointError(RuntimeError):
    """No stationary theta exists for the requested tilt.

    Happens for spectra whose theta = psi(theta, gamma) equation loses its
    real root beyond a spectrum-dependent gamma (e.g. PointMass beyond
    gamma = 1 / 4 at alpha = 1); the log-det term has no real stationary
    branch there.
    """


_MP_QUAD_ORDER = 400


@dataclasses.dataclass(frozen=True)
class AnalyticMP:
    """Limit spectrum of W^T W for iid N(0, scale / n_in) entries."""

    aspect_ratio: float
    scale: float = 1.0

    def __post_init__(self):
        if self.aspect_ratio <= 0:
            raise ValueError("aspect_ratio must be positive")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def mean(self):
        return self.aspect_ratio * self.scale

    def _edges(self):
        a = self.aspect_ratio
        r = np.sqrt(a)
        return self.scale * (1.0 - r) ** 2, self.scale * (1.0 + r) ** 2

    def stieltjes(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z >= 0.0):
            raise SpectrumDomainError("stieltjes transform needs z < 0")
        # closed form for scale 1, rescaled by scale c: S_c(z) = S(z/c) / c
        a = self.aspect_ratio
        u = z / self.scale
        disc = (1.0 + u - a) ** 2 - 4.0 * u
        s = (-(1.0 + u - a) - np.sqrt(disc)) / (2.0 * u)
        out = s / self.scale
        return float(out) if out.ndim == 0 else out

    def _bulk_expect(self, f):
        """E[f(lam) 1{bulk}] by Gauss-Legendre after an arcsine substitution.

        lam = c + h sin t removes the square-root edge singularity, so the
        rule converges spectrally.
        """
        lo, hi = self._edges()
        c = 0.5 * (hi + lo)
        h = 0.5 * (hi - lo)
        x, w = leggauss(_MP_QUAD_ORDER)
        t = 0.5 * np.pi * x
        lam = c + h * np.sin(t)
        dens = (h * np.cos(t)) ** 2 / (2.0 * np.pi * lam) / self.scale
        return float(np.sum(w * (0.5 * np.pi) * f(lam) * dens))

    def log_moment(self, x, g):
        _check_log_moment_args(x, g, 0.0)
        atom = max(0.0, 1.0 - self.aspect_ratio)
        val = self._bulk_expect(lambda lam: np.log(x * lam + g))
        if atom > 0.0:
            val += atom * np.log(g)
        return val

    def support_min(self):
        if self.aspect_ratio < 1.0:
            return 0.0
        return self._edges()[0]


@dataclasses.dataclass(frozen=True)
class PointMass:
    """Degenerate spectrum, all eigenvalues equal to value."""

    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("eigenvalue must be nonnegative")

    def mean(self):
        return self.value

    def stieltjes(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z >= 0.0):
            raise SpectrumDomainError("stieltjes transform needs z < 0")
        out = 1.0 / (self.value - z)
        return float(out) if out.ndim == 0 else out

    def log_moment(self, x, g):
        _check_log_moment_args(x, g, self.value)
        return float(np.log(x * self.value + g))

    def support_min(self):
        return self.value


@dataclasses.dataclass(frozen=True)
class Empirical:
    """Finite list of eigenvalues with optional weights (default uniform)."""

    eigenvalues: tuple
    weights: tuple = None

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.ndim != 1 or ev.size == 0:
            raise ValueError("eigenvalues must be a nonempty 1-d sequence")
        if np.any(ev < 0):
            raise ValueError("eigenvalues must be nonnegative")
        object.__setattr__(self, "eigenvalues", tuple(float(v) for v in ev))
        if self.weights is not None:
            wt = np.asarray(self.weights, dtype=float)
            if wt.shape != ev.shape:
                raise ValueError("weights must match eigenvalues in length")
            if np.any(wt < 0) or abs(wt.sum() - 1.0) > 1e-10:
                raise ValueError("weights must be nonnegative and sum to 1")
            object.__setattr__(self, "weights", tuple(float(v) for v in wt))

    def _arrays(self):
        ev = np.asarray(self.eigenvalues)
        if self.weights is None:
            wt = np.full(ev.size, 1.0 / ev.size)
        else:
            wt = np.asarray(self.weights)
        return ev, wt

    def mean(self):
        ev, wt = self._arrays()
        return float(np.dot(wt, ev))

    def stieltjes(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z >= 0.0):
            raise SpectrumDomainError("stieltjes transform needs z < 0")
        ev, wt = self._arrays()
        out = (1.0 / (ev[..., None] - z.ravel()[None, :])).T @ wt
        out = out.reshape(z.shape)
        return float(out) if out.ndim == 0 else out

    def log_moment(self, x, g):
        ev, wt = self._arrays()
        _check_log_moment_args(x, g, float(ev.min()))
        return float(np.dot(wt, np.log(x * ev + g)))

    def support_min(self):
        return float(min(self.eigenvalues))


def _check_log_moment_args(x, g, lam_min):
    if x < 0.0:
        raise SpectrumDomainError("log moment needs x >= 0")
    if x * lam_min + g <= 0.0:
        raise SpectrumDomainError("log moment needs x * lam + g > 0 on support")


def mp_spectrum(aspect_ratio, scale=1.0):
    return AnalyticMP(aspect_ratio=float(aspect_ratio), scale=float(scale))


def empirical_spectrum(singular_values, n_in):
    """Spectrum of W^T W from the singular values of an (n_out, n_in) matrix.

    Eigenvalues are the squared singular values, zero padded to n_in entries
    so the law matches the n_in x n_in Gram matrix (rank deficit shows up as
    a zero atom), with uniform weights.
    """
    s = np.asarray(singular_values, dtype=float).ravel()
    n_in = int(n_in)
    if s.size > n_in:
        raise ValueError("more singular values than columns")
    ev = np.zeros(n_in)
    ev[: s.size] = s ** 2
    return Empirical(eigenvalues=tuple(ev))


def spectrum_to_dict(spec):
    if isinstance(spec, AnalyticMP):
        return {"kind": "mp", "aspect_ratio": spec.aspect_ratio,
                "scale": spec.scale}
    if isinstance(spec, PointMass):
        return {"kind": "point", "value": spec.value}
    if isinstance(spec, Empirical):
        d = {"kind": "empirical", "eigenvalues": list(spec.eigenvalues)}
        if spec.weights is not None:
            d["weights"] = list(spec.weights)
        return d
    raise TypeError(f"not a spectrum: {spec!r}")


def spectrum_from_dict(d):
    kind = d.get("kind")
    if kind == "mp":
        return AnalyticMP(aspect_ratio=float(d["aspect_ratio"]),
                          scale=float(d.get("scale", 1.0)))
    if kind == "point":
        return PointMass(value=float(d["value"]))
    if kind == "empirical":
        return Empirical(eigenvalues=tuple(d["eigenvalues"]),
                         weights=tuple(d["weights"]) if "weights" in d else None)
    raise ValueError(f"unknown spectrum kind: {kind!r}")


def psi(spectrum, alpha, theta, gamma):
    """Fixed-point map for the stationary theta of the log-det term.

    psi(theta, gamma) = 1 - gamma / S(-g(theta) / gamma) with
    g(theta) = (1 - theta)(1 - alpha theta). Defined for gamma > 0 and
    g(theta) > 0.
    """
    if gamma <= 0.0:
        raise SpectrumDomainError("psi needs gamma > 0")
    g = (1.0 - theta) * (1.0 - alpha * theta)
    if g <= 0.0:
        raise SpectrumDomainError("psi needs (1 - theta)(1 - alpha theta) > 0")
    return 1.0 - gamma / spectrum.stieltjes(-g / gamma)


def theta_solve(spectrum, alpha, gamma, *, grid_points=1025, resid_tol=1e-6):
    """Stationary theta on the branch continued from theta(0) = 0.

    For AnalyticMP the branch is exactly theta = scale * gamma, which also
    analytically continues it once the real root leaves the domain
    theta < min(1, 1/alpha); that closed form is returned directly. Other
    spectra are scanned on [0, min(1, 1/alpha)) for a sign change of
    h(theta) = theta - psi(theta, gamma), polished with a bracketing root
    solve (smallest root wins). If no sign change exists the minimizer of
    h^2 is accepted when |h| < resid_tol (boundary tangency), otherwise
    StationaryPointError is raised.
    """
    gamma = float(gamma)
    if gamma < 0.0:
        raise SpectrumDomainError("theta_solve needs gamma >= 0")
    if gamma == 0.0:
        return 0.0
    if isinstance(spectrum, AnalyticMP):
        return spectrum.scale * gamma
    return _theta_solve_scan(spectrum, alpha, gamma,
                             grid_points=grid_points, resid_tol=resid_tol)


def _theta_solve_scan(spectrum, alpha, gamma, *, grid_points=1025,
                      resid_tol=1e-6):
    """Generic grid-scan root solve behind theta_solve."""
    hi = min(1.0, 1.0 / alpha) * (1.0 - 1e-9)

    def h(theta):
        return theta - psi(spectrum, alpha, theta, gamma)

    grid = np.linspace(0.0, hi, grid_points)
    # spectra with an atom at zero make h vanish again as theta -> hi, so
    # a genuine crossing close to the edge can sit inside one uniform cell
    # with equal signs at both ends; refine geometrically toward the edge
    step = hi / (grid_points - 1)
    edge = hi - np.geomspace(step, 1e-14, 96)
    grid = np.unique(np.concatenate([grid, edge]))
    g = (1.0 - grid) * (1.0 - alpha * grid)
    vals = grid - (1.0 - gamma / spectrum.stieltjes(-g / gamma))
    sign_change = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if sign_change.size:
        i = sign_change[0]
        if vals[i] == 0.0:
            return float(grid[i])
        return float(brentq(h, grid[i], grid[i + 1], xtol=1e-15, rtol=8.9e-16))
    j = int(np.argmin(np.abs(vals)))
    lo = grid[max(j - 1, 0)]
    up = grid[min(j + 1, grid_points - 1)]
    res = minimize_scalar(lambda t: h(t) ** 2, bounds=(lo, up),
                          method="bounded", options={"xatol": 1e-14})
    if abs(h(res.x)) < resid_tol:
        return float(res.x)
    raise StationaryPointError(
        f"theta = psi(theta, gamma) has no real solution at gamma={gamma:.6g} "
        f"(min residual {abs(h(res.x)):.3g}); the spectrum's log-det term has "
        "no stationary point there")


def f_w(spectrum, alpha, x):
    """Rectangular log-det term F_W(x) on the stationary branch.

    For AnalyticMP the branch has the closed form alpha * scale * x, valid
    for all x >= 0 (it analytically continues the variational expression
    past the point where the real stationary theta disappears). Other
    spectra are solved variationally and may raise StationaryPointError.
    """
    x = float(x)
    if x < 0.0:
        raise SpectrumDomainError("f_w needs x >= 0")
    if x == 0.0:
        return 0.0
    if isinstance(spectrum, AnalyticMP):
        return alpha * spectrum.scale * x
    return f_w_variational(spectrum, alpha, x)


def f_w_variational(spectrum, alpha, x):
    """Evaluate F_W(x) through its stationary theta, for any spectrum."""
    x = float(x)
    if x < 0.0:
        raise SpectrumDomainError("f_w needs x >= 0")
    if x == 0.0:
        return 0.0
    theta = theta_solve(spectrum, alpha, x)
    g = (1.0 - theta) * (1.0 - alpha * theta)
    return (2.0 * alpha * theta + (alpha - 1.0) * np.log1p(-theta)
            + spectrum.log_moment(x, g))


def f_w_prime(spectrum, alpha, x):
    """d F_W / d x; equals alpha * theta(x) / x on the stationary branch."""
    x = float(x)
    if x < 0.0:
        raise SpectrumDomainError("f_w needs x >= 0")
    if isinstance(spectrum, AnalyticMP):
        return alpha * spectrum.scale
    if x == 0.0:
        return spectrum.mean()
    return alpha * theta_solve(spectrum, alpha, x) / x
