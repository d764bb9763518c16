"""Spectral laws and the scalar transforms built on them."""

import numpy as np
import pytest
from scipy.integrate import quad

from netent.spectra import (AnalyticMP, Empirical, PointMass,
                            SpectrumDomainError, StationaryPointError,
                            empirical_spectrum, f_w, f_w_prime,
                            f_w_variational, mp_spectrum, psi,
                            spectrum_from_dict, spectrum_to_dict, theta_solve)


def _gaussian_gram_spectrum(alpha, n_in, scale=1.0, seed=0):
    rng = np.random.default_rng(seed)
    n_out = int(round(alpha * n_in))
    w = rng.normal(0.0, np.sqrt(scale / n_in), size=(n_out, n_in))
    return empirical_spectrum(np.linalg.svd(w, compute_uv=False), n_in)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("scale", [1.0, 0.3])
def test_mp_mean_and_support(alpha, scale):
    sp = AnalyticMP(alpha, scale)
    assert sp.mean() == pytest.approx(alpha * scale, rel=1e-12)
    lo = scale * (1.0 - np.sqrt(alpha)) ** 2
    if alpha < 1.0:
        assert sp.support_min() == 0.0
    else:
        assert sp.support_min() == pytest.approx(lo, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("z", [-0.05, -0.7, -3.0])
def test_mp_stieltjes_matches_density_quadrature(alpha, z):
    # independent route: adaptive quadrature of the bulk density plus the
    # zero atom, against the closed-form transform
    sp = AnalyticMP(alpha, 1.0)
    lo = (1.0 - np.sqrt(alpha)) ** 2
    hi = (1.0 + np.sqrt(alpha)) ** 2

    def dens(lam):
        return np.sqrt((hi - lam) * (lam - lo)) / (2.0 * np.pi * lam)

    bulk, err = quad(lambda lam: dens(lam) / (lam - z), lo, hi,
                     epsabs=1e-12, epsrel=1e-12, limit=200)
    expected = bulk + max(0.0, 1.0 - alpha) / (0.0 - z)
    assert sp.stieltjes(z) == pytest.approx(expected, rel=1e-9)
    assert err < 1e-8


def test_mp_stieltjes_scale_covariance():
    base = AnalyticMP(0.7, 1.0)
    scaled = AnalyticMP(0.7, 2.5)
    z = -0.9
    assert scaled.stieltjes(z) == pytest.approx(
        base.stieltjes(z / 2.5) / 2.5, rel=1e-12)


def test_stieltjes_rejects_nonnegative_argument():
    for sp in (AnalyticMP(1.0), PointMass(2.0), Empirical((0.5, 1.5))):
        with pytest.raises(SpectrumDomainError):
            sp.stieltjes(0.0)
        with pytest.raises(SpectrumDomainError):
            sp.stieltjes(1.0)


@pytest.mark.parametrize("spec, alpha", [
    (PointMass(1.0), 1.0),
    (Empirical(tuple(np.linspace(0.2, 2.4, 60))), 1.0),
    (_gaussian_gram_spectrum(0.5, 400, seed=1), 0.5),
])
def test_theta_solve_satisfies_fixed_point(spec, alpha):
    for gamma in (0.02, 0.1, 0.2):
        theta = theta_solve(spec, alpha, gamma)
        assert theta == pytest.approx(psi(spec, alpha, theta, gamma),
                                      abs=1e-9)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("scale", [1.0, 0.6])
def test_theta_solve_mp_closed_form_is_consistent(alpha, scale):
    # the closed form theta = scale * gamma must solve theta = psi on the
    # domain where the stationary branch is real
    sp = AnalyticMP(alpha, scale)
    gmax = 0.9 * min(1.0, 1.0 / alpha) / scale
    for gamma in np.linspace(0.05, 1.0, 5) * gmax:
        theta = theta_solve(sp, alpha, gamma)
        assert theta == pytest.approx(scale * gamma, rel=1e-12)
        assert theta == pytest.approx(psi(sp, alpha, theta, gamma),
                                      abs=1e-10)


def test_theta_solve_gamma_zero_is_zero():
    assert theta_solve(AnalyticMP(1.0), 1.0, 0.0) == 0.0
    assert theta_solve(PointMass(1.0), 1.0, 0.0) == 0.0


def test_point_mass_loses_stationary_point():
    # unit point mass at alpha 1: the real root disappears past
    # gamma = 1/4; both sides of the boundary behave as documented
    sp = PointMass(1.0)
    theta = theta_solve(sp, 1.0, 0.2)
    assert theta == pytest.approx(psi(sp, 1.0, theta, 0.2), abs=1e-9)
    with pytest.raises(StationaryPointError):
        theta_solve(sp, 1.0, 0.4)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_f_w_gaussian_identity_and_variational_route(alpha):
    sp = AnalyticMP(alpha, 1.0)
    for x in np.linspace(0.0, 10.0, 21):
        assert abs(f_w(sp, alpha, x) - alpha * x) <= 1e-12
    # the variational evaluation reproduces the closed form wherever the
    # stationary branch is real
    for x in np.linspace(0.05, 0.85, 5) * min(1.0, 1.0 / alpha):
        assert f_w_variational(sp, alpha, x) == pytest.approx(
            alpha * x, abs=1e-9)


def test_f_w_empirical_tracks_gaussian_limit():
    alpha = 0.5
    sp = _gaussian_gram_spectrum(alpha, 1200, seed=3)
    for x in (0.1, 0.5, 1.0):
        assert f_w_variational(sp, alpha, x) == pytest.approx(
            alpha * x, rel=2e-2)


def test_f_w_at_zero_and_domain():
    sp = Empirical((0.3, 1.1, 2.0))
    assert f_w(sp, 1.0, 0.0) == 0.0
    with pytest.raises(SpectrumDomainError):
        f_w(sp, 1.0, -0.5)


def test_f_w_prime_matches_difference_quotient():
    alpha = 1.0
    sp = Empirical(tuple(np.linspace(0.3, 1.8, 50)))
    for x in (0.05, 0.15):
        h = 1e-6
        fd = (f_w_variational(sp, alpha, x + h)
              - f_w_variational(sp, alpha, x - h)) / (2.0 * h)
        assert f_w_prime(sp, alpha, x) == pytest.approx(fd, rel=1e-5)
    assert f_w_prime(sp, alpha, 0.0) == pytest.approx(sp.mean(), rel=1e-12)


def test_empirical_spectrum_zero_pads_rank_deficit():
    s = np.array([2.0, 1.0])
    sp = empirical_spectrum(s, 5)
    ev = np.sort(sp.eigenvalues)
    assert ev[:3].tolist() == [0.0, 0.0, 0.0]
    assert ev[-2:].tolist() == [1.0, 4.0]
    with pytest.raises(ValueError):
        empirical_spectrum(np.ones(6), 5)


def test_log_moment_matches_direct_sum():
    ev = (0.5, 1.0, 2.5)
    sp = Empirical(ev)
    got = sp.log_moment(2.0, 0.3)
    want = np.mean(np.log(2.0 * np.array(ev) + 0.3))
    assert got == pytest.approx(want, rel=1e-14)
    with pytest.raises(SpectrumDomainError):
        sp.log_moment(1.0, -1.0)


@pytest.mark.parametrize("spec", [
    AnalyticMP(0.5, 2.0),
    PointMass(1.3),
    Empirical((0.1, 0.9, 2.2)),
    Empirical((0.1, 0.9), weights=(0.25, 0.75)),
])
def test_spectrum_dict_round_trip(spec):
    assert spectrum_from_dict(spectrum_to_dict(spec)) == spec


def test_spectrum_from_dict_rejects_unknown_kind():
    with pytest.raises(ValueError):
        spectrum_from_dict({"kind": "cauchy"})


def test_mp_spectrum_factory():
    sp = mp_spectrum(0.5, scale=4.0)
    assert isinstance(sp, AnalyticMP)
    assert sp.aspect_ratio == 0.5 and sp.scale == 4.0
