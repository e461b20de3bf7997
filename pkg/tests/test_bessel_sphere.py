import numpy as np
import pytest

from flowreg import bessel_sphere as bs
from flowreg.errors import InvalidDimension, OutOfDomain, Overflow

from helpers import fd_derivative

COTH1_MINUS_1 = 0.3130352854993313  # coth(1) - 1, frozen from mpmath-grade eval


# --- continued fraction vs series oracle -------------------------------------

@pytest.mark.parametrize("d", [2, 3, 8, 32])
@pytest.mark.parametrize("kappa", [1e-3, 1.0, 10.0, 100.0])
def test_cf_matches_series_oracle(d, kappa):
    # A fixed 64-term truncation under-resolves kappa = 100 (error ~1e-3),
    # so the oracle deepens there; the CF accuracy contract stays 1e-10.
    terms = 64 if kappa <= 10 else 256
    ref = bs.bessel_ratio_series(d, kappa, terms=terms)
    assert abs(bs.bessel_ratio(d, kappa) - ref) <= 1e-10 * ref


@pytest.mark.parametrize("d", [2, 3, 8, 32])
@pytest.mark.parametrize("kappa", [1e-3, 1.0, 10.0])
def test_cf_matches_literal_64_term_series(d, kappa):
    ref = bs.bessel_ratio_series(d, kappa, terms=64)
    assert abs(bs.bessel_ratio(d, kappa) - ref) <= 1e-10 * ref


def test_cf_matches_scipy_scaled_bessels():
    from scipy.special import ive
    for d in (2, 5, 10, 33):
        for kappa in (0.01, 0.7, 3.0, 50.0, 1000.0):
            ref = ive(d / 2, kappa) / ive(d / 2 - 1, kappa)
            assert abs(bs.bessel_ratio(d, kappa) - ref) <= 1e-12 * (1 + ref)


def test_ratio_range_and_monotonicity():
    for d in (2, 4, 16):
        ks = np.geomspace(1e-4, 1e4, 200)
        vals = np.array([bs.bessel_ratio(d, k) for k in ks])
        assert np.all((vals > 0) & (vals < 1))
        assert np.all(np.diff(vals) > 0)
    assert bs.bessel_ratio(7, 0.0) == 0.0


def test_closed_form_d3():
    assert bs.bessel_ratio(3, 1.0) == pytest.approx(COTH1_MINUS_1, abs=1e-10)
    # I_{3/2}/I_{1/2} = coth(k) - 1/k at other arguments too
    for k in (0.2, 2.0, 8.0):
        assert bs.bessel_ratio(3, k) == pytest.approx(1 / np.tanh(k) - 1 / k, abs=1e-12)


# --- derivative identity -----------------------------------------------------

@pytest.mark.parametrize("d", [2, 3, 8, 32])
def test_ratio_derivative_identity_and_fd(d):
    for kappa in (0.05, 0.7, 3.0, 25.0):
        A = bs.bessel_ratio(d, kappa)
        Ap = bs.bessel_ratio_derivative(d, kappa)
        assert abs(Ap - (1 - A * A - (d - 1) * A / kappa)) <= 1e-10
        fd = fd_derivative(lambda k: bs.bessel_ratio(d, k), kappa)
        assert abs(Ap - fd) <= 1e-6 * (1 + abs(fd))
    assert bs.bessel_ratio_derivative(d, 0.0) == pytest.approx(1.0 / d)


# --- asymptotics ----------------------------------------------------------------

def test_small_kappa_asymptote():
    d, kappa = 10, 1e-3
    assert abs(bs.bessel_ratio(d, kappa) - kappa / d) <= 1e-7


def test_large_kappa_gap_follows_second_order_term():
    # |A - (1 - (d-1)/(2k))| equals (d-1)(d-3)/(8 k^2) to leading order.
    d, kappa = 10, 1e3
    gap = abs(bs.bessel_ratio(d, kappa) - (1 - (d - 1) / (2 * kappa)))
    predicted = (d - 1) * (d - 3) / (8 * kappa ** 2)
    assert abs(gap - predicted) <= 0.05 * predicted


# --- eigenvalues ------------------------------------------------------------------

def test_tube_regime_eigenvalues():
    d, t = 8, 0.999
    s2 = 1 - t * t
    lam_tan, lam_rad = bs.sphere_eigenvalues(d, t, 1.0)
    assert abs(lam_rad + 1 / s2) <= 0.05 / s2
    assert abs(lam_tan) * np.sqrt(s2) <= 5.0
    # C stays stable as t -> 1
    for tt in (0.9990, 0.9999):
        lt, _ = bs.sphere_eigenvalues(d, tt, 1.0)
        assert abs(lt) * np.sqrt(1 - tt * tt) <= 5.0


def test_on_sphere_small_time_limits_finite():
    for t in (1e-4, 1e-3, 1e-2):
        lam_tan, lam_rad = bs.sphere_eigenvalues(6, t, 1.0)
        assert np.isfinite(lam_tan) and np.isfinite(lam_rad)
        assert abs(lam_tan) <= 1.0 and abs(lam_rad) <= 1.0


def test_tangential_eigenvalue_decreases_in_radius():
    d, t = 5, 0.6
    for r in (0.9, 1.0, 1.1):
        h = 1e-6
        up = bs.sphere_eigenvalues(d, t, r + h)[0]
        dn = bs.sphere_eigenvalues(d, t, r - h)[0]
        assert (up - dn) / (2 * h) < 0.0


def test_origin_jacobian_example_and_limits():
    # d=4, t=0.9: 0.9/(4*0.0361) - 0.9/0.19
    val = bs.sphere_origin_jacobian(4, 0.9)
    assert val == pytest.approx(0.9 / (4 * 0.19 ** 2) - 0.9 / 0.19, abs=1e-12)
    assert val == pytest.approx(1.4958, abs=5e-4)
    # blow-up rate: lambda * d sigma^4 / t -> 1 (the gap is d sigma^2)
    for t, tol in ((0.9999, 2e-3), (0.99999, 2e-4)):
        s2 = 1 - t * t
        assert bs.sphere_origin_jacobian(8, t) * 8 * s2 * s2 / t == pytest.approx(1.0, abs=tol)
    assert bs.sphere_origin_jacobian(8, 1e-12) == pytest.approx(0.0, abs=1e-11)


def test_domain_errors():
    with pytest.raises(InvalidDimension):
        bs.bessel_ratio(1, 1.0)
    with pytest.raises(Overflow):
        bs.bessel_ratio(4, 2e8)
    with pytest.raises(OutOfDomain):
        bs.sphere_eigenvalues(4, 0.5, 0.0)
    with pytest.raises(OutOfDomain):
        bs.sphere_eigenvalues(4, 1.0, 1.0)


# --- ambient vs tube separation (clean asymptotic windows) --------------------

def test_slope_separation_asymptotic_window():
    # On the dyadic tail j = 8..12 the three series show their limiting
    # powers of sigma: -4 at the origin, -2 radially, ~0 tangentially.
    js = np.arange(8, 13)
    t = 1 - 2.0 ** (-js.astype(float))
    s2 = 1 - t * t
    x = 0.5 * np.log(s2)
    lam0 = np.array([bs.sphere_origin_jacobian(8, tt) for tt in t])
    rad = np.array([bs.sphere_eigenvalues(8, tt, 1.0)[1] for tt in t])
    tan = np.array([bs.sphere_eigenvalues(8, tt, 1.0)[0] for tt in t])
    s_origin = np.polyfit(x, np.log(lam0), 1)[0]
    s_rad = np.polyfit(x, np.log(np.abs(rad)), 1)[0]
    s_tan = np.polyfit(x, np.log(np.abs(tan)), 1)[0]
    assert abs(s_origin + 4) <= 0.1
    assert abs(s_rad + 2) <= 0.1
    assert s_tan >= -1.2
    # the ambient supremum blows up much faster than the on-sphere rates
    assert s_origin < s_rad < s_tan
