import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowreg import metrics
from flowreg.errors import LengthMismatch, TooLarge


def brute_force_w2(xs, ys):
    """Exact assignment by enumerating all matchings (n <= 8)."""
    xs = np.atleast_2d(xs)
    ys = np.atleast_2d(ys)
    n = xs.shape[0]
    best = np.inf
    for perm in itertools.permutations(range(n)):
        cost = float(np.sum((xs - ys[list(perm)]) ** 2)) / n
        best = min(best, cost)
    return float(np.sqrt(best))


# --- gaussian (Bures) -----------------------------------------------------------

def test_bures_identical_zero():
    assert metrics.w2_gaussian_isotropic(0.0, 1.3, 0.0, 1.3, 7) == 0.0


def test_w2_report_record():
    rep = metrics.w2_report(0.5, metrics.BURES_EXACT)
    assert rep.value == 0.5 and rep.n == 0
    with pytest.raises(ValueError):
        metrics.w2_report(-0.1, metrics.QUANTILE_1D)


def test_bures_1d_scale_gap():
    assert metrics.w2_gaussian_isotropic(0.0, 1.0, 0.0, 2.0, 1) == pytest.approx(1.0)


def test_bures_mean_shift():
    m1 = np.zeros(16)
    m2 = np.zeros(16)
    m2[0] = 1.0
    assert metrics.w2_gaussian_isotropic(m1, 0.7, m2, 0.7, 16) == pytest.approx(1.0)


# --- 1d quantile coupling ----------------------------------------------------------

def test_w2_1d_examples():
    assert metrics.w2_empirical_1d([3.0, 1.0, 2.0], [1.0, 2.0, 3.0]) == 0.0
    assert metrics.w2_empirical_1d([0.0, 1.0], [1.0, 2.0]) == pytest.approx(1.0)
    with pytest.raises(LengthMismatch):
        metrics.w2_empirical_1d([1.0], [1.0, 2.0])


def test_w2_1d_equals_assignment_on_random_pairs():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = rng.integers(1, 40)
        xs = rng.normal(size=n)
        ys = rng.normal(loc=0.5, size=n)
        a = metrics.w2_empirical_1d(xs, ys)
        b = metrics.w2_empirical_assignment(xs, ys)
        assert abs(a - b) <= 1e-12 * (1 + a)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=24),
       st.data())
def test_w2_1d_equals_assignment_property(xs, data):
    ys = data.draw(st.lists(st.floats(min_value=-50, max_value=50),
                            min_size=len(xs), max_size=len(xs)))
    a = metrics.w2_empirical_1d(xs, ys)
    b = metrics.w2_empirical_assignment(np.array(xs), np.array(ys))
    assert abs(a - b) <= 1e-9 * (1 + a)


# --- exact assignment ------------------------------------------------------------------

def test_assignment_single_pair_and_permutation():
    assert metrics.w2_empirical_assignment(np.array([[1.0, 2.0]]),
                                           np.array([[4.0, 6.0]])) == pytest.approx(5.0)
    xs = np.random.default_rng(0).normal(size=(12, 3))
    perm = np.random.default_rng(1).permutation(12)
    assert metrics.w2_empirical_assignment(xs, xs[perm]) == pytest.approx(0.0, abs=1e-12)


def test_assignment_hand_instance_vs_brute_force():
    xs = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    ys = np.array([[1.0, 1.0], [0.0, 0.0], [2.0, 0.0]])
    assert metrics.w2_empirical_assignment(xs, ys) == pytest.approx(brute_force_w2(xs, ys),
                                                                    abs=1e-14)


def test_assignment_matches_brute_force_random():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        d = int(rng.integers(1, 4))
        xs = rng.normal(size=(n, d))
        ys = rng.normal(size=(n, d))
        assert metrics.w2_empirical_assignment(xs, ys) == pytest.approx(
            brute_force_w2(xs, ys), abs=1e-12)


def test_assignment_cap():
    xs = np.zeros((4097, 1))
    with pytest.raises(TooLarge):
        metrics.w2_empirical_assignment(xs, xs)


def test_triangle_inequality_random_triples():
    rng = np.random.default_rng(29)
    for _ in range(10):
        a = rng.normal(size=(64, 2))
        b = rng.normal(loc=1.0, size=(64, 2))
        c = rng.normal(scale=2.0, size=(64, 2))
        ab = metrics.w2_empirical_assignment(a, b)
        bc = metrics.w2_empirical_assignment(b, c)
        ac = metrics.w2_empirical_assignment(a, c)
        assert ac <= ab + bc + 1e-10


def test_assignment_near_population_w2_for_gaussian_clouds():
    # two isotropic Gaussian clouds, n = 4096, d = 2; empirical optimal cost
    # should sit within 10% of the population Bures distance (seed-dependent
    # statistical statement; this seed gives ~1-2%)
    rng = np.random.default_rng(2024)
    n = 4096
    xs = rng.normal(size=(n, 2))
    ys = rng.normal(size=(n, 2)) * 1.0 + np.array([3.0, 0.0])
    pop = metrics.w2_gaussian_isotropic(np.array([0.0, 0.0]), 1.0,
                                        np.array([3.0, 0.0]), 1.0, 2)
    emp = metrics.w2_empirical_assignment(xs, ys)
    assert abs(emp - pop) <= 0.10 * pop
