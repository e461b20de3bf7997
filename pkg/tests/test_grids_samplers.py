import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowreg import driftfield as df
from flowreg import grids
from flowreg import schedules as sc
from flowreg import targets as tg
from flowreg.errors import InvalidParameters, NonFinite, NTooSmall

LIN = sc.lipman_linear()
DIF = sc.rescaled_diffusion()


def gaussian(s, d=1):
    return tg.IsotropicGaussian.create(0.0, s * s, d)


def uniform_grid(h: float, N: int) -> grids.GeometricGrid:
    """Hand-built constant-step grid for recursion algebra tests."""
    nodes = h * np.arange(N + 1)
    return grids.GeometricGrid(tau=h * N, T=h * N + 1.0, N=N, r=1.0, h_max=h,
                               nodes=nodes, steps=np.full(N, h))


# --- grid construction ------------------------------------------------------

def test_grid_example_ratio_half():
    g = grids.build_geometric_grid(0.875, 1.0, 3)
    assert g.r == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(g.steps, [0.5, 0.25, 0.125], atol=1e-15)
    assert np.allclose(g.nodes, [0.0, 0.5, 0.75, 0.875], atol=1e-15)


def test_grid_single_step():
    g = grids.build_geometric_grid(0.3, 1.0, 1)
    assert g.steps[0] == pytest.approx(0.3, abs=1e-15)
    assert g.h_max == pytest.approx(0.3, abs=1e-15)


def test_grid_tau_near_horizon():
    g = grids.build_geometric_grid(1.0 - 1e-9, 1.0, 16)
    assert g.nodes[-1] == pytest.approx(1.0 - 1e-9, abs=1e-12)
    assert np.sum(g.steps) == pytest.approx(1.0 - 1e-9, abs=1e-12)


def test_grid_invalid_parameters():
    for bad in ((0.0, 1.0, 4), (1.0, 1.0, 4), (0.5, 1.0, 0), (-0.1, 1.0, 3)):
        with pytest.raises(InvalidParameters):
            grids.build_geometric_grid(*bad)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=1e-6, max_value=0.999999),
       st.floats(min_value=0.5, max_value=10.0),
       st.integers(min_value=1, max_value=400))
def test_grid_invariants_property(frac, T, N):
    tau = frac * T
    g = grids.build_geometric_grid(tau, T, N)
    tol = 1e-12 * T
    assert abs(g.nodes[0]) <= tol
    assert abs(g.nodes[-1] - tau) <= tol
    assert abs(np.sum(g.steps) - tau) <= tol * max(1, N // 50)
    assert np.all(np.diff(g.nodes) > 0)
    # each step proportional to the remaining distance to T
    assert np.max(np.abs(g.steps - (1 - g.r) * (g.T - g.nodes[:-1]))) <= tol


# --- select_tau ----------------------------------------------------------------

def test_select_tau_lipman_n100():
    tau, T = grids.select_tau("lipman-linear", 100, p=1.0)
    assert T == 1.0
    assert tau == pytest.approx(1.0 - np.log(100.0) ** 2 / 100.0, abs=1e-15)
    assert tau == pytest.approx(0.78792, abs=5e-6)


def test_select_tau_diffusion_n100():
    tau, T = grids.select_tau("rescaled-diffusion", 100)
    assert T == pytest.approx(np.log(100.0), abs=1e-15)
    assert tau == pytest.approx(T - 1e-4, abs=1e-15)


def test_select_tau_small_exponent():
    tau, T = grids.select_tau("lipman-linear", 10_000, p=0.5)
    x = np.log(10_000.0) ** 2 / 10_000.0
    assert tau == pytest.approx(1.0 - x ** 2, abs=1e-15)  # exponent 1/q = 2


def test_select_tau_too_small():
    with pytest.raises(NTooSmall):
        grids.select_tau("lipman-linear", 2)


# --- euler_ode -------------------------------------------------------------------

def test_euler_ode_zero_drift_identity():
    g = grids.build_geometric_grid(0.9, 1.0, 32)
    X0 = np.random.default_rng(0).normal(size=(10, 2))
    X, diag = grids.euler_ode(lambda t, X: np.zeros_like(X), g, X0)
    assert np.array_equal(X, X0)
    assert max(diag.max_drift_norm) == 0.0


def test_euler_ode_single_step():
    g = grids.build_geometric_grid(0.4, 1.0, 1)
    X, _ = grids.euler_ode(lambda t, X: 2.0 * X + 1.0, g, np.array([[1.0]]))
    assert X[0, 0] == pytest.approx(1.0 + 0.4 * 3.0, abs=1e-15)


def test_euler_ode_matches_affine_law_product():
    target = gaussian(2.0)
    g = grids.build_geometric_grid(0.9, 1.0, 64)
    slopes = np.array([df.gaussian_velocity_slope(target, sc.eval_schedule(LIN, t))
                       for t in g.nodes[:-1]])

    def drift(t, X):
        sv = sc.eval_schedule(LIN, t)
        return df.velocity_batch(target, sv, X)

    x0 = 1.37
    X, _ = grids.euler_ode(drift, g, np.array([[x0]]))
    law = grids.propagate_affine_law(slopes, g, grids.GaussianLaw(x0, 0.0))
    assert abs(X[0, 0] - law.mean) <= 1e-12 * max(1.0, abs(law.mean))


@pytest.mark.filterwarnings("ignore:overflow")
def test_euler_ode_nonfinite_reports_step():
    g = grids.build_geometric_grid(0.9, 1.0, 8)
    with pytest.raises(NonFinite, match="step"):
        grids.euler_ode(lambda t, X: X * 1e308, g, np.array([[1.0]]))


# --- euler_maruyama_exact -----------------------------------------------------------

def test_em_zero_noise_reduces_to_euler():
    g = grids.build_geometric_grid(0.8, 1.0, 16)
    X0 = np.random.default_rng(5).normal(size=(6, 2))
    drift = lambda t, X: -X
    a, _ = grids.euler_ode(drift, g, X0)
    b, _ = grids.euler_maruyama_exact(drift, 0.0, g, X0, seed=99)
    assert np.array_equal(a, b)


def test_em_variance_fixed_point_uniform_steps():
    # sigma^2_{k+1} = (1-h)^2 sigma^2_k + 2h has fixed point 2/(2-h)
    h, N = 0.1, 400
    g = uniform_grid(h, N)
    law = grids.propagate_affine_law(np.full(N, -1.0), g,
                                     grids.GaussianLaw(0.0, 1.0), 2.0 * g.steps)
    assert law.var == pytest.approx(2.0 / (2.0 - h), abs=1e-12)


def test_em_exact_increment_variance_mc():
    # single step h with b = sqrt(2): increment variance 2h, n = 1e5 draws
    h = 0.37
    g = grids.GeometricGrid(tau=h, T=1.0, N=1, r=1.0, h_max=h,
                            nodes=np.array([0.0, h]), steps=np.array([h]))
    n = 100_000
    X0 = np.zeros((n, 1))
    X, _ = grids.euler_maruyama_exact(lambda t, X: np.zeros_like(X), np.sqrt(2.0),
                                      g, X0, seed=7)
    var = float(np.var(X))
    se = 2.0 * h * np.sqrt(2.0 / (n - 1))
    assert abs(var - 2.0 * h) <= 4.0 * se


def test_em_step_noise_quadrature_matches_closed_form():
    g = grids.build_geometric_grid(0.9, 1.0, 8)
    const = grids.step_noise_variances(np.sqrt(2.0), g)
    fn = grids.step_noise_variances(lambda t: np.sqrt(2.0), g)
    assert np.allclose(const, 2.0 * g.steps, rtol=1e-14)
    assert np.allclose(fn, const, rtol=1e-10)


def test_em_stability_flagging():
    h = 0.5
    g = uniform_grid(h, 4)
    _, diag = grids.euler_maruyama_exact(lambda t, X: -100.0 * X, 0.0, g,
                                         np.array([[1e-3]]), seed=0,
                                         slope_fn=lambda t: -100.0)
    assert diag.stability_flags == [0, 1, 2, 3]


def test_mc_particles_match_exact_law():
    target = gaussian(2.0)
    N, n = 32, 100_000
    g = grids.build_geometric_grid(0.9, 1.0, N)
    slopes = np.array([df.gaussian_velocity_slope(target, sc.eval_schedule(LIN, t))
                       for t in g.nodes[:-1]])

    def drift(t, X):
        return df.velocity_batch(target, sc.eval_schedule(LIN, t), X)

    rng = np.random.default_rng(123)
    X0 = rng.standard_normal((n, 1))
    X, _ = grids.euler_ode(drift, g, X0)
    law = grids.propagate_affine_law(slopes, g, grids.GaussianLaw(0.0, 1.0))
    emp = float(np.var(X))
    se = law.var * np.sqrt(2.0 / (n - 1))
    assert abs(emp - law.var) <= 4.0 * se


# --- propagate_affine_law ------------------------------------------------------------

def test_affine_law_identity_and_one_step():
    g = grids.build_geometric_grid(0.5, 1.0, 4)
    law = grids.propagate_affine_law(np.zeros(4), g, grids.GaussianLaw(1.0, 2.0))
    assert law.mean == 1.0 and law.var == 2.0

    g1 = uniform_grid(0.5, 1)
    law1 = grids.propagate_affine_law(np.array([1.0]), g1, grids.GaussianLaw(0.0, 1.0))
    assert law1.var == pytest.approx(2.25, abs=1e-15)


def test_affine_law_gap_shrinks_with_refinement():
    target = gaussian(2.0)

    def final_gap(N):
        tau, T = grids.select_tau("lipman-linear", N, p=1.0)
        g = grids.build_geometric_grid(tau, T, N)
        slopes = np.array([df.gaussian_velocity_slope(target, sc.eval_schedule(LIN, t))
                           for t in g.nodes[:-1]])
        law = grids.propagate_affine_law(slopes, g, grids.GaussianLaw(0.0, 1.0))
        return abs(np.sqrt(law.var) - 2.0)

    assert final_gap(256) < final_gap(64) < final_gap(16)


# --- early stopping --------------------------------------------------------------------

def test_early_stopping_bound_vanishes_at_terminal():
    target = gaussian(2.0)
    sv = sc.eval_schedule(LIN, 1.0 - 1e-9)
    assert grids.early_stopping_bound(target, sv, 4) <= 1e-7


@pytest.mark.parametrize("make", [sc.lipman_linear, sc.rescaled_diffusion])
@pytest.mark.parametrize("s", [0.5, 2.0])
def test_early_stopping_bound_dominates_exact_w2(make, s):
    from flowreg.metrics import w2_gaussian_isotropic
    target = gaussian(s, 3)
    schedule = make()
    for tau in np.linspace(0, 1, 101):
        sv = sc.eval_schedule(schedule, tau) if 0 < tau < 1 else None
        if sv is None:
            continue
        bound = grids.early_stopping_bound(target, sv, 3)
        exact = w2_gaussian_isotropic(0.0, np.sqrt(sv.f ** 2 * s * s + sv.gbar ** 2),
                                      0.0, s, 3)
        assert bound >= exact - 1e-12


def test_early_stopping_bound_sphere_form():
    sph = tg.SphereUniform(6)
    sv = sc.eval_schedule(DIF, 0.8)
    expected = np.sqrt((1 - sv.f) ** 2 * 1.0 + 6 * sv.gbar ** 2)
    assert grids.early_stopping_bound(sph, sv, 6) == pytest.approx(expected, rel=1e-14)


# --- contractive window audit ------------------------------------------------------------

def test_reverse_drift_contractive_for_standard_gaussian():
    g2 = gaussian(1.0, 2)
    rng = np.random.default_rng(17)
    T = 3.0
    for t in (0.2, 1.0, 2.5):
        x = rng.normal(size=2)
        y = rng.normal(size=2)
        ax = df.reverse_sde_drift(g2, T, t, x)
        ay = df.reverse_sde_drift(g2, T, t, y)
        inner = float(np.dot(x - y, ax - ay))
        dist2 = float(np.dot(x - y, x - y))
        assert inner == pytest.approx(-dist2, rel=1e-12)
        assert inner / dist2 <= -0.5
