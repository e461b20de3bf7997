"""Velocity field, Jacobian, time derivative, and reverse-SDE drift.

All three model families share the same assembly: with a_t = gbar'/gbar and
c_t = f' - a_t f, the velocity is v_t(x) = a_t x + c_t mu_t(x), equivalently
(f'/f) x + (f' gbar^2/f - gbar gbar') s_t(x) wherever f_t > 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import targets as tg
from .errors import OutOfDomain, SecondDerivativeUnavailable, UnsupportedMethod
from .schedules import Schedule, ScheduleValues, eval_schedule, schedule_point

F_SWITCH = 1e-8      # below this, the score form of v divides by ~0
FD_STEP = 1e-5
TIME_FD_LO = 1e-4    # finite differences in t only inside (1e-4, 1 - 1e-4)
TIME_FD_HI = 1.0 - 1e-4

ANALYTIC = "analytic"
COVARIANCE = "covariance"
FINITE_DIFF = "fd"

DECOMPOSITION = "decomposition"

EIG_DIRECT_MAX_DIM = 64
POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000


@dataclass(frozen=True)
class DriftEvaluation:
    v: np.ndarray
    jac: np.ndarray
    dtv: np.ndarray
    lambda_max: float


def lambda_max_sym(J: np.ndarray) -> float:
    """Largest eigenvalue of the symmetrized Jacobian (J + J^T)/2."""
    S = 0.5 * (J + J.T)
    d = S.shape[0]
    if d <= EIG_DIRECT_MAX_DIM:
        return float(np.linalg.eigvalsh(S)[-1])
    # Power iteration on the shifted matrix; the shift makes the largest
    # algebraic eigenvalue also largest in magnitude.  Stops on the
    # eigen-residual, so accuracy degrades only for near-degenerate spectra.
    shift = float(np.abs(S).sum(axis=1).max()) + 1.0
    B = S + shift * np.eye(d)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(d)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(POWER_MAX_ITER):
        y = B @ x
        lam = float(x @ y)
        resid = float(np.linalg.norm(y - lam * x))
        x = y / np.linalg.norm(y)
        if resid <= POWER_TOL * shift:
            break
    return lam - shift


def operator_norm(J: np.ndarray) -> float:
    """Spectral norm; all in-scope targets have symmetric Jacobians, for
    which this is just max |eigenvalue|."""
    if np.allclose(J, J.T, rtol=0.0, atol=1e-12 * (1.0 + np.abs(J).max())):
        w = np.linalg.eigvalsh(0.5 * (J + J.T))
        return float(max(abs(w[0]), abs(w[-1])))
    return float(np.linalg.norm(J, 2))


# ---------------------------------------------------------------------------
# Velocity
# ---------------------------------------------------------------------------

def velocity(target, sv: ScheduleValues, x: np.ndarray) -> np.ndarray:
    """v_t(x); score form for f_t > 1e-8, posterior-mean form otherwise."""
    if not (sv.gbar > 0.0):
        raise OutOfDomain(f"gbar={sv.gbar} must be positive")
    x = np.asarray(x, dtype=float)
    ps = tg.posterior(target, sv, x)
    if sv.f > F_SWITCH:
        coef = sv.f1 * sv.gbar ** 2 / sv.f - sv.gbar * sv.gbar1
        return (sv.f1 / sv.f) * x + coef * ps.score
    return sv.a * x + sv.c * ps.mu


def gaussian_velocity_slope(target: tg.IsotropicGaussian, sv: ScheduleValues) -> float:
    """Slope k_t of the (affine) Gaussian velocity; independent of the mean."""
    if not isinstance(target, tg.IsotropicGaussian):
        raise UnsupportedMethod("linear slope only defined for Gaussian targets")
    g2 = sv.gbar ** 2
    denom = sv.f ** 2 * target.var + g2
    return sv.a + sv.c * sv.f * target.var / denom


def gaussian_velocity_slope_dt(target: tg.IsotropicGaussian, sv: ScheduleValues) -> float:
    """d/dt of the Gaussian drift slope k_t (quotient rule on the closed form)."""
    v0 = target.var
    g2 = sv.gbar ** 2
    D = sv.f ** 2 * v0 + g2
    Dp = 2.0 * sv.f * sv.f1 * v0 + 2.0 * sv.gbar * sv.gbar1
    return sv.a1 + v0 * ((sv.c1 * sv.f + sv.c * sv.f1) * D - sv.c * sv.f * Dp) / (D * D)


def velocity_batch(target, sv: ScheduleValues, X: np.ndarray) -> np.ndarray:
    """Vectorized v_t over rows of X (shape (n, d)).

    Gaussian targets use the affine closed form; 1D targets use batched
    posterior moments; anything else falls back to a row loop.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    g2 = sv.gbar ** 2
    if isinstance(target, tg.IsotropicGaussian):
        k = gaussian_velocity_slope(target, sv)
        if np.any(target.mean != 0.0):
            sp2 = 1.0 / (1.0 / target.var + sv.f ** 2 / g2) if target.var > 0 else 0.0
            off = sv.c * (sp2 / target.var) * target.mean if target.var > 0 else sv.c * target.mean
            return k * X + off
        return k * X
    if getattr(target, "dim", None) == 1:
        m1 = tg.posterior_moments_1d(target, sv.f, sv.gbar, X[:, 0])[0]
        return (sv.a * X[:, 0] + sv.c * m1)[:, None]
    return np.stack([velocity(target, sv, x) for x in X])


def jacobian_slope_batch(target, sv: ScheduleValues, X: np.ndarray) -> np.ndarray:
    """d v_t/dx over a batch for 1D targets (the full Jacobian in 1D)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if getattr(target, "dim", None) != 1:
        raise UnsupportedMethod("slope batch is a 1D operation")
    g2 = sv.gbar ** 2
    m1, m2, _ = tg.posterior_moments_1d(target, sv.f, sv.gbar, X[:, 0])
    Sigma = m2 - m1 * m1
    return sv.a + sv.c * sv.f * Sigma / g2


# ---------------------------------------------------------------------------
# Jacobian
# ---------------------------------------------------------------------------

def _jac_analytic(target, sv: ScheduleValues, x: np.ndarray) -> np.ndarray:
    if isinstance(target, tg.IsotropicGaussian):
        return gaussian_velocity_slope(target, sv) * np.eye(target.dim)
    if isinstance(target, tg.GaussianMixture1D):
        # Differentiate mu(x) = sum_i r_i(x) mu_i(x) through the
        # responsibilities; algebraically equal to (f/gbar^2) Var[Y|X=x].
        xs = float(np.atleast_1d(x)[0])
        r, mu_i, _, v = tg._mixture_posterior_parts(target, sv.f, sv.gbar, xs)
        ell = -(xs - sv.f * target.means) / v
        ell_bar = float(np.dot(r, ell))
        dmu = float(np.dot(r * (ell - ell_bar), mu_i)) + sv.f * target.comp_var / v
        return np.array([[sv.a + sv.c * dmu]])
    if isinstance(target, tg.Quadrature1D):
        # Differentiated quadrature; coincides with the covariance identity.
        return _jac_covariance(target, sv, x)
    if isinstance(target, tg.SphereUniform):
        _, dmu = tg.sphere_posterior_mean(target, sv.f, sv.gbar, x)
        return sv.a * np.eye(target.dim) + sv.c * dmu
    raise TypeError(f"unsupported target type {type(target).__name__}")


def _jac_covariance(target, sv: ScheduleValues, x: np.ndarray) -> np.ndarray:
    """Reduced-model covariance identity:
    grad v = a Id + (f c / gbar^2) Var[Y | X_t = x]."""
    if isinstance(target, tg.SphereUniform):
        raise UnsupportedMethod(
            "sphere posterior second moments are not exposed; use the analytic route")
    g2 = sv.gbar ** 2
    if isinstance(target, tg.IsotropicGaussian):
        ps = tg.posterior(target, sv, x)
        return (sv.a + sv.c * sv.f * ps.sigma_post / g2) * np.eye(target.dim)
    Sigma, _ = tg.posterior_extras(target, sv, x)
    return np.array([[sv.a + sv.c * sv.f * Sigma / g2]])


def _jac_fd(target, sv: ScheduleValues, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = x.size
    J = np.empty((d, d))
    h = FD_STEP
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        vp2 = velocity(target, sv, x + 2 * h * e)
        vp1 = velocity(target, sv, x + h * e)
        vm1 = velocity(target, sv, x - h * e)
        vm2 = velocity(target, sv, x - 2 * h * e)
        J[:, j] = (-vp2 + 8.0 * vp1 - 8.0 * vm1 + vm2) / (12.0 * h)
    return J


def velocity_jacobian(target, sv: ScheduleValues, x: np.ndarray,
                      method: str = ANALYTIC) -> np.ndarray:
    """grad v_t(x) by one of three routes.

    'analytic' differentiates the closed-form velocity, 'covariance'
    evaluates the posterior-covariance identity, 'fd' is the 5-point
    finite-difference oracle (step 1e-5).
    """
    if not (sv.gbar > 0.0):
        raise OutOfDomain(f"gbar={sv.gbar} must be positive")
    x = np.asarray(x, dtype=float)
    if method == ANALYTIC:
        return _jac_analytic(target, sv, x)
    if method == COVARIANCE:
        return _jac_covariance(target, sv, x)
    if method == FINITE_DIFF:
        return _jac_fd(target, sv, x)
    raise UnsupportedMethod(f"unknown jacobian method {method!r}")


# ---------------------------------------------------------------------------
# Time derivative
# ---------------------------------------------------------------------------

def _require_second_derivatives(sv: ScheduleValues) -> None:
    if not (np.isfinite(sv.f2) and np.isfinite(sv.gbar2)):
        raise SecondDerivativeUnavailable(
            f"schedule second derivatives unavailable at t={sv.t}")


def time_derivative_decomposition(target, sv: ScheduleValues, x: np.ndarray) -> np.ndarray:
    """Three-term identity
    dt v = (dt a) x + (dt c) mu + c dt mu,
    with dt mu = ((f' - 2 a f)/gbar^2) Sigma x - c grad r."""
    _require_second_derivatives(sv)
    x = np.asarray(x, dtype=float)
    g2 = sv.gbar ** 2
    ps = tg.posterior(target, sv, x)
    Sigma, grad_r = tg.posterior_extras(target, sv, x)
    dtmu = ((sv.f1 - 2.0 * sv.a * sv.f) / g2) * Sigma * x - sv.c * grad_r
    return sv.a1 * x + sv.c1 * ps.mu + sv.c * dtmu


def time_derivative_fd(target, schedule: Schedule, t: float, x: np.ndarray) -> np.ndarray:
    """5-point finite difference of t -> v_t(x), step 1e-5.

    Only valid for t in (1e-4, 1 - 1e-4); outside that band the
    decomposition is mandatory.
    """
    if not (TIME_FD_LO < t < TIME_FD_HI):
        raise OutOfDomain(
            f"time finite differences restricted to ({TIME_FD_LO}, {TIME_FD_HI}); "
            f"use the decomposition at t={t}")
    h = FD_STEP
    pts = t + h * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    lo, hi = TIME_FD_LO, TIME_FD_HI
    if pts[0] < lo:
        pts += lo - pts[0]
    elif pts[-1] > hi:
        pts -= pts[-1] - hi
    vals = np.stack([velocity(target, eval_schedule(schedule, p), x) for p in pts])
    V = np.vander(pts - t, 5, increasing=True)
    coef = np.linalg.solve(V, vals)
    return coef[1]


def velocity_time_derivative(target, schedule: Schedule, t: float, x: np.ndarray,
                             method: str = DECOMPOSITION) -> np.ndarray:
    if method == DECOMPOSITION:
        return time_derivative_decomposition(target, eval_schedule(schedule, t), x)
    if method == FINITE_DIFF:
        return time_derivative_fd(target, schedule, t, x)
    raise UnsupportedMethod(f"unknown time-derivative method {method!r}")


# ---------------------------------------------------------------------------
# Reverse SDE drift (diffusion sampler clock)
# ---------------------------------------------------------------------------

def reverse_sde_drift(target, T: float, t: float, x: np.ndarray) -> np.ndarray:
    """Drift x + 2 s_t(x) of the reverse OU SDE run with b = sqrt(2).

    The reversed marginal p_t = q_{T-t} is the mixture with scale
    theta(t) = exp(-(T - t)) and noise sqrt(1 - theta^2).
    """
    theta = float(np.exp(-(T - t)))
    if not (0.0 < theta <= 1.0):
        raise OutOfDomain(f"theta={theta} outside (0, 1] for t={t}, T={T}")
    gbar = float(np.sqrt(max(1.0 - theta * theta, 0.0)))
    if gbar == 0.0:
        raise OutOfDomain("reverse drift undefined at zero noise (t = T)")
    sv = schedule_point(t=t, f=theta, gbar=gbar)
    x = np.asarray(x, dtype=float)
    ps = tg.posterior(target, sv, x)
    return x + 2.0 * ps.score


def gaussian_reverse_slope(target: tg.IsotropicGaussian, T: float, t: float) -> float:
    """Slope of the (linear) reverse drift for a zero-mean Gaussian target."""
    if not isinstance(target, tg.IsotropicGaussian) or np.any(target.mean != 0.0):
        raise UnsupportedMethod("linear reverse slope needs a zero-mean Gaussian")
    theta = float(np.exp(-(T - t)))
    vmarg = theta * theta * target.var + 1.0 - theta * theta
    return 1.0 - 2.0 / vmarg


# ---------------------------------------------------------------------------
# Bundled evaluation
# ---------------------------------------------------------------------------

def evaluate(target, schedule: Schedule, t: float, x: np.ndarray,
             jac_method: str = ANALYTIC,
             dtv_method: Optional[str] = DECOMPOSITION) -> DriftEvaluation:
    """Velocity, Jacobian, time derivative, and lambda_max at (t, x)."""
    sv = eval_schedule(schedule, t)
    x = np.asarray(x, dtype=float)
    v = velocity(target, sv, x)
    J = velocity_jacobian(target, sv, x, method=jac_method)
    if dtv_method is None:
        dtv = np.full_like(v, np.nan)
    elif dtv_method == DECOMPOSITION:
        dtv = time_derivative_decomposition(target, sv, x)
    else:
        dtv = velocity_time_derivative(target, schedule, t, x, method=dtv_method)
    return DriftEvaluation(v=v, jac=J, dtv=dtv, lambda_max=lambda_max_sym(J))
