"""Regularity profiles: one-sided, two-sided, and time-Lipschitz envelopes.

Suprema are taken over finite probe sets, never by global optimization: the
in-scope targets have linear drifts (probe-independent), 1D structure (dense
axis grids), or closed-form radial structure.  Probe-doubling stability is
the verification contract; a finite-probe sup is a lower bound on the true
one, which the docs state explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import driftfield as df
from . import targets as tg
from .errors import DegenerateFit, InvalidParameters
from .grids import build_geometric_grid
from .schedules import Schedule, eval_schedule


@dataclass(frozen=True)
class LatticeBox:
    radius: float
    count: int  # points per axis


@dataclass(frozen=True)
class TargetSamples:
    n: int
    seed: int


@dataclass(frozen=True)
class Axis1D:
    count: int
    radius: float = 8.0


ProbeSpec = LatticeBox | TargetSamples | Axis1D


@dataclass(frozen=True)
class RegularityProfile:
    times: np.ndarray
    lambda_max: np.ndarray   # per-time sup over probes of lambda_max(sym grad v)
    op_norm: np.ndarray      # per-time sup of ||grad v||_op
    time_slope: np.ndarray   # per-time sup of ||dt v|| / (sqrt(d) + ||x||)
    probes: str


@dataclass(frozen=True)
class IntegralReport:
    signed: float
    positive: float


def default_profile_times(tau: float, n: int = 512) -> np.ndarray:
    """Geometrically refined times on [0, tau]; resolves terminal blow-up."""
    return build_geometric_grid(tau, 1.0, n).nodes


def generate_probes(spec: ProbeSpec, dim: int, target=None) -> np.ndarray:
    if isinstance(spec, Axis1D):
        if dim != 1:
            raise InvalidParameters("Axis1D probes need a 1D target")
        return np.linspace(-spec.radius, spec.radius, spec.count)[:, None]
    if isinstance(spec, TargetSamples):
        if target is None:
            raise InvalidParameters("TargetSamples probes need the target")
        return tg.sample(target, spec.n, spec.seed)
    if isinstance(spec, LatticeBox):
        if spec.count ** dim > 100_000:
            raise InvalidParameters(
                f"lattice of {spec.count}^{dim} points too large; use TargetSamples")
        axis = np.linspace(-spec.radius, spec.radius, spec.count)
        grids = np.meshgrid(*([axis] * dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)
    raise TypeError(f"unsupported probe spec {type(spec).__name__}")


def _default_spec(target) -> ProbeSpec:
    if getattr(target, "dim", 1) == 1:
        return Axis1D(count=201)
    return TargetSamples(n=64, seed=0)


def profile(target, schedule: Schedule, time_grid: Sequence[float],
            probe_spec: Optional[ProbeSpec] = None) -> RegularityProfile:
    """Evaluate grad v and dt v at every (t, probe) and record the suprema.

    For 1D quadrature targets the default probe set is a dense axis grid,
    and posterior moments are evaluated in one vectorized batch per time.
    """
    if probe_spec is None:
        probe_spec = _default_spec(target)
    dim = getattr(target, "dim", 1)
    probes = generate_probes(probe_spec, dim, target)
    times = np.asarray(time_grid, dtype=float)
    sqrt_d = np.sqrt(dim)

    lam = np.empty(times.size)
    opn = np.empty(times.size)
    tsl = np.empty(times.size)

    if isinstance(target, tg.IsotropicGaussian) and not np.any(target.mean != 0.0):
        # Linear drift: the sup over probes of lambda_max is the slope k_t
        # itself; the time slope is |k'_t| sup ||x||/(sqrt(d) + ||x||).
        norms = np.linalg.norm(probes, axis=1)
        geom = float(np.max(norms / (sqrt_d + norms)))
        for i, t in enumerate(times):
            sv = eval_schedule(schedule, float(t))
            k = df.gaussian_velocity_slope(target, sv)
            lam[i] = k
            opn[i] = abs(k)
            tsl[i] = abs(df.gaussian_velocity_slope_dt(target, sv)) * geom
        return RegularityProfile(times=times, lambda_max=lam, op_norm=opn,
                                 time_slope=tsl, probes=repr(probe_spec))

    if dim == 1 and isinstance(target, (tg.GaussianMixture1D, tg.Quadrature1D)):
        xs = probes.ravel()
        for i, t in enumerate(times):
            sv = eval_schedule(schedule, float(t))
            g2 = sv.gbar ** 2
            m1, m2, m3 = tg.posterior_moments_1d(target, sv.f, sv.gbar, xs)
            Sigma = m2 - m1 * m1
            slope = sv.a + sv.c * sv.f * Sigma / g2
            lam[i] = float(slope.max())
            opn[i] = float(np.abs(slope).max())
            grad_r = (sv.f / g2) * (m3 - m1 * m2)
            dtmu = ((sv.f1 - 2.0 * sv.a * sv.f) / g2) * Sigma * xs - sv.c * grad_r
            dtv = sv.a1 * xs + sv.c1 * m1 + sv.c * dtmu
            tsl[i] = float(np.max(np.abs(dtv) / (sqrt_d + np.abs(xs))))
        return RegularityProfile(times=times, lambda_max=lam, op_norm=opn,
                                 time_slope=tsl, probes=repr(probe_spec))

    has_dtv = not isinstance(target, tg.SphereUniform)
    for i, t in enumerate(times):
        sv = eval_schedule(schedule, float(t))
        lam_i = -np.inf
        opn_i = 0.0
        tsl_i = 0.0 if has_dtv else np.nan
        for x in probes:
            J = df.velocity_jacobian(target, sv, x, method=df.ANALYTIC)
            lam_i = max(lam_i, df.lambda_max_sym(J))
            opn_i = max(opn_i, df.operator_norm(J))
            if has_dtv:
                dtv = df.time_derivative_decomposition(target, sv, x)
                tsl_i = max(tsl_i, float(np.linalg.norm(dtv) / (sqrt_d + np.linalg.norm(x))))
        lam[i], opn[i], tsl[i] = lam_i, opn_i, tsl_i
    return RegularityProfile(times=times, lambda_max=lam, op_norm=opn,
                             time_slope=tsl, probes=repr(probe_spec))


def integral_lambda_max(prof: RegularityProfile, z: float = 0.0) -> IntegralReport:
    """Trapezoidal integral of the lambda_max envelope from z to the profile
    end; both the signed integral and the positive-part integral."""
    t = prof.times
    if not (t[0] - 1e-12 <= z <= t[-1] + 1e-12):
        raise InvalidParameters(f"z={z} outside profile range [{t[0]}, {t[-1]}]")
    if z >= t[-1]:
        return IntegralReport(0.0, 0.0)
    lam_z = float(np.interp(z, t, prof.lambda_max))
    mask = t > z
    ts = np.concatenate(([z], t[mask]))
    ls = np.concatenate(([lam_z], prof.lambda_max[mask]))
    signed = float(np.trapezoid(ls, ts))
    positive = float(np.trapezoid(np.clip(ls, 0.0, None), ts))
    return IntegralReport(signed=signed, positive=positive)


def exponent_fit(times: np.ndarray, values: np.ndarray,
                 window: tuple[float, float]) -> tuple[float, float, float]:
    """Least squares of log(value) against log(1/(1-t)) over the window.

    Returns (slope, intercept, r2).  Points with non-positive values are
    unusable for the log fit and are dropped; fewer than two usable points
    raise DegenerateFit.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    m = (times >= lo) & (times <= hi) & (values > 0) & (times < 1.0)
    if m.sum() < 2:
        raise DegenerateFit("fewer than two positive points in the fit window")
    x = np.log(1.0 / (1.0 - times[m]))
    y = np.log(values[m])
    if np.ptp(x) == 0.0:
        raise DegenerateFit("degenerate abscissae in the fit window")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)
