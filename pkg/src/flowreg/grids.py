"""Geometric time grids, Euler-type samplers, and exact Gaussian laws.

The geometric grid with ratio r satisfies h_k = (1 - r)(T - t_k): every step
is proportional to the remaining time, which absorbs drift singularities of
order (T - t)^{-1} and (T - t)^{-2} near the terminal time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import InvalidParameters, NonFinite, NTooSmall
from .schedules import RESCALED_DIFFUSION, ScheduleValues, is_flow_family
from .targets import SecondMoment, second_moment


@dataclass(frozen=True)
class GeometricGrid:
    tau: float
    T: float
    N: int
    r: float
    h_max: float
    nodes: np.ndarray   # t_0 .. t_N
    steps: np.ndarray   # h_0 .. h_{N-1}


@dataclass(frozen=True)
class GaussianLaw:
    """Isotropic Gaussian law: mean vector (or scalar) and scalar variance."""
    mean: float
    var: float

    def __post_init__(self):
        if self.var < 0:
            raise InvalidParameters(f"variance {self.var} must be >= 0")


@dataclass
class StepDiagnostics:
    max_drift_norm: list[float] = field(default_factory=list)
    stability_flags: list[int] = field(default_factory=list)  # offending step indices


def build_geometric_grid(tau: float, T: float, N: int) -> GeometricGrid:
    """Grid nodes t_k = T (1 - r^k) with r = ((T - tau)/T)^{1/N}.

    Nodes are exact products rather than cumulative sums, so t_N = tau holds
    to rounding.
    """
    if not (0.0 < tau < T) or N < 1:
        raise InvalidParameters(f"need 0 < tau < T and N >= 1, got tau={tau}, T={T}, N={N}")
    r = ((T - tau) / T) ** (1.0 / N)
    h_max = T * (1.0 - r)
    k = np.arange(N + 1)
    nodes = T * (1.0 - r ** k)
    steps = h_max * r ** k[:-1]
    return GeometricGrid(tau=tau, T=T, N=N, r=r, h_max=h_max, nodes=nodes, steps=steps)


def select_tau(family: str, N: int, p: float = 1.0) -> tuple[float, float]:
    """Early-stopping time and horizon per the published selection rules.

    Flow families: tau = 1 - (log^2 N / N)^{1/q} with q = min(p, 1), T = 1.
    Diffusion: T = log N, tau = T - 1/N^2.
    """
    if N < 3:
        raise NTooSmall(f"need N >= 3, got {N}")
    if p <= 0:
        raise InvalidParameters(f"need p > 0, got {p}")
    if family == RESCALED_DIFFUSION or family == "diffusion":
        T = float(np.log(N))
        return T - 1.0 / N ** 2, T
    if is_flow_family(family) or family in ("flow", "lipman"):
        q = min(p, 1.0)
        x = np.log(N) ** 2 / N
        return 1.0 - x ** (1.0 / q), 1.0
    raise InvalidParameters(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

def euler_ode(drift: Callable[[float, np.ndarray], np.ndarray], grid: GeometricGrid,
              particles: np.ndarray) -> tuple[np.ndarray, StepDiagnostics]:
    """Explicit Euler X <- X + h_k v_{t_k}(X) over the grid nodes.

    Returns the particles at tau and per-step max drift norms.  Raises
    NonFinite naming the offending step if any state leaves float range.
    """
    X = np.array(particles, dtype=float, copy=True)
    diag = StepDiagnostics()
    for k in range(grid.N):
        V = np.asarray(drift(float(grid.nodes[k]), X), dtype=float)
        X = X + grid.steps[k] * V
        diag.max_drift_norm.append(float(np.max(np.linalg.norm(np.atleast_2d(V), axis=-1))))
        if not np.all(np.isfinite(X)):
            raise NonFinite(f"euler_ode produced non-finite state at step {k} "
                            f"(t={grid.nodes[k]:.6g})")
    return X, diag


def step_noise_variances(b, grid: GeometricGrid, rtol: float = 1e-12) -> np.ndarray:
    """v_k = int_{t_k}^{t_{k+1}} b_t^2 dt; closed form for constant b."""
    if np.isscalar(b):
        return float(b) ** 2 * grid.steps
    vals = np.empty(grid.N)
    for k in range(grid.N):
        vals[k], _ = quad(lambda t: float(b(t)) ** 2, grid.nodes[k], grid.nodes[k + 1],
                          epsrel=rtol, epsabs=0.0)
    return vals


def euler_maruyama_exact(drift: Callable[[float, np.ndarray], np.ndarray], b,
                         grid: GeometricGrid, particles: np.ndarray, seed: int,
                         slope_fn: Optional[Callable[[float], float]] = None
                         ) -> tuple[np.ndarray, StepDiagnostics]:
    """Euler-Maruyama with exact Gaussian increments.

    The step-k increment is N(0, v_k Id) with v_k = int b_t^2 dt over the
    step, so only boundedness of b is needed.  Noise for step k comes from
    the substream SeedSequence((seed, k)); results are therefore independent
    of how callers parallelize across experiment cells.  When `slope_fn`
    gives the per-time drift slope of a linear drift, steps violating
    |1 + h_k k| <= 1 + 10 h_max are flagged (logged, never fatal).
    """
    X = np.array(particles, dtype=float, copy=True)
    v = step_noise_variances(b, grid)
    diag = StepDiagnostics()
    for k in range(grid.N):
        t_k = float(grid.nodes[k])
        V = np.asarray(drift(t_k, X), dtype=float)
        rng = np.random.default_rng(np.random.SeedSequence((seed, k)))
        xi = np.sqrt(v[k]) * rng.standard_normal(X.shape)
        X = X + grid.steps[k] * V + xi
        diag.max_drift_norm.append(float(np.max(np.linalg.norm(np.atleast_2d(V), axis=-1))))
        if slope_fn is not None:
            amp = abs(1.0 + grid.steps[k] * float(slope_fn(t_k)))
            if amp > 1.0 + 10.0 * grid.h_max:
                diag.stability_flags.append(k)
        if not np.all(np.isfinite(X)):
            raise NonFinite(f"euler_maruyama produced non-finite state at step {k} "
                            f"(t={t_k:.6g})")
    return X, diag


def propagate_affine_law(slopes: Sequence[float], grid: GeometricGrid, init: GaussianLaw,
                         noise_var: Optional[Sequence[float]] = None) -> GaussianLaw:
    """Exact law of the Euler iterates for a linear drift v_t(x) = k_t x.

    mean <- (1 + h_k k_k) mean;  var <- (1 + h_k k_k)^2 var + v_k.
    The caller is responsible for the drift actually being linear.
    """
    slopes = np.asarray(slopes, dtype=float)
    if slopes.shape != (grid.N,):
        raise InvalidParameters(f"need one slope per step ({grid.N}), got {slopes.shape}")
    nv = np.zeros(grid.N) if noise_var is None else np.asarray(noise_var, dtype=float)
    mean, var = init.mean, init.var
    for k in range(grid.N):
        amp = 1.0 + grid.steps[k] * slopes[k]
        mean = amp * mean
        var = amp * amp * var + nv[k]
    return GaussianLaw(mean=mean, var=var)


# ---------------------------------------------------------------------------
# Early stopping
# ---------------------------------------------------------------------------

def early_stopping_bound(target, sv_tau: ScheduleValues, d: int) -> float:
    """Coupling bound sqrt((1 - f_tau)^2 E||Y||^2 + d gbar_tau^2).

    E||Y||^2 is rescaled to dimension d through the target's per-dimension
    second moment, so 1D-parameterized targets extend isotropically.
    """
    from .targets import SphereUniform

    sm: SecondMoment = second_moment(target)
    # The sphere has E||Y||^2 = 1 in every dimension; other targets extend
    # isotropically through their per-dimension moment.
    e_y2 = 1.0 if isinstance(target, SphereUniform) else sm.per_dim * d
    return float(np.sqrt((1.0 - sv_tau.f) ** 2 * e_y2 + d * sv_tau.gbar ** 2))
