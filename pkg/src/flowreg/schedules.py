"""Time schedules (f, g, sigma) for the three model families.

A schedule describes the interpolation X_t = f_t Y + g_t X_0 + sigma_t xi.
All drift and posterior computations only see the reduced pair
(f_t, gbar_t) with gbar_t = sqrt(g_t^2 + sigma_t^2), together with the
coefficients a_t = gbar'_t/gbar_t and c_t = f'_t - a_t f_t.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateFit, NonFinite, OutOfDomain

FD_STEP = 1e-5
FD_EDGE = 5e-5  # within this distance of {0,1} the stencil is shifted one-sided

LIPMAN_LINEAR = "lipman-linear"
LIPMAN_CUSTOM = "lipman-custom"
STOCHASTIC_INTERPOLANT = "stochastic-interpolant"
RESCALED_DIFFUSION = "rescaled-diffusion"

FAMILIES = (LIPMAN_LINEAR, LIPMAN_CUSTOM, STOCHASTIC_INTERPOLANT, RESCALED_DIFFUSION)

_FLOW_FAMILIES = (LIPMAN_LINEAR, LIPMAN_CUSTOM, STOCHASTIC_INTERPOLANT)


@dataclass(frozen=True)
class Schedule:
    """Immutable schedule; pure callables, safe to share across threads.

    ``f``, ``g``, ``sigma`` map t in [0,1] to scalars (vectorized over numpy
    arrays).  Analytic derivative callables are optional; missing ones fall
    back to 5-point central finite differences with step ``FD_STEP``.
    """

    family: str
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    sigma: Callable[[np.ndarray], np.ndarray]
    f1: Optional[Callable] = None
    f2: Optional[Callable] = None
    gbar1: Optional[Callable] = None
    gbar2: Optional[Callable] = None
    sigma1: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def gbar(self, t):
        g = self.g(t)
        s = self.sigma(t)
        return np.sqrt(g * g + s * s)


@dataclass(frozen=True)
class ScheduleValues:
    """All schedule quantities at one time t.

    Invariants (by construction): a * gbar == gbar1 and c + a * f == f1.
    """

    t: float
    f: float
    f1: float
    f2: float
    gbar: float
    gbar1: float
    gbar2: float
    a: float
    c: float

    @property
    def a1(self) -> float:
        """d/dt of a_t = gbar'/gbar."""
        return self.gbar2 / self.gbar - self.a * self.a

    @property
    def c1(self) -> float:
        """d/dt of c_t = f' - a f."""
        return self.f2 - self.a1 * self.f - self.a * self.f1


def schedule_point(t: float, f: float, gbar: float,
                   f1: float = np.nan, f2: float = np.nan,
                   gbar1: float = np.nan, gbar2: float = np.nan) -> ScheduleValues:
    """Bare (f, gbar) path point, for callers outside the [0,1] schedule clock.

    Derivative-dependent fields default to NaN; operations that need them
    must check and raise.
    """
    a = gbar1 / gbar if np.isfinite(gbar1) else np.nan
    c = f1 - a * f if np.isfinite(f1) and np.isfinite(a) else np.nan
    return ScheduleValues(t=t, f=f, f1=f1, f2=f2, gbar=gbar,
                          gbar1=gbar1, gbar2=gbar2, a=a, c=c)


# ---------------------------------------------------------------------------
# Built-in families
# ---------------------------------------------------------------------------

def lipman_linear() -> Schedule:
    """f_t = t, sigma_t = 1 - t (so gbar = 1 - t, terminal exponent p = 1)."""
    return Schedule(
        family=LIPMAN_LINEAR,
        f=lambda t: np.asarray(t, dtype=float),
        g=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        sigma=lambda t: 1.0 - np.asarray(t, dtype=float),
        f1=lambda t: np.ones_like(np.asarray(t, dtype=float)),
        f2=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        gbar1=lambda t: -np.ones_like(np.asarray(t, dtype=float)),
        gbar2=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        sigma1=lambda t: -np.ones_like(np.asarray(t, dtype=float)),
        params={"p": 1.0, "t0": 0.5, "gamma": 0.3},
    )


def stochastic_interpolant() -> Schedule:
    """f_t = t, g_t = 1 - t, sigma_t = sqrt(t(1-t)).

    The noise peaks at delta = 1/2 and gbar_t = sqrt(1-t) exactly, so the
    terminal exponent is p = 1/2 with unit slowly-varying factor.
    """
    def sig(t):
        t = np.asarray(t, dtype=float)
        return np.sqrt(np.clip(t * (1.0 - t), 0.0, None))

    def sig1(t):
        t = np.asarray(t, dtype=float)
        s = sig(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(s > 0, (1.0 - 2.0 * t) / (2.0 * s), np.inf)

    return Schedule(
        family=STOCHASTIC_INTERPOLANT,
        f=lambda t: np.asarray(t, dtype=float),
        g=lambda t: 1.0 - np.asarray(t, dtype=float),
        sigma=sig,
        f1=lambda t: np.ones_like(np.asarray(t, dtype=float)),
        f2=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        gbar1=lambda t: -0.5 / np.sqrt(1.0 - np.asarray(t, dtype=float)),
        gbar2=lambda t: -0.25 * (1.0 - np.asarray(t, dtype=float)) ** (-1.5),
        sigma1=sig1,
        params={"p": 0.5, "t0": 0.5, "gamma": 0.49, "delta": 0.5},
    )


def rescaled_diffusion() -> Schedule:
    """f_t = t, sigma_t = sqrt(1 - t^2); the rescaled OU interpolation."""
    def sig(t):
        t = np.asarray(t, dtype=float)
        return np.sqrt(np.clip(1.0 - t * t, 0.0, None))

    def sig1(t):
        t = np.asarray(t, dtype=float)
        s = sig(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(s > 0, -t / s, -np.inf)

    return Schedule(
        family=RESCALED_DIFFUSION,
        f=lambda t: np.asarray(t, dtype=float),
        g=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        sigma=sig,
        f1=lambda t: np.ones_like(np.asarray(t, dtype=float)),
        f2=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        gbar1=sig1,
        gbar2=lambda t: -(1.0 - np.asarray(t, dtype=float) ** 2) ** (-1.5),
        sigma1=sig1,
        params={"p": 0.5, "t0": 0.5, "gamma": 0.2},
    )


def lipman_custom(f: Callable, sigma: Callable, **params) -> Schedule:
    """User-supplied Lipman-type schedule (g == 0); derivatives by FD."""
    return Schedule(
        family=LIPMAN_CUSTOM,
        f=lambda t: np.asarray(f(t), dtype=float),
        g=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        sigma=lambda t: np.asarray(sigma(t), dtype=float),
        params=dict(params),
    )


def by_name(name: str) -> Schedule:
    key = name.strip().lower().replace("_", "-")
    aliases = {
        "lipman": LIPMAN_LINEAR,
        "lipman-linear": LIPMAN_LINEAR,
        "stochastic-interpolant": STOCHASTIC_INTERPOLANT,
        "interpolant": STOCHASTIC_INTERPOLANT,
        "diffusion": RESCALED_DIFFUSION,
        "rescaled-diffusion": RESCALED_DIFFUSION,
    }
    if key not in aliases:
        raise KeyError(f"unknown schedule family {name!r}")
    return {
        LIPMAN_LINEAR: lipman_linear,
        STOCHASTIC_INTERPOLANT: stochastic_interpolant,
        RESCALED_DIFFUSION: rescaled_diffusion,
    }[aliases[key]]()


def is_flow_family(family: str) -> bool:
    return family in _FLOW_FAMILIES


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _fd_points(t: float) -> np.ndarray:
    """5-point stencil abscissae, shifted to stay inside (0, 1)."""
    h = FD_STEP
    lo = min(t - 2 * h, t)
    hi = max(t + 2 * h, t)
    shift = 0.0
    if lo < FD_EDGE:
        shift = FD_EDGE - lo
    elif hi > 1.0 - FD_EDGE:
        shift = (1.0 - FD_EDGE) - hi
    c = t + shift
    return c + h * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])

def _fd_eval(fn: Callable, t: float) -> tuple[float, float]:
    """(first, second) derivative of fn at t via the 5-point stencil.

    The stencil may be off-centered near the boundary; coefficients are
    derived from the local polynomial fit, which stays exact to 4th order.
    """
    pts = _fd_points(t)
    vals = np.asarray(fn(pts), dtype=float)
    # Fit a quartic in (s - t); derivatives read off the coefficients.
    V = np.vander(pts - t, 5, increasing=True)
    coef = np.linalg.solve(V, vals)
    return float(coef[1]), float(2.0 * coef[2])


def eval_schedule(s: Schedule, t: float) -> ScheduleValues:
    """Evaluate f, gbar, their derivatives, and the coefficients a, c at t.

    Raises OutOfDomain if gbar_t == 0 and NonFinite if any derivative is
    non-finite at t.
    """
    t = float(t)
    f = float(s.f(t))
    gbar = float(s.gbar(t))
    if not (gbar > 0.0):
        raise OutOfDomain(f"gbar(t)={gbar} at t={t}; schedule degenerate here")

    if s.f1 is not None and s.f2 is not None:
        f1, f2 = float(s.f1(t)), float(s.f2(t))
    else:
        f1, f2 = _fd_eval(s.f, t)
    if s.gbar1 is not None and s.gbar2 is not None:
        g1, g2 = float(s.gbar1(t)), float(s.gbar2(t))
    else:
        g1, g2 = _fd_eval(s.gbar, t)

    for name, val in (("f'", f1), ("f''", f2), ("gbar'", g1), ("gbar''", g2)):
        if not np.isfinite(val):
            raise NonFinite(f"{name}({t}) is not finite for family {s.family}")

    a = g1 / gbar
    c = f1 - a * f
    return ScheduleValues(t=t, f=f, f1=f1, f2=f2, gbar=gbar, gbar1=g1, gbar2=g2,
                          a=a, c=c)


# ---------------------------------------------------------------------------
# Assumption validation
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    witness_t: Optional[float] = None
    detail: str = ""


@dataclass
class ValidationReport:
    family: str
    checks: list[CheckResult]
    gamma_best: Optional[float] = None
    q_best: Optional[float] = None
    K_required: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


_GRID_N = 1001


def _interior_grid() -> np.ndarray:
    return np.linspace(0.0, 1.0, _GRID_N + 2)[1:-1]


def _check(checks, name, ok_mask, grid, detail=""):
    ok_mask = np.asarray(ok_mask)
    if ok_mask.all():
        checks.append(CheckResult(name, True, detail=detail))
    else:
        w = float(grid[int(np.argmin(ok_mask))])
        checks.append(CheckResult(name, False, witness_t=w, detail=detail))


def validate_assumptions(s: Schedule) -> ValidationReport:
    """Check each bullet of the family's standing assumptions on a 1001-point
    interior grid.  Failures are reported, never raised."""
    tg = _interior_grid()
    f = np.asarray(s.f(tg), dtype=float)
    sig = np.asarray(s.sigma(tg), dtype=float)
    g = np.asarray(s.g(tg), dtype=float)
    gbar = np.sqrt(g * g + sig * sig)
    checks: list[CheckResult] = []

    # Common structure: f increasing from 0 to 1, positive effective noise.
    _check(checks, "f nondecreasing", np.diff(f) >= -1e-12, tg[1:])
    checks.append(CheckResult("f(0)=0", abs(float(s.f(0.0))) <= 1e-12))
    checks.append(CheckResult("f(1)=1", abs(float(s.f(1.0)) - 1.0) <= 1e-12))
    _check(checks, "gbar > 0 on (0,1)", gbar > 0.0, tg)

    gamma_best = None
    q_best = None
    K_req = None

    if s.family in (LIPMAN_LINEAR, LIPMAN_CUSTOM):
        _check(checks, "sigma nonincreasing", np.diff(sig) <= 1e-12, tg[1:])
        checks.append(CheckResult("sigma(0)=1", abs(float(s.sigma(0.0)) - 1.0) <= 1e-12))
        checks.append(CheckResult("sigma(1)=0", abs(float(s.sigma(1.0))) <= 1e-12,
                                  witness_t=None if abs(float(s.sigma(1.0))) <= 1e-12 else 1.0))
        # gamma <= sigma(1/2) ^ f(1/2) and f(1-gamma)^2 >= sigma(1-gamma);
        # scan and keep the largest passing level (the assumption only claims
        # existence).
        half_cap = min(float(s.sigma(0.5)), float(s.f(0.5)))
        for gam in np.arange(0.49, 0.009, -0.01):
            if gam <= half_cap and float(s.f(1 - gam)) ** 2 >= float(s.sigma(1 - gam)):
                gamma_best = round(float(gam), 2)
                break
        checks.append(CheckResult("exists gamma: gamma<=sigma(1/2)^f(1/2), f(1-gamma)^2>=sigma(1-gamma)",
                                  gamma_best is not None,
                                  detail=f"largest passing gamma={gamma_best}"))

    elif s.family == STOCHASTIC_INTERPOLANT:
        checks.append(CheckResult("sigma(0)=0", abs(float(s.sigma(0.0))) <= 1e-12))
        checks.append(CheckResult("sigma(1)=0", abs(float(s.sigma(1.0))) <= 1e-12))
        _check(checks, "g nonincreasing", np.diff(g) <= 1e-12, tg[1:])
        checks.append(CheckResult("g(0)=1", abs(float(s.g(0.0)) - 1.0) <= 1e-12))
        checks.append(CheckResult("g(1)=0", abs(float(s.g(1.0))) <= 1e-12))
        # single sign change of sigma' at delta
        dsig = np.diff(sig)
        flips = np.nonzero(np.sign(dsig[:-1]) * np.sign(dsig[1:]) < 0)[0]
        single_bump = len(flips) == 1
        delta = float(tg[int(np.argmax(sig))])
        checks.append(CheckResult("sigma' changes sign exactly once",
                                  single_bump, witness_t=None if single_bump else float(tg[flips[1] + 1] if len(flips) > 1 else tg[0]),
                                  detail=f"estimated delta={delta:.4f}"))
        # exists q in [0,1] with |g'f - f'g| <= K sigma^q and int sigma^(q-1) <= K;
        # report the smallest passing q and the K it requires.
        fd = np.gradient(f, tg)
        gd = np.gradient(g, tg)
        wron = np.abs(gd * f - fd * g)
        pos = sig > 0
        for q in np.arange(0.0, 1.0001, 0.05):
            with np.errstate(divide="ignore", over="ignore"):
                k1 = float(np.max(wron[pos] / sig[pos] ** q))
                k2 = float(np.trapezoid(sig ** (q - 1.0), tg)) if q > 0 else float(np.trapezoid(np.where(pos, 1.0 / sig, np.inf), tg))
            if np.isfinite(k1) and np.isfinite(k2):
                q_best = round(float(q), 2)
                K_req = max(k1, k2)
                break
        checks.append(CheckResult("exists q in [0,1]: |g'f-f'g|<=K sigma^q, int sigma^(q-1)<=K",
                                  q_best is not None,
                                  detail=f"smallest q={q_best}, K required={K_req if K_req is None else round(K_req, 4)}"))
        # g+f >= gamma everywhere; g >= gamma before the bump
        before = tg < delta
        for gam in np.arange(0.49, 0.009, -0.01):
            if np.all(g + f >= gam) and np.all(g[before] >= gam):
                gamma_best = round(float(gam), 2)
                break
        checks.append(CheckResult("exists gamma: g+f>=gamma and g>=gamma on (0,delta)",
                                  gamma_best is not None,
                                  detail=f"largest passing gamma={gamma_best}"))

    elif s.family == RESCALED_DIFFUSION:
        _check(checks, "f_t = t exactly", np.abs(f - tg) <= 1e-12, tg)
        _check(checks, "sigma_t = sqrt(1-t^2) exactly",
               np.abs(sig - np.sqrt(1 - tg * tg)) <= 1e-12, tg)
        _check(checks, "f^2 + gbar^2 = 1", np.abs(f * f + gbar * gbar - 1.0) <= 1e-12, tg)
        gamma_best = s.params.get("gamma", 0.2)
        half_cap = min(float(s.sigma(0.5)), float(s.f(0.5)))
        ok = gamma_best <= half_cap and float(s.f(1 - gamma_best)) ** 2 >= float(s.sigma(1 - gamma_best))
        checks.append(CheckResult(f"gamma={gamma_best}: f(1-gamma)^2 >= sigma(1-gamma)", bool(ok)))

    return ValidationReport(family=s.family, checks=checks, gamma_best=gamma_best,
                            q_best=q_best, K_required=K_req)


# ---------------------------------------------------------------------------
# Terminal exponent fit
# ---------------------------------------------------------------------------

def terminal_exponent(s: Schedule, fit_window: tuple[float, float]) -> tuple[float, tuple[float, float]]:
    """Least-squares exponent p_hat of gbar_t ~ (1-t)^p over the window.

    Returns (p_hat, (ell_min, ell_max)) where ell = gbar / (1-t)^p_hat.
    """
    t_lo, t_hi = float(fit_window[0]), float(fit_window[1])
    if not (0.0 < t_lo < t_hi < 1.0):
        raise DegenerateFit(f"invalid window ({t_lo}, {t_hi})")
    ts = np.linspace(t_lo, t_hi, 200)
    gb = np.asarray(s.gbar(ts), dtype=float)
    usable = np.isfinite(gb) & (gb > 0)
    if usable.sum() < 10:
        raise DegenerateFit("fewer than 10 usable window points")
    ts, gb = ts[usable], gb[usable]
    x = np.log(1.0 - ts)
    p_hat = float(np.polyfit(x, np.log(gb), 1)[0])
    ell = gb / (1.0 - ts) ** p_hat
    return p_hat, (float(ell.min()), float(ell.max()))
