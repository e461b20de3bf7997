"""Sphere toy model: Bessel-ratio posterior direction and drift eigenvalues.

For the uniform measure on the unit sphere under the rescaled-diffusion path
X_t = t Y + sigma_t xi with sigma_t^2 = 1 - t^2, the posterior mean of Y is
A_d(kappa) x/||x|| with concentration kappa = t ||x|| / sigma_t^2 and

    A_d(kappa) = I_{d/2}(kappa) / I_{d/2 - 1}(kappa),

the mean resultant length of a von Mises-Fisher law.  The drift Jacobian has
one tangential and one radial eigenvalue, both explicit in A_d and A_d'.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lgamma

import numpy as np

from .errors import InvalidDimension, OutOfDomain, Overflow

KAPPA_MAX = 1e8
_LENTZ_TOL = 1e-14
_LENTZ_TINY = 1e-30
_LENTZ_MAX_ITER = 40_000


@dataclass(frozen=True)
class SphereDriftPoint:
    d: int
    t: float
    r: float
    kappa: float
    A: float
    Aprime: float
    lambda_tan: float
    lambda_rad: float


def _validate(d: int, kappa: float) -> None:
    if d < 2:
        raise InvalidDimension(f"need d >= 2, got {d}")
    if kappa < 0:
        raise ValueError(f"need kappa >= 0, got {kappa}")
    if kappa > KAPPA_MAX:
        raise Overflow(f"kappa={kappa} exceeds the {KAPPA_MAX:.0e} evaluation guard")


def bessel_ratio(d: int, kappa: float) -> float:
    """A_d(kappa) by the Perron/Gauss continued fraction.

    Uses the recurrence rho_nu = 1 / (2 nu / x + rho_{nu+1}) with nu = d/2,
    evaluated by modified Lentz; terminates once the running correction
    factor is within 1e-14 of 1.
    """
    _validate(d, kappa)
    kappa = float(kappa)
    if kappa == 0.0:
        return 0.0
    nu = d / 2.0

    # Continued fraction  A = a_1/(b_1 + a_2/(b_2 + ...)),  a_j = 1,
    # b_j = 2 (nu + j - 1) / kappa.
    f = _LENTZ_TINY
    c = f
    dd = 0.0
    for j in range(1, _LENTZ_MAX_ITER):
        b = 2.0 * (nu + j - 1.0) / kappa
        dd = b + dd
        if dd == 0.0:
            dd = _LENTZ_TINY
        c = b + 1.0 / c
        if c == 0.0:
            c = _LENTZ_TINY
        dd = 1.0 / dd
        delta = c * dd
        f *= delta
        if abs(delta - 1.0) < _LENTZ_TOL:
            return f
    raise Overflow(f"continued fraction failed to converge for d={d}, kappa={kappa}")


def bessel_ratio_derivative(d: int, kappa: float) -> float:
    """A_d'(kappa) via the ratio identity A' = 1 - A^2 - (d-1) A / kappa."""
    _validate(d, kappa)
    if kappa == 0.0:
        return 1.0 / d
    A = bessel_ratio(d, kappa)
    return 1.0 - A * A - (d - 1.0) * A / kappa


def bessel_ratio_series(d: int, kappa: float, terms: int = 64) -> float:
    """Independent series oracle: truncated power series of I_nu.

    With S_nu = sum_k (kappa^2/4)^k / (k! (nu+1)_k) one has
    A_d = (kappa / d) * S_{d/2} / S_{d/2 - 1}.  A fixed 64-term truncation is
    accurate to ~1e-15 for kappa <= 10 but only to ~1e-3 at kappa = 100; pass
    a larger `terms` there.
    """
    _validate(d, kappa)
    if kappa == 0.0:
        return 0.0
    nu = d / 2.0
    q = np.log(kappa * kappa / 4.0)

    def S(v: float) -> float:
        ks = np.arange(terms, dtype=float)
        logs = ks * q - np.array([lgamma(k + 1.0) + lgamma(v + k + 1.0) - lgamma(v + 1.0)
                                  for k in ks])
        m = logs.max()
        return float(np.exp(m) * np.sum(np.exp(logs - m)))

    return (kappa / d) * S(nu) / S(nu - 1.0)


def sphere_point(d: int, t: float, r: float) -> SphereDriftPoint:
    """Everything the sphere drift needs at radius r and time t."""
    lam_tan, lam_rad = sphere_eigenvalues(d, t, r)
    s2 = 1.0 - t * t
    kappa = t * r / s2
    return SphereDriftPoint(d=d, t=t, r=r, kappa=kappa,
                            A=bessel_ratio(d, kappa),
                            Aprime=bessel_ratio_derivative(d, kappa),
                            lambda_tan=lam_tan, lambda_rad=lam_rad)


def sphere_eigenvalues(d: int, t: float, r: float) -> tuple[float, float]:
    """(lambda_tan, lambda_rad) of the drift Jacobian at radius r, time t.

    lambda_tan = (1/sigma^2)(A_d(t r/sigma^2)/r - t)
    lambda_rad = (1/sigma^2)((t/sigma^2) A_d'(t r/sigma^2) - t)
    with sigma^2 = 1 - t^2.
    """
    if not (0.0 < t < 1.0):
        raise OutOfDomain(f"need t in (0,1), got {t}")
    if r <= 0.0:
        raise OutOfDomain("r must be > 0; use sphere_origin_jacobian at r = 0")
    s2 = 1.0 - t * t
    kappa = t * r / s2
    A = bessel_ratio(d, kappa)
    Ap = bessel_ratio_derivative(d, kappa)
    lam_tan = (A / r - t) / s2
    lam_rad = ((t / s2) * Ap - t) / s2
    return lam_tan, lam_rad


def sphere_origin_jacobian(d: int, t: float) -> float:
    """Coefficient c in grad v_t(0) = c * Id:  c = t/(d sigma^4) - t/sigma^2."""
    if d < 2:
        raise InvalidDimension(f"need d >= 2, got {d}")
    s2 = 1.0 - t * t
    return t / (d * s2 * s2) - t / s2
