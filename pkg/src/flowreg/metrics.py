"""Exact Wasserstein-2 distances: Bures, 1D order statistics, assignment.

Every W2 number used in acceptance checks is exact (no entropic or sliced
approximations), so estimator bias never mixes with discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import LengthMismatch, TooLarge

ASSIGNMENT_CAP = 4096  # exact OT cost grows cubically; keeps suites fast

BURES_EXACT = "BuresExact"
QUANTILE_1D = "Quantile1D"
ASSIGNMENT_EXACT = "AssignmentExact"


@dataclass(frozen=True)
class W2Report:
    value: float
    method: str
    n: int


def w2_gaussian_isotropic(m1, s1: float, m2, s2: float, d: int) -> float:
    """W2 between N(m1, s1^2 Id) and N(m2, s2^2 Id) in dimension d.

    Means may be vectors of length d or scalars (taken as the common
    per-coordinate mean).
    """
    if s1 < 0 or s2 < 0:
        raise ValueError("standard deviations must be >= 0")
    m1 = np.atleast_1d(np.asarray(m1, dtype=float))
    m2 = np.atleast_1d(np.asarray(m2, dtype=float))
    if m1.size == 1 and m2.size == 1:
        mean_sq = d * float(m1[0] - m2[0]) ** 2
    else:
        if m1.size == 1:
            m1 = np.full(d, m1[0])
        if m2.size == 1:
            m2 = np.full(d, m2[0])
        if m1.shape != (d,) or m2.shape != (d,):
            raise ValueError(f"means must have length {d}")
        mean_sq = float(np.sum((m1 - m2) ** 2))
    return float(np.sqrt(mean_sq + d * (s1 - s2) ** 2))


def w2_empirical_1d(xs: np.ndarray, ys: np.ndarray) -> float:
    """Exact W2 between two equal-size 1D empirical measures.

    The sorted pairing is the optimal coupling in one dimension.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size != ys.size or xs.size < 1:
        raise LengthMismatch(f"need equal sample counts >= 1, got {xs.size} and {ys.size}")
    dx = np.sort(xs) - np.sort(ys)
    return float(np.sqrt(np.mean(dx * dx)))


def w2_empirical_assignment(xs: np.ndarray, ys: np.ndarray) -> float:
    """Exact W2 between two equal-size point clouds via optimal assignment."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim == 1:  # 1D input means n scalar points, matching w2_empirical_1d
        xs = xs[:, None]
    if ys.ndim == 1:
        ys = ys[:, None]
    if xs.shape != ys.shape:
        raise LengthMismatch(f"shape mismatch {xs.shape} vs {ys.shape}")
    n = xs.shape[0]
    if n < 1:
        raise LengthMismatch("need at least one point")
    if n > ASSIGNMENT_CAP:
        raise TooLarge(f"n={n} exceeds the exact-assignment cap {ASSIGNMENT_CAP}")
    cost = np.sum((xs[:, None, :] - ys[None, :, :]) ** 2, axis=-1)
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


def w2_report(value: float, method: str, n: int = 0) -> W2Report:
    if value < 0:
        raise ValueError("W2 value must be >= 0")
    return W2Report(value=value, method=method, n=n)
