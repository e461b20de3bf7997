"""Shared numeric helpers for the test suite."""

import numpy as np


def rel_err(a, b, floor: float = 1e-12) -> float:
    """Relative discrepancy ||a-b|| / max(||a||, ||b||, floor)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.linalg.norm(a.ravel()), np.linalg.norm(b.ravel()), floor)
    return float(np.linalg.norm((a - b).ravel()) / scale)


def fd_derivative(fn, t: float, h: float = 1e-5):
    """5-point central first derivative."""
    return (-fn(t + 2 * h) + 8 * fn(t + h) - 8 * fn(t - h) + fn(t - 2 * h)) / (12 * h)

