"""Figure rendering for the CLI report path.

Every experiment writes one PNG next to its CSV.  Figures are diagnostics;
the CSV/JSON files remain the machine-readable contract.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: str) -> None:
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def converge_figure(rows: list[dict], path: str) -> None:
    """log-log W2 vs N per dimension, with an N^{-1} guide line."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    dims = sorted({r["d"] for r in rows})
    for d in dims:
        sub = [r for r in rows if r["d"] == d]
        Ns = np.array([r["N"] for r in sub], dtype=float)
        w2 = np.array([r["w2"] for r in sub])
        ax.loglog(Ns, w2, "o-", ms=4, label=f"d={d}")
    if rows:
        Ns = np.array(sorted({r["N"] for r in rows}), dtype=float)
        ref = rows[0]["w2"] * (Ns[0] / Ns)
        ax.loglog(Ns, ref, "k--", lw=1, label=r"$N^{-1}$ guide")
    ax.set_xlabel("N")
    ax.set_ylabel(r"$W_2$")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


def regularity_figure(rows: list[dict], path: str) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    t = np.array([r["t"] for r in rows])
    for key, style in (("lambda_max", "o-"), ("op_norm", "s-"), ("time_slope", "^-")):
        vals = np.array([r[key] for r in rows])
        ax.plot(t, vals, style, ms=2, lw=1, label=key)
    ax.set_xlabel("t")
    ax.set_yscale("symlog")
    ax.grid(True, alpha=0.3)
    ax.legend()
    _save(fig, path)


def sphere_figure(rows: list[dict], path: str) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    s2 = np.array([r["sigma2"] for r in rows])
    for key in ("lambda_origin", "lambda_tan_r1", "lambda_rad_r1"):
        vals = np.abs(np.array([r[key] for r in rows]))
        ax.loglog(s2, vals, "o-", ms=4, label=f"|{key}|")
    ax.set_xlabel(r"$\sigma_t^2$")
    ax.set_ylabel("eigenvalue magnitude")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


def transport_figure(jac_norms: np.ndarray, certificate: float, path: str) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.hist(jac_norms, bins=24, color="steelblue", alpha=0.8)
    ax.axvline(certificate, color="k", ls="--", label=f"certificate {certificate:.4f}")
    ax.set_xlabel(r"$\|\nabla X_\tau\|_{op}$")
    ax.set_ylabel("count")
    ax.legend()
    _save(fig, path)


def validate_figure(check_names: list[str], passed: list[bool], path: str) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 0.4 * max(4, len(check_names))))
    y = np.arange(len(check_names))
    colors = ["seagreen" if p else "firebrick" for p in passed]
    ax.barh(y, [1] * len(y), color=colors)
    ax.set_yticks(y)
    ax.set_yticklabels(check_names, fontsize=7)
    ax.set_xticks([])
    ax.invert_yaxis()
    _save(fig, path)
