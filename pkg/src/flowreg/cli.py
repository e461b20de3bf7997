"""Reproducible experiment runner.

One canonical JSON config drives each experiment; CLI flags override config
keys and the FLOWREG_SEED environment variable overrides the config seed.
Each run writes `<out>/<experiment>.csv`, `<out>/<experiment>.summary.json`,
and `<out>/<experiment>.png`.  With a fixed seed the CSV/JSON bytes are
identical across runs and thread counts.

Exit codes: 0 all enabled criteria pass, 2 invalid config, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional

import numpy as np

from . import driftfield as df
from . import figures
from . import grids
from . import regularity as rg
from . import schedules as sc
from . import targets as tg
from . import transport as tp
from .errors import ConfigInvalid, FlowregError, NumericalFailure
from .metrics import w2_gaussian_isotropic

EXPERIMENTS = ("validate", "regularity", "converge", "transport", "sphere")

DEFAULTS: dict = {
    "experiment": None,
    "family": "lipman-linear",
    "target": "gaussian:s=1",
    "dims": [1],
    "steps_list": [64, 128, 256, 512],
    "mode": "ode",
    "tau_rule": "auto",
    "tau": None,
    "steps": 4096,
    "points": 100,
    "probes": None,
    "t_refine": 512,
    "t_grid": "dyadic:3..12",
    "seed": 0,
    "threads": 0,
    "output": "out",
    "inject_failure": False,  # test hook: force the exit-code-3 path
}


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------

def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10,
                             cwd=os.path.dirname(os.path.abspath(__file__)))
        if out.returncode == 0:
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return "unknown"


def load_config(path: Optional[str], overrides: dict) -> dict:
    cfg = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigInvalid("config root must be a JSON object")
        unknown = set(user) - set(DEFAULTS)
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        cfg.update(user)
    env_seed = os.environ.get("FLOWREG_SEED")
    if env_seed is not None:
        try:
            cfg["seed"] = int(env_seed)
        except ValueError as exc:
            raise ConfigInvalid(f"FLOWREG_SEED={env_seed!r} is not an integer") from exc
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if cfg["experiment"] not in EXPERIMENTS:
        raise ConfigInvalid(f"experiment must be one of {EXPERIMENTS}, got {cfg['experiment']!r}")
    try:
        sc.by_name(cfg["family"])
    except KeyError as exc:
        raise ConfigInvalid(str(exc)) from exc
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigInvalid(f"seed must be a nonnegative integer, got {cfg['seed']!r}")
    if not isinstance(cfg["dims"], (list, tuple)) or not all(
            isinstance(d, int) and d >= 1 for d in cfg["dims"]):
        raise ConfigInvalid(f"dims must be a list of positive integers, got {cfg['dims']!r}")
    if cfg["experiment"] == "converge":
        if cfg["mode"] not in ("ode", "sde"):
            raise ConfigInvalid(f"mode must be ode or sde, got {cfg['mode']!r}")
        if not all(isinstance(n, int) and n >= 3 for n in cfg["steps_list"]):
            raise ConfigInvalid("steps_list entries must be integers >= 3")
    if not isinstance(cfg["threads"], int) or cfg["threads"] < 0:
        raise ConfigInvalid("threads must be an integer >= 0 (0 = auto)")


def parse_target(spec: str, dim: int = 1):
    """Target grammar: name[:k=v,...].

    gaussian:s=2[,mean=0]        isotropic Gaussian, std s
    mixture:m=1[,var=0.25]       symmetric two-component mixture at +-m
    quadrature:pert=abs_sqrt[,K=1][,omega=1]   u = y^2/2 plus a registry
                                 perturbation (zero | abs_sqrt | cos)
    sphere                       uniform on the unit sphere (needs dim >= 2)
    """
    name, _, rest = spec.partition(":")
    kv = {}
    if rest:
        for item in rest.split(","):
            k, _, v = item.partition("=")
            if not _:
                raise ConfigInvalid(f"malformed target parameter {item!r} in {spec!r}")
            kv[k.strip()] = v.strip()
    try:
        if name == "gaussian":
            s = float(kv.pop("s", 1.0))
            mean = float(kv.pop("mean", 0.0))
            _reject_extras(spec, kv)
            return tg.IsotropicGaussian.create(mean=mean, var=s * s, dim=dim)
        if name == "mixture":
            m = float(kv.pop("m", 1.0))
            var = float(kv.pop("var", 0.25))
            _reject_extras(spec, kv)
            return tg.GaussianMixture1D.create([0.5, 0.5], [-m, m], var)
        if name == "quadrature":
            pert = kv.pop("pert", "abs_sqrt")
            K = float(kv.pop("K", 1.0))
            omega = float(kv.pop("omega", 1.0))
            _reject_extras(spec, kv)
            beta = 0.5 if pert == "abs_sqrt" else 1.0
            kinks = (0.0,) if pert == "abs_sqrt" else ()
            return tg.Quadrature1D(u=lambda y: 0.5 * np.asarray(y, dtype=float) ** 2,
                                   alpha=1.0,
                                   a=tg.perturbation_registry(pert, K=K, omega=omega),
                                   K=K, beta=beta, singular_points=kinks)
        if name == "sphere":
            _reject_extras(spec, kv)
            return tg.SphereUniform(dim=max(dim, 2))
    except (ValueError, KeyError) as exc:
        raise ConfigInvalid(f"bad target spec {spec!r}: {exc}") from exc
    raise ConfigInvalid(f"unknown target {name!r} in {spec!r}")


def _reject_extras(spec: str, kv: dict) -> None:
    if kv:
        raise ConfigInvalid(f"unknown target parameters {sorted(kv)} in {spec!r}")


def parse_probes(spec, target, dim: int):
    if spec is None:
        return None
    if isinstance(spec, int):
        return rg.TargetSamples(n=spec, seed=0)
    kind, _, arg = str(spec).partition(":")
    if kind == "axis":
        return rg.Axis1D(count=int(arg or 201))
    if kind == "samples":
        return rg.TargetSamples(n=int(arg or 64), seed=0)
    if kind == "lattice":
        radius, _, count = arg.partition("x")
        return rg.LatticeBox(radius=float(radius or 4.0), count=int(count or 9))
    raise ConfigInvalid(f"unknown probe spec {spec!r}")


def _pmap(fn: Callable, items: Iterable, threads: int) -> list:
    items = list(items)
    if threads == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    workers = threads if threads > 0 else min(32, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Output writing (byte-deterministic for fixed seed)
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest round-trip decimal
    return str(v)


def write_csv(path: str, fieldnames: list[str], rows: list[dict]) -> None:
    lines = [",".join(fieldnames)]
    for row in rows:
        lines.append(",".join(_fmt(row[k]) for k in fieldnames))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_summary(path: str, summary: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _run_validate(cfg: dict):
    schedule = sc.by_name(cfg["family"])
    report = sc.validate_assumptions(schedule)
    rows = [{
        "condition": c.name,
        "passed": c.passed,
        "witness_t": c.witness_t if c.witness_t is not None else "",
        "detail": c.detail.replace(",", ";"),
    } for c in report.checks]
    criteria = {c.name: c.passed for c in report.checks}
    extra = {"gamma_best": report.gamma_best, "q_best": report.q_best,
             "K_required": report.K_required}
    fig = lambda path: figures.validate_figure(
        [c.name for c in report.checks], [c.passed for c in report.checks], path)
    return rows, ["condition", "passed", "witness_t", "detail"], criteria, extra, fig


def _run_regularity(cfg: dict):
    schedule = sc.by_name(cfg["family"])
    dims = cfg["dims"]
    tau = cfg["tau"] if cfg["tau"] is not None else 0.999
    times = rg.default_profile_times(tau, int(cfg["t_refine"]))

    def one_dim(d):
        target = parse_target(cfg["target"], dim=d)
        spec = parse_probes(cfg["probes"], target, d)
        prof = rg.profile(target, schedule, times, spec)
        rep = rg.integral_lambda_max(prof, 0.0)
        return prof, rep

    results = _pmap(one_dim, dims, cfg["threads"])
    prof0 = results[0][0]
    rows = [{
        "t": float(t), "lambda_max": float(l), "op_norm": float(o), "time_slope": float(s),
    } for t, l, o, s in zip(prof0.times, prof0.lambda_max, prof0.op_norm, prof0.time_slope)]
    integrals = {str(d): {"signed": rep.signed, "positive": rep.positive}
                 for d, (_, rep) in zip(dims, results)}
    signed = [rep.signed for _, rep in results]
    extra = {"integrals": integrals,
             "max_integral_spread": float(np.max(signed) - np.min(signed))}
    criteria = {"profiles_finite": bool(np.all(np.isfinite(prof0.lambda_max)))}
    fig = lambda path: figures.regularity_figure(rows, path)
    return rows, ["t", "lambda_max", "op_norm", "time_slope"], criteria, extra, fig


def _converge_cell(cfg: dict, schedule, target_std: float, d: int, N: int):
    mode = cfg["mode"]
    if cfg["tau_rule"] in ("auto", "paper"):
        if mode == "sde":
            tau, T = grids.select_tau(sc.RESCALED_DIFFUSION, N)
        else:
            tau, T = grids.select_tau(sc.LIPMAN_LINEAR, N, p=schedule.params.get("p", 1.0))
    else:
        tau = float(cfg["tau_rule"])
        T = float(np.log(N)) if mode == "sde" else 1.0
    grid = grids.build_geometric_grid(tau, T, N)
    target = tg.IsotropicGaussian.create(0.0, target_std ** 2, 1)
    if mode == "sde":
        slopes = np.array([df.gaussian_reverse_slope(target, T, float(t)) for t in grid.nodes[:-1]])
        noise = 2.0 * grid.steps
    else:
        slopes = np.array([df.gaussian_velocity_slope(target, sc.eval_schedule(schedule, float(t)))
                           for t in grid.nodes[:-1]])
        noise = None
    law = grids.propagate_affine_law(slopes, grid, grids.GaussianLaw(0.0, 1.0), noise)
    w2 = w2_gaussian_isotropic(0.0, target_std, 0.0, float(np.sqrt(law.var)), d)
    p_log = 3 if mode == "sde" else 2
    ratio = w2 * N / (np.sqrt(d) * np.log(N) ** p_log)
    return {"d": d, "N": N, "tau": tau, "h_max": grid.h_max, "w2": w2,
            "bound_ratio": float(ratio)}


def _run_converge(cfg: dict):
    schedule = sc.by_name(cfg["family"])
    target = parse_target(cfg["target"], dim=1)
    if not isinstance(target, tg.IsotropicGaussian) or np.any(target.mean != 0.0):
        raise ConfigInvalid("converge uses the exact-law pipeline: target must be a "
                            "zero-mean gaussian, e.g. gaussian:s=2")
    if cfg["mode"] == "sde" and schedule.family != sc.RESCALED_DIFFUSION:
        raise ConfigInvalid("sde mode needs --family rescaled-diffusion")
    s = float(np.sqrt(target.var))
    cells = [(d, N) for d in cfg["dims"] for N in cfg["steps_list"]]
    rows = _pmap(lambda cell: _converge_cell(cfg, schedule, s, *cell), cells, cfg["threads"])
    criteria = {"all_finite": bool(all(np.isfinite(r["w2"]) for r in rows))}
    extra = {"mode": cfg["mode"], "normalizer_log_power": 3 if cfg["mode"] == "sde" else 2}
    fig = lambda path: figures.converge_figure(rows, path)
    return rows, ["d", "N", "tau", "h_max", "w2", "bound_ratio"], criteria, extra, fig


def _run_transport(cfg: dict):
    schedule = sc.by_name(cfg["family"])
    tau = cfg["tau"] if cfg["tau"] is not None else 1.0 - 1e-4
    N = int(cfg["steps"])
    d = cfg["dims"][0]
    target = parse_target(cfg["target"], dim=d)
    grid = grids.build_geometric_grid(tau, 1.0, N)
    prof = rg.profile(target, schedule, rg.default_profile_times(tau, min(2048, N)))
    cert = tp.lipschitz_certificate(prof, 0.0)

    rng = np.random.default_rng(cfg["seed"])
    x0s = rng.standard_normal((int(cfg["points"]), d))
    _, norms = tp.flow_batch(target, schedule, grid, x0s)
    jac_ok = bool(np.max(norms) <= cert * (1.0 + 10.0 * grid.h_max))

    audit = None
    try:
        audit = tp.poincare_audit(target, cert)
    except FlowregError:
        pass  # target not quadrature-auditable (e.g. sphere); jac check still applies
    sv_tau = sc.eval_schedule(schedule, tau)
    residual = grids.early_stopping_bound(target, sv_tau, d)

    rows = [{"x0_index": i, "jac_norm": float(v)} for i, v in enumerate(norms)]
    criteria = {"jacobian_dominated": jac_ok}
    if audit is not None:
        criteria["poincare_pass"] = audit.passed
    extra = {
        "certificate": cert,
        "max_jac_norm": float(np.max(norms)),
        "poincare_ratios": None if audit is None else audit.ratios,
        "early_stopping_residual": residual,
        "pass": bool(all(criteria.values())),
    }
    fig = lambda path: figures.transport_figure(norms, cert, path)
    return rows, ["x0_index", "jac_norm"], criteria, extra, fig


def _parse_t_grid(spec: str) -> np.ndarray:
    if spec.startswith("dyadic:"):
        lo, _, hi = spec[len("dyadic:"):].partition("..")
        js = np.arange(int(lo), int(hi) + 1)
        return 1.0 - 2.0 ** (-js.astype(float))
    try:
        return np.array([float(x) for x in spec.split(",")], dtype=float)
    except ValueError as exc:
        raise ConfigInvalid(f"bad t_grid {spec!r}") from exc


def _run_sphere(cfg: dict):
    from . import bessel_sphere as bs

    d = max(cfg["dims"][0], 2)
    ts = _parse_t_grid(cfg["t_grid"])
    rows = []
    for t in ts:
        s2 = 1.0 - t * t
        lam_tan, lam_rad = bs.sphere_eigenvalues(d, float(t), 1.0)
        rows.append({"t": float(t), "sigma2": s2,
                     "lambda_origin": bs.sphere_origin_jacobian(d, float(t)),
                     "lambda_tan_r1": lam_tan, "lambda_rad_r1": lam_rad})

    def slope(key, absolute):
        vals = np.array([r[key] for r in rows])
        vals = np.abs(vals) if absolute else vals
        keep = vals > 0  # log undefined otherwise; nonpositive points dropped
        if keep.sum() < 2:
            return float("nan")
        x = 0.5 * np.log(np.array([r["sigma2"] for r in rows])[keep])
        return float(np.polyfit(x, np.log(vals[keep]), 1)[0])

    extra = {"dim": d,
             "slopes_vs_log_sigma": {"origin": slope("lambda_origin", False),
                                     "radial_r1": slope("lambda_rad_r1", True),
                                     "tangential_r1": slope("lambda_tan_r1", True)},
             "dropped_nonpositive_origin": int(sum(1 for r in rows if r["lambda_origin"] <= 0))}
    criteria = {"all_finite": bool(all(np.isfinite(r["lambda_rad_r1"]) for r in rows))}
    fig = lambda path: figures.sphere_figure(rows, path)
    return rows, ["t", "sigma2", "lambda_origin", "lambda_tan_r1", "lambda_rad_r1"], criteria, extra, fig


_RUNNERS = {
    "validate": _run_validate,
    "regularity": _run_regularity,
    "converge": _run_converge,
    "transport": _run_transport,
    "sphere": _run_sphere,
}


def run(cfg: dict) -> int:
    """Execute one experiment config; returns the process exit code."""
    validate_config(cfg)
    out_dir = cfg["output"]
    os.makedirs(out_dir, exist_ok=True)
    name = cfg["experiment"]
    try:
        rows, fieldnames, criteria, extra, fig = _RUNNERS[name](cfg)
    except ConfigInvalid:
        raise
    except FlowregError as exc:
        raise NumericalFailure(str(exc)) from exc

    if cfg.get("inject_failure"):
        criteria = dict(criteria)
        criteria["injected_failure_hook"] = False

    passed = all(criteria.values())
    write_csv(os.path.join(out_dir, f"{name}.csv"), fieldnames, rows)
    # threads and output location cannot influence results; leaving them out
    # of the echo keeps summaries byte-identical across thread counts.
    summary = {
        "experiment": name,
        "config": {k: cfg[k] for k in sorted(cfg) if k not in ("threads", "output")},
        "git": _git_describe(),
        "criteria": criteria,
        "passed": passed,
    }
    summary.update(extra)
    write_summary(os.path.join(out_dir, f"{name}.summary.json"), summary)
    fig(os.path.join(out_dir, f"{name}.png"))
    return 0 if passed else 3


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None, help="64-bit seed")
    p.add_argument("--out", dest="output", default=None, help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker threads (0 = auto)")
    p.add_argument("--family", default=None,
                   help="schedule family: lipman-linear | stochastic-interpolant | rescaled-diffusion")
    p.add_argument("--target", default=None, help="target spec, e.g. gaussian:s=2")
    p.add_argument("--dims", default=None, help="comma-separated dimensions")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flowreg", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="experiment", required=True)

    p = sub.add_parser("validate", help="check the family's schedule assumptions")
    _add_common(p)

    p = sub.add_parser("regularity", help="lambda_max / op-norm / time-slope profiles")
    _add_common(p)
    p.add_argument("--probes", default=None, help="axis:N | samples:N | lattice:RxC")
    p.add_argument("--t-refine", dest="t_refine", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)

    p = sub.add_parser("converge", help="exact-law Wasserstein discretization sweep")
    _add_common(p)
    p.add_argument("--steps-list", dest="steps_list", default=None,
                   help="comma list or lo..hi dyadic range, e.g. 8..1024")
    p.add_argument("--mode", choices=("ode", "sde"), default=None)
    p.add_argument("--tau-rule", dest="tau_rule", default=None,
                   help="'auto' (N-dependent stopping rule) or an explicit time")

    p = sub.add_parser("transport", help="flow-map Lipschitz certificate and audits")
    _add_common(p)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--points", type=int, default=None)

    p = sub.add_parser("sphere", help="sphere toy-model eigenvalue series")
    _add_common(p)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--t-grid", dest="t_grid", default=None,
                   help="dyadic:J0..J1 or comma-separated times")
    return ap


def _parse_steps_list(spec: str) -> list[int]:
    if ".." in spec:
        lo, _, hi = spec.partition("..")
        lo_i, hi_i = int(lo), int(hi)
        out = []
        n = lo_i
        while n <= hi_i:
            out.append(n)
            n *= 2
        return out
    return [int(x) for x in spec.split(",")]


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("config",)}
    overrides["experiment"] = args.experiment
    if getattr(args, "dims", None) is not None:
        overrides["dims"] = [int(x) for x in str(args.dims).split(",")]
    if getattr(args, "dim", None) is not None:
        overrides["dims"] = [int(args.dim)]
    overrides.pop("dim", None)
    if getattr(args, "steps_list", None) is not None:
        overrides["steps_list"] = _parse_steps_list(args.steps_list)
    if getattr(args, "tau_rule", None) not in (None, "auto", "paper"):
        overrides["tau_rule"] = float(args.tau_rule)
    try:
        cfg = load_config(args.config, overrides)
        return run(cfg)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
