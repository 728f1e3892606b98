"""Seeded Monte Carlo experiment drivers.

Each driver wires samplers, interpolation solvers, and bound calculators
into one reportable experiment: benign overfitting for linear / phase /
ReLU interpolation, nuclear-norm matrix sensing, the anti-universality
construction, the weight-shared network bound, and distributional
self-tests of the concentration tools.

Shared contract: ``run_<name>(config, seed, workers)`` returns an
ExperimentReport whose per-trial records depend only on (config, master
seed), never on the worker count.  Stage-level randomness (population
estimates, quantiles, grid searches) runs in the parent process on named
substreams; every trial derives its own stream from the master seed and
its trial index.
"""

from __future__ import annotations

import csv
import dataclasses
import importlib.metadata
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy import stats as spstats

from . import bounds as boundsmod
from . import interpolants
from . import losses as lossmod
from . import models
from . import rng as rngmod
from .errors import InfeasibleError, NumericalError, SchemaError

try:
    VERSION = importlib.metadata.version("artifact")
except importlib.metadata.PackageNotFoundError:
    VERSION = "0+unknown"


# ---------------------------------------------------------------------------
# plumbing


def check_config(config: dict, required: tuple, optional: dict, where: str) -> dict:
    """Strict schema merge: unknown or missing keys fail before any work."""
    if not isinstance(config, dict):
        raise SchemaError(f"{where}: config must be an object")
    unknown = sorted(set(config) - set(required) - set(optional))
    if unknown:
        raise SchemaError(f"{where}: unknown config keys {unknown}")
    missing = sorted(set(required) - set(config))
    if missing:
        raise SchemaError(f"{where}: missing config keys {missing}")
    merged = dict(optional)
    merged.update(config)
    return merged


@dataclasses.dataclass
class ExperimentReport:
    name: str
    config: dict
    seed: int
    version: str
    records: list
    aggregates: dict
    timings: dict
    excluded: int
    notes: list

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "timings": self.timings,
            "excluded": self.excluded,
            "notes": self.notes,
            "aggregates": self.aggregates,
            "records": self.records,
        }


def _clean(obj):
    """Recursively convert numpy scalars/arrays to plain Python values."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    return obj


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)  # shortest round-trip decimal
    return str(v)


def write_report(report: ExperimentReport, out_dir: str, plots: bool = False) -> dict:
    """Emit report.json and trials.csv (plus optional plots/) under out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    provenance = (
        f"name={report.name} version={report.version} seed={report.seed} "
        f"config={json.dumps(report.config, sort_keys=True, separators=(',', ':'))}"
    )

    json_path = os.path.join(out_dir, "report.json")
    with open(json_path, "w") as fh:
        json.dump(report.as_dict(), fh, indent=1, sort_keys=False)
        fh.write("\n")
    paths["json"] = json_path

    csv_path = os.path.join(out_dir, "trials.csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write("# " + provenance + "\n")
        if report.records:
            cols = list(report.records[0].keys())
            writer = csv.writer(fh)
            writer.writerow(cols)
            for rec in report.records:
                if list(rec.keys()) != cols:
                    raise NumericalError("inconsistent record keys")
                writer.writerow([_csv_cell(rec[c]) for c in cols])
    paths["csv"] = csv_path

    if plots:
        from . import plots as plotsmod

        made = plotsmod.render(report, os.path.join(out_dir, "plots"))
        if made:
            paths["plots"] = made
    return paths


class _Stage:
    """Wall-clock bookkeeping: with _Stage(timings, "fit"): ..."""

    def __init__(self, timings: dict, name: str):
        self.timings = timings
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.timings[self.name] = round(
            self.timings.get(self.name, 0.0) + time.perf_counter() - self.t0, 6
        )
        return False


def _pool_map(fn, args_list, workers):
    """Order-preserving map, optionally across processes."""
    if workers and workers > 1 and len(args_list) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, len(args_list) // (4 * workers))
            return list(pool.map(fn, args_list, chunksize=chunk))
    return [fn(a) for a in args_list]


def _covariance(spec: dict, d: int | None = None) -> models.Covariance:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind is None:
        raise SchemaError("covariance spec needs a 'kind'")
    if d is not None and kind in ("isotropic", "bilevel"):
        spec.setdefault("d", d)
    return models.make_covariance(kind, **spec)


def _frac(flags) -> float:
    flags = list(flags)
    return float(np.mean(flags)) if flags else math.nan


def _median(vals) -> float:
    vals = list(vals)
    return float(np.median(vals)) if vals else math.nan


def _completed(records, n=None):
    return [
        r for r in records if r["status"] == "ok" and (n is None or r["n"] == n)
    ]


def _projected_losses(problem, loss, pred, m: int, rng) -> np.ndarray:
    """Loss draws of a projected predictor on m fresh projected samples."""
    s = problem.sample(m, rng)
    u = problem.predict(pred, s, rng.standard_normal(m))
    return lossmod.eval_loss(loss, u, s.y), s


def _mc_mean(vals: np.ndarray) -> tuple[float, float]:
    m = vals.size
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(m))


# ---------------------------------------------------------------------------
# benign overfitting: minimum-norm linear interpolation

_LINEAR_REQUIRED = ("n_grid", "d", "covariance", "noise_std", "trials")
_LINEAR_OPTIONAL = {
    "delta": 0.05,
    "signal_scale": 0.0,
    "eps_trials": 100,
    "eps_pop": 100_000,
}


def _linear_setup(cfg):
    d = cfg["d"]
    cov = _covariance(cfg["covariance"], d)
    scale = float(cfg["signal_scale"])
    if scale != 0.0:
        w_col = np.zeros((d, 1))
        w_col[0, 0] = scale
    else:
        w_col = np.zeros((d, 0))
    model = models.MultiIndexModel(
        mu=np.zeros(d),
        sigma=cov,
        W=w_col,
        link="linear_noise",
        noise=models.gaussian_noise(cfg["noise_std"]),
    )
    w_star = w_col[:, 0] if scale != 0.0 else np.zeros(d)
    return model, w_star


def _benign_linear_trial(args):
    cfg, seed_n, idx, shared = args
    model, w_star = _linear_setup(cfg)
    geom = models.geometry(model)
    n = shared["n"]
    trial_seed = rngmod.derive(seed_n, f"trial-{idx}")
    data = models.sample(model, n, trial_seed)

    sol = interpolants.min_norm_linear(data.X, data.y)
    w_hat = sol.w
    xi = data.y - data.X @ w_star
    if model.k:
        qw = w_hat - model.W @ (geom.m_inv @ (geom.sw.T @ w_hat))
    else:
        qw = w_hat
    norm_perp_sq = float(qw @ qw)
    xi_norm_sq = float(xi @ xi)
    trace_perp = shared["trace_perp"]

    resid = data.X @ w_hat - data.y
    train_loss = float(resid @ resid) / n
    diff = w_hat - w_star
    pop_loss = float(model.sigma.quad(diff)) + cfg["noise_std"] ** 2

    c_w = shared["c_delta"] * float(np.linalg.norm(w_hat))
    ev0 = boundsmod.BoundEvaluation.build(pop_loss, train_loss, 1.0, c_w, n, 0.0)
    ev1 = boundsmod.BoundEvaluation.build(
        pop_loss, train_loss, 1.0, c_w, n, shared["eps_hat"]
    )
    return {
        "trial": idx,
        "n": n,
        "d": cfg["d"],
        "status": "ok",
        "norm_sq": float(w_hat @ w_hat),
        "norm_perp_sq": norm_perp_sq,
        "xi_norm_sq": xi_norm_sq,
        "norm_ratio": norm_perp_sq * trace_perp / xi_norm_sq,
        "norm_pred_eps0": boundsmod.norm_bound_linear(xi_norm_sq, trace_perp, 0.0),
        "train_loss": train_loss,
        "pop_loss": pop_loss,
        "rhs_eps0": ev0.rhs,
        "rhs_epshat": ev1.rhs,
        "holds_eps0": ev0.holds,
        "holds_epshat": ev1.holds,
        "slack_epshat": ev1.slack,
        "max_residual": float(sol.max_residual),
    }


def run_benign_linear(config: dict, seed: int, workers: int = 1) -> ExperimentReport:
    cfg = check_config(config, _LINEAR_REQUIRED, _LINEAR_OPTIONAL, "benign_linear")
    timings, notes = {}, []
    with _Stage(timings, "setup"):
        model, _ = _linear_setup(cfg)
        geom = models.geometry(model)
        trace_perp = geom.trace_perp
        eff_rank = geom.eff_rank_perp
        for n in cfg["n_grid"]:
            if eff_rank <= n:
                notes.append(
                    f"R(S_perp)={eff_rank:.1f} <= n={n}: benign regime not satisfied"
                )
        c_delta = boundsmod.c_delta_l2(
            geom, cfg["delta"], seed=rngmod.derive(seed, "cdelta")
        )

    eps_by_n = {}
    with _Stage(timings, "eps"):
        for n in cfg["n_grid"]:
            eps_by_n[n] = boundsmod.estimate_eps(
                model,
                lossmod.square(),
                n,
                trials=cfg["eps_trials"],
                seed=rngmod.derive(seed, f"eps-n{n}"),
                delta=cfg["delta"],
                m_pop=cfg["eps_pop"],
            )

    records = []
    with _Stage(timings, "trials"):
        for n in cfg["n_grid"]:
            seed_n = rngmod.derive(seed, f"n={n}")
            shared = {
                "n": n,
                "c_delta": c_delta,
                "eps_hat": eps_by_n[n],
                "trace_perp": trace_perp,
            }
            args = [(cfg, seed_n, i, shared) for i in range(cfg["trials"])]
            records.extend(_pool_map(_benign_linear_trial, args, workers))
    records.sort(key=lambda r: (r["n"], r["trial"]))

    per_n = []
    for n in cfg["n_grid"]:
        done = _completed(records, n)
        per_n.append(
            {
                "n": n,
                "eps_hat": eps_by_n[n],
                "c_delta": c_delta,
                "hold_frac_eps0": _frac(r["holds_eps0"] for r in done),
                "hold_frac_epshat": _frac(r["holds_epshat"] for r in done),
                "norm_ratio_within_15pct": _frac(
                    0.85 <= r["norm_ratio"] <= 1.15 for r in done
                ),
                "lhs_median": _median(r["pop_loss"] for r in done),
                "rhs_eps0_median": _median(r["rhs_eps0"] for r in done),
                "rhs_epshat_median": _median(r["rhs_epshat"] for r in done),
                "completed": len(done),
            }
        )
    aggregates = {
        "per_n": per_n,
        "trace_perp": trace_perp,
        "eff_rank_perp": eff_rank,
    }
    return ExperimentReport(
        "benign_linear",
        _clean(cfg),
        int(seed),
        VERSION,
        _clean(records),
        _clean(aggregates),
        timings,
        excluded=sum(r["status"] != "ok" for r in records),
        notes=notes,
    )


# ---------------------------------------------------------------------------
# population-minimizer search shared by the phase / ReLU drivers


def _sharp_search(problem, loss, offset: float, m: int, rng) -> tuple[float, float]:
    """Best single-index coefficient against the population loss.

    Grid of 401 multiples of the index scale over [-3, 3], refined once
    around the coarse minimizer; the final loss is re-estimated on fresh
    draws to strip the selection bias of the grid minimum.
    """
    sample = problem.sample(m, rng)
    g = sample.gz[:, 0]

    def grid_losses(ts):
        out = np.empty(ts.size)
        for lo in range(0, ts.size, 64):
            part = ts[lo : lo + 64]
            preds = g[:, None] * part[None, :] + offset
            f = lossmod.eval_loss(loss, preds, sample.y[:, None])
            out[lo : lo + 64] = f.mean(axis=0)
        return out

    scale = float(problem.index_chol[0, 0])
    ts = np.linspace(-3.0, 3.0, 401) * scale
    t0 = ts[int(np.argmin(grid_losses(ts)))]
    step = ts[1] - ts[0]
    ts = np.linspace(t0 - step, t0 + step, 401)
    t_hat = float(ts[int(np.argmin(grid_losses(ts)))])

    fresh = problem.sample(m, rng)
    f = lossmod.eval_loss(loss, t_hat * fresh.gz[:, 0] + offset, fresh.y)
    return t_hat, float(f.mean())


def _index_model(cfg, link: str, offset: float = 0.0) -> models.MultiIndexModel:
    d = cfg["d"]
    w_col = np.zeros((d, 1))
    w_col[0, 0] = float(cfg["signal_scale"])
    return models.MultiIndexModel(
        mu=np.zeros(d),
        sigma=_covariance(cfg["covariance"], d),
        W=w_col,
        link=link,
        noise=models.gaussian_noise(cfg["noise_std"]),
        offset=offset,
    )


# ---------------------------------------------------------------------------
# benign overfitting: phase retrieval

_PHASE_REQUIRED = ("n_grid", "d", "covariance", "noise_std", "trials")
_PHASE_OPTIONAL = {
    "delta": 0.05,
    "signal_scale": 1.0,
    "test_samples": 100_000,
    "sharp_samples": 100_000,
    "eps_trials": 100,
    "eps_pop": 100_000,
}


def _benign_phase_trial(args):
    cfg, seed_n, idx, shared = args
    model = _index_model(cfg, "magnitude_noise")
    problem = model.projected_problem()
    loss = lossmod.phase_retrieval()
    n = shared["n"]
    trial_seed = rngmod.derive(seed_n, f"trial-{idx}")
    data = models.sample(model, n, trial_seed)

    index_std = float(problem.index_chol[0, 0])
    w_sharp = (shared["t_hat"] / index_std) * model.W[:, 0]
    base = {
        "trial": idx,
        "n": n,
        "d": cfg["d"],
        "status": "ok",
        "norm": math.nan,
        "norm_bound_eps0": math.nan,
        "norm_bound_epshat": math.nan,
        "norm_conforms_eps0": False,
        "norm_conforms_epshat": False,
        "train_loss": math.nan,
        "test_loss": math.nan,
        "test_se": math.nan,
        "sharp_ratio": math.nan,
        "rhs_eps0": math.nan,
        "rhs_epshat": math.nan,
        "holds_eps0": False,
        "holds_epshat": False,
        "max_residual": math.nan,
    }
    try:
        sol = interpolants.phase_construct(data.X, data.y, w_sharp)
    except (InfeasibleError, NumericalError):
        base["status"] = "excluded"
        return base
    w_hat = sol.w
    norm = float(np.linalg.norm(w_hat))

    pred = model.project_predictor(w_hat)
    f_test, _ = _projected_losses(
        problem, loss, pred, cfg["test_samples"], rngmod.substream(trial_seed, "test")
    )
    test_loss, test_se = _mc_mean(f_test)
    u_train = data.X @ w_hat
    train_loss = float(lossmod.eval_loss(loss, u_train, data.y).mean())

    eps_hat = shared["eps_hat"]
    l_sharp = shared["l_sharp"]
    nb0 = boundsmod.norm_bound_phase(
        shared["sharp_norm"], l_sharp, n, shared["trace_perp"], 0.0
    )
    nb1 = boundsmod.norm_bound_phase(
        shared["sharp_norm"], l_sharp, n, shared["trace_perp"], eps_hat
    )
    # corollary-style RHS: population loss and norm of the reference
    # predictor, with the perpendicular trace absorbing the complexity
    root = math.sqrt(l_sharp) + shared["sharp_norm"] * math.sqrt(
        shared["trace_perp"] / n
    )
    base.update(
        {
            "norm": norm,
            "norm_bound_eps0": nb0,
            "norm_bound_epshat": nb1,
            "norm_conforms_eps0": norm <= nb0,
            "norm_conforms_epshat": norm <= nb1,
            "train_loss": train_loss,
            "test_loss": test_loss,
            "test_se": test_se,
            "sharp_ratio": test_loss / l_sharp,
            "rhs_eps0": root**2,
            "rhs_epshat": root**2 / (1.0 - eps_hat),
            "holds_eps0": test_loss <= root**2,
            "holds_epshat": test_loss <= root**2 / (1.0 - eps_hat),
            "max_residual": float(sol.max_residual),
        }
    )
    return base


def run_benign_phase(config: dict, seed: int, workers: int = 1) -> ExperimentReport:
    cfg = check_config(config, _PHASE_REQUIRED, _PHASE_OPTIONAL, "benign_phase")
    if cfg["signal_scale"] == 0.0:
        raise SchemaError("benign_phase: signal_scale must be nonzero (k = 1)")
    timings, notes = {}, []
    loss = lossmod.phase_retrieval()
    with _Stage(timings, "setup"):
        model = _index_model(cfg, "magnitude_noise")
        problem = model.projected_problem()
        geom = models.geometry(model)
        trace_perp = geom.trace_perp
        t_hat, l_sharp = _sharp_search(
            problem, loss, 0.0, cfg["sharp_samples"], rngmod.substream(seed, "sharp")
        )
        index_std = float(problem.index_chol[0, 0])
        sharp_norm = abs(t_hat) / index_std * float(np.linalg.norm(model.W[:, 0]))

    eps_by_n = {}
    with _Stage(timings, "eps"):
        for n in cfg["n_grid"]:
            eps_by_n[n] = boundsmod.estimate_eps(
                model,
                loss,
                n,
                trials=cfg["eps_trials"],
                seed=rngmod.derive(seed, f"eps-n{n}"),
                delta=cfg["delta"],
                m_pop=cfg["eps_pop"],
            )

    records = []
    with _Stage(timings, "trials"):
        for n in cfg["n_grid"]:
            seed_n = rngmod.derive(seed, f"n={n}")
            shared = {
                "n": n,
                "t_hat": t_hat,
                "l_sharp": l_sharp,
                "sharp_norm": sharp_norm,
                "trace_perp": trace_perp,
                "eps_hat": eps_by_n[n],
            }
            args = [(cfg, seed_n, i, shared) for i in range(cfg["trials"])]
            records.extend(_pool_map(_benign_phase_trial, args, workers))
    records.sort(key=lambda r: (r["n"], r["trial"]))

    per_n = []
    for n in cfg["n_grid"]:
        done = _completed(records, n)
        per_n.append(
            {
                "n": n,
                "eps_hat": eps_by_n[n],
                "hold_frac_eps0": _frac(r["holds_eps0"] for r in done),
                "hold_frac_epshat": _frac(r["holds_epshat"] for r in done),
                "norm_conform_frac_eps0": _frac(r["norm_conforms_eps0"] for r in done),
                "norm_conform_frac_epshat": _frac(
                    r["norm_conforms_epshat"] for r in done
                ),
                "ratio_median": _median(r["sharp_ratio"] for r in done),
                "lhs_median": _median(r["test_loss"] for r in done),
                "rhs_eps0_median": _median(r["rhs_eps0"] for r in done),
                "rhs_epshat_median": _median(r["rhs_epshat"] for r in done),
                "completed": len(done),
            }
        )
    aggregates = {
        "per_n": per_n,
        "t_hat": t_hat,
        "l_sharp": l_sharp,
        "sharp_norm": sharp_norm,
        "trace_perp": trace_perp,
        "eff_rank_perp": geom.eff_rank_perp,
    }
    return ExperimentReport(
        "benign_phase",
        _clean(cfg),
        int(seed),
        VERSION,
        _clean(records),
        _clean(aggregates),
        timings,
        excluded=sum(r["status"] != "ok" for r in records),
        notes=notes,
    )


# ---------------------------------------------------------------------------
# benign overfitting: ReLU regression

_RELU_REQUIRED = ("n_grid", "d", "covariance", "noise_std", "trials")
_RELU_OPTIONAL = {
    "delta": 0.05,
    "signal_scale": 1.0,
    "offset": -0.5,
    "test_samples": 100_000,
    "sharp_samples": 100_000,
    "eps_trials": 100,
    "eps_pop": 100_000,
}


def _benign_relu_trial(args):
    cfg, seed_n, idx, shared = args
    model = _index_model(cfg, "relu_pointmass", offset=cfg["offset"])
    problem = model.projected_problem()
    loss = lossmod.relu_interp()
    n = shared["n"]
    trial_seed = rngmod.derive(seed_n, f"trial-{idx}")
    data = models.sample(model, n, trial_seed)

    index_std = float(problem.index_chol[0, 0])
    w_sharp = (shared["t_hat"] / index_std) * model.W[:, 0]
    b_sharp = cfg["offset"]
    base = {
        "trial": idx,
        "n": n,
        "d": cfg["d"],
        "status": "ok",
        "zero_frac": float(np.mean(data.y == 0.0)),
        "norm_relaxed": math.nan,
        "norm_strict": math.nan,
        "norm_saving": math.nan,
        "norm_bound_eps0": math.nan,
        "norm_bound_epshat": math.nan,
        "norm_conforms_epshat": False,
        "train_loss": math.nan,
        "test_loss": math.nan,
        "test_se": math.nan,
        "comparison_loss": math.nan,
        "sharp_ratio": math.nan,
        "rhs_eps0": math.nan,
        "rhs_epshat": math.nan,
        "holds_eps0": False,
        "holds_epshat": False,
        "max_residual": math.nan,
    }
    try:
        relaxed = interpolants.relu_construct(
            data.X, data.y, w_sharp, b_sharp, zero_mode="relaxed"
        )
        strict = interpolants.relu_construct(
            data.X, data.y, w_sharp, b_sharp, zero_mode="strict"
        )
    except (InfeasibleError, NumericalError):
        base["status"] = "excluded"
        return base
    norm_relaxed = float(np.linalg.norm(relaxed.w))
    norm_strict = float(np.linalg.norm(strict.w))
    # both constructions satisfy the point-mass interpolation constraints,
    # so the better of the two witnesses the norm the y=0 branch saves
    norm_used = min(norm_relaxed, norm_strict)
    saving = norm_strict - norm_used

    pred = model.project_predictor(relaxed.w, b_sharp)
    f_test, _ = _projected_losses(
        problem, loss, pred, cfg["test_samples"], rngmod.substream(trial_seed, "test")
    )
    test_loss, test_se = _mc_mean(f_test)
    f_cmp, _ = _projected_losses(
        problem,
        lossmod.sigma_square("relu"),
        pred,
        cfg["test_samples"],
        rngmod.substream(trial_seed, "comparison"),
    )
    comparison_loss = float(f_cmp.mean())
    u_train = data.X @ relaxed.w + b_sharp
    train_loss = float(lossmod.eval_loss(loss, u_train, data.y).mean())

    eps_hat = shared["eps_hat"]
    l_sharp = shared["l_sharp"]
    nb0 = boundsmod.norm_bound_phase(
        shared["sharp_norm"], l_sharp, n, shared["trace_perp"], 0.0
    )
    nb1 = boundsmod.norm_bound_phase(
        shared["sharp_norm"], l_sharp, n, shared["trace_perp"], eps_hat
    )
    c_w = shared["c_delta"] * norm_relaxed
    ev0 = boundsmod.BoundEvaluation.build(test_loss, train_loss, 1.0, c_w, n, 0.0)
    ev1 = boundsmod.BoundEvaluation.build(test_loss, train_loss, 1.0, c_w, n, eps_hat)
    base.update(
        {
            "norm_relaxed": norm_relaxed,
            "norm_strict": norm_strict,
            "norm_saving": saving,
            "norm_bound_eps0": nb0,
            "norm_bound_epshat": nb1,
            "norm_conforms_epshat": norm_used <= nb1,
            "train_loss": train_loss,
            "test_loss": test_loss,
            "test_se": test_se,
            "comparison_loss": comparison_loss,
            "sharp_ratio": test_loss / l_sharp,
            "rhs_eps0": ev0.rhs,
            "rhs_epshat": ev1.rhs,
            "holds_eps0": ev0.holds,
            "holds_epshat": ev1.holds,
            "max_residual": float(relaxed.max_residual),
        }
    )
    return base


def run_benign_relu(config: dict, seed: int, workers: int = 1) -> ExperimentReport:
    cfg = check_config(config, _RELU_REQUIRED, _RELU_OPTIONAL, "benign_relu")
    timings, notes = {}, []
    loss = lossmod.relu_interp()
    with _Stage(timings, "setup"):
        model = _index_model(cfg, "relu_pointmass", offset=cfg["offset"])
        problem = model.projected_problem()
        geom = models.geometry(model)
        trace_perp = geom.trace_perp
        c_delta = boundsmod.c_delta_l2(
            geom, cfg["delta"], seed=rngmod.derive(seed, "cdelta")
        )
        t_hat, l_sharp = _sharp_search(
            problem,
            loss,
            cfg["offset"],
            cfg["sharp_samples"],
            rngmod.substream(seed, "sharp"),
        )
        index_std = float(problem.index_chol[0, 0])
        sharp_norm = abs(t_hat) / index_std * float(np.linalg.norm(model.W[:, 0]))
        probe = problem.sample(20_000, rngmod.substream(seed, "zero-frac"))
        zero_frac = float(np.mean(probe.y == 0.0))
        if not 0.2 <= zero_frac <= 0.8:
            notes.append(f"P(y=0)={zero_frac:.3f} outside [0.2, 0.8]")

    eps_by_n = {}
    with _Stage(timings, "eps"):
        for n in cfg["n_grid"]:
            eps_by_n[n] = boundsmod.estimate_eps(
                model,
                loss,
                n,
                trials=cfg["eps_trials"],
                seed=rngmod.derive(seed, f"eps-n{n}"),
                delta=cfg["delta"],
                m_pop=cfg["eps_pop"],
            )

    records = []
    with _Stage(timings, "trials"):
        for n in cfg["n_grid"]:
            seed_n = rngmod.derive(seed, f"n={n}")
            shared = {
                "n": n,
                "t_hat": t_hat,
                "l_sharp": l_sharp,
                "sharp_norm": sharp_norm,
                "trace_perp": trace_perp,
                "c_delta": c_delta,
                "eps_hat": eps_by_n[n],
            }
            args = [(cfg, seed_n, i, shared) for i in range(cfg["trials"])]
            records.extend(_pool_map(_benign_relu_trial, args, workers))
    records.sort(key=lambda r: (r["n"], r["trial"]))

    per_n = []
    for n in cfg["n_grid"]:
        done = _completed(records, n)
        per_n.append(
            {
                "n": n,
                "eps_hat": eps_by_n[n],
                "c_delta": c_delta,
                "hold_frac_eps0": _frac(r["holds_eps0"] for r in done),
                "hold_frac_epshat": _frac(r["holds_epshat"] for r in done),
                "norm_conform_frac_epshat": _frac(
                    r["norm_conforms_epshat"] for r in done
                ),
                "saving_min": min((r["norm_saving"] for r in done), default=math.nan),
                "saving_median": _median(r["norm_saving"] for r in done),
                "ratio_median": _median(r["sharp_ratio"] for r in done),
                "lhs_median": _median(r["test_loss"] for r in done),
                "rhs_eps0_median": _median(r["rhs_eps0"] for r in done),
                "rhs_epshat_median": _median(r["rhs_epshat"] for r in done),
                "completed": len(done),
            }
        )
    aggregates = {
        "per_n": per_n,
        "t_hat": t_hat,
        "l_sharp": l_sharp,
        "sharp_norm": sharp_norm,
        "trace_perp": trace_perp,
        "zero_frac": zero_frac,
    }
    return ExperimentReport(
        "benign_relu",
        _clean(cfg),
        int(seed),
        VERSION,
        _clean(records),
        _clean(aggregates),
        timings,
        excluded=sum(r["status"] != "ok" for r in records),
        notes=notes,
    )


# ---------------------------------------------------------------------------
# matrix sensing: nuclear-norm interpolation

_MATRIX_REQUIRED = ("d1", "d2", "r", "n_grid", "noise_std", "trials")
_MATRIX_OPTIONAL = {
    "delta": 0.05,
    "x_star_scale": 1.0,
    "rho": 1.0,
    "max_iter": 5000,
    "feas_tol": 1e-6,
    "cert_tol": 1e-3,
    "eps_trials": 100,
    "eps_pop": 100_000,
}


def _matrix_trial(args):
    cfg, seed_n, idx, shared = args
    n = shared["n"]
    trial_seed = rngmod.derive(seed_n, f"trial-{idx}")
    inst = models.sample_matrix_sensing(
        cfg["d1"],
        cfg["d2"],
        cfg["r"],
        n,
        cfg["noise_std"],
        cfg["x_star_scale"],
        trial_seed,
    )
    base = {
        "trial": idx,
        "n": n,
        "d1": cfg["d1"],
        "d2": cfg["d2"],
        "r": cfg["r"],
        "status": "ok",
        "nuclear_norm": math.nan,
        "feas_residual": math.nan,
        "iterations": 0,
        "cert_rank": 0,
        "cert_op_norm": math.nan,
        "cert_alignment": math.nan,
        "cert_passed": False,
        "rel_err": math.nan,
        "pop_loss": math.nan,
        "train_mse": math.nan,
        "norm_bound_q": math.nan,
        "norm_bound_eps0": math.nan,
        "norm_conforms_q": False,
        "norm_conforms_eps0": False,
        "rhs_eps0": math.nan,
        "rhs_epshat": math.nan,
        "holds_eps0": False,
        "holds_epshat": False,
        "consist_ratio": math.nan,
    }
    try:
        sol = interpolants.nuclear_min(
            inst.a_ops,
            inst.y,
            rho=cfg["rho"],
            max_iter=cfg["max_iter"],
            feas_tol=cfg["feas_tol"],
        )
    except (InfeasibleError, NumericalError):
        base["status"] = "excluded"
        return base
    x_hat = sol.x_hat
    cert = interpolants.certify_nuclear(x_hat, inst.a_ops, tol=cfg["cert_tol"])

    err_sq = float(np.sum((x_hat - inst.x_star) ** 2))
    rel_err = math.sqrt(err_sq) / cfg["x_star_scale"]
    pop_loss = err_sq + cfg["noise_std"] ** 2
    resid = inst.apply(x_hat) - inst.y
    train_mse = float(resid @ resid) / n

    sigma_sq = cfg["noise_std"] ** 2
    nb_q = boundsmod.norm_bound_matrix(
        cfg["r"], cfg["x_star_scale"], n, sigma_sq, cfg["d1"], cfg["d2"], 0.25
    )
    nb_0 = boundsmod.norm_bound_matrix(
        cfg["r"], cfg["x_star_scale"], n, sigma_sq, cfg["d1"], cfg["d2"], 0.0
    )
    c_x = shared["c_nuclear"] * sol.norm
    ev0 = boundsmod.BoundEvaluation.build(pop_loss, train_mse, 1.0, c_x, n, 0.0)
    ev1 = boundsmod.BoundEvaluation.build(
        pop_loss, train_mse, 1.0, c_x, n, shared["eps_hat"]
    )
    terms = boundsmod.consistency_rhs_matrix(
        cfg["r"], cfg["d1"], cfg["d2"], n, cfg["noise_std"], cfg["x_star_scale"]
    )
    base.update(
        {
            "nuclear_norm": float(sol.norm),
            "feas_residual": float(sol.max_residual),
            "iterations": int(sol.iterations),
            "cert_rank": int(cert["rank"]),
            "cert_op_norm": float(cert["op_norm"]),
            "cert_alignment": float(cert["alignment"]),
            "cert_passed": bool(cert["passed"]),
            "rel_err": rel_err,
            "pop_loss": pop_loss,
            "train_mse": train_mse,
            "norm_bound_q": nb_q,
            "norm_bound_eps0": nb_0,
            "norm_conforms_q": sol.norm <= nb_q,
            "norm_conforms_eps0": sol.norm <= nb_0,
            "rhs_eps0": ev0.rhs,
            "rhs_epshat": ev1.rhs,
            "holds_eps0": ev0.holds,
            "holds_epshat": ev1.holds,
            "consist_ratio": rel_err**2 / terms["total"],
        }
    )
    return base


def run_matrix_sensing(config: dict, seed: int, workers: int = 1) -> ExperimentReport:
    cfg = check_config(config, _MATRIX_REQUIRED, _MATRIX_OPTIONAL, "matrix_sensing")
    if cfg["d1"] * cfg["d2"] > 10_000:
        raise SchemaError("matrix_sensing: d1*d2 must stay <= 10000")
    timings, notes = {}, []
    with _Stage(timings, "setup"):
        c_nuclear = boundsmod.c_delta_nuclear(cfg["d1"], cfg["d2"], cfg["delta"])
        # low-dimensional stand-in with the measurement law <A, X*> + noise
        stub = models.MultiIndexModel(
            mu=np.zeros(2),
            sigma=models.make_covariance("isotropic", d=2, scale=1.0),
            W=np.array([[cfg["x_star_scale"]], [0.0]]),
            link="linear_noise",
            noise=models.gaussian_noise(cfg["noise_std"]),
        )

    eps_by_n = {}
    with _Stage(timings, "eps"):
        for n in cfg["n_grid"]:
            if cfg["noise_std"] == 0.0:
                eps_by_n[n] = 0.0
                continue
            eps_by_n[n] = boundsmod.estimate_eps(
                stub,
                lossmod.square(),
                n,
                trials=cfg["eps_trials"],
                seed=rngmod.derive(seed, f"eps-n{n}"),
                delta=cfg["delta"],
                m_pop=cfg["eps_pop"],
            )

    records = []
    with _Stage(timings, "trials"):
        for n in cfg["n_grid"]:
            seed_n = rngmod.derive(seed, f"n={n}")
            shared = {"n": n, "c_nuclear": c_nuclear, "eps_hat": eps_by_n[n]}
            args = [(cfg, seed_n, i, shared) for i in range(cfg["trials"])]
            records.extend(_pool_map(_matrix_trial, args, workers))
    records.sort(key=lambda r: (r["n"], r["trial"]))

    per_n = []
    for n in cfg["n_grid"]:
        done = _completed(records, n)
        per_n.append(
            {
                "n": n,
                "eps_hat": eps_by_n[n],
                "c_nuclear": c_nuclear,
                "feas_max": max((r["feas_residual"] for r in done), default=math.nan),
                "cert_pass_frac": _frac(r["cert_passed"] for r in done),
                "norm_conform_frac_q": _frac(r["norm_conforms_q"] for r in done),
                "norm_conform_frac_eps0": _frac(r["norm_conforms_eps0"] for r in done),
                "rel_err_median": _median(r["rel_err"] for r in done),
                "consist_ratio_median": _median(r["consist_ratio"] for r in done),
                "hold_frac_eps0": _frac(r["holds_eps0"] for r in done),
                "hold_frac_epshat": _frac(r["holds_epshat"] for r in done),
                "lhs_median": _median(r["pop_loss"] for r in done),
                "rhs_eps0_median": _median(r["rhs_eps0"] for r in done),
                "rhs_epshat_median": _median(r["rhs_epshat"] for r in done),
                "completed": len(done),
            }
        )
    aggregates = {"per_n": per_n}
    return ExperimentReport(
        "matrix_sensing",
        _clean(cfg),
        int(seed),
        VERSION,
        _clean(records),
        _clean(aggregates),
        timings,
        excluded=sum(r["status"] != "ok" for r in records),
        notes=notes,
    )


# ---------------------------------------------------------------------------
# anti-universality

_COUNTER_REQUIRED = ("d", "n_grid", "trials", "tail")
_COUNTER_OPTIONAL = {
    "delta": 0.05,
    "test_samples": 100_000,
    "moment_samples": 1_000_000,
    "eps_trials": 100,
    "eps_pop": 100_000,
}


def _counter_model(cfg) -> models.CounterexampleModel:
    return models.CounterexampleModel(
        sigma_head=models.make_covariance("isotropic", d=1, scale=1.0),
        sigma_tail=_covariance(cfg["tail"], cfg["d"] - 1),
    )


def _counterexample_trial(args):
    cfg, seed_n, idx, shared = args
    cmodel = _counter_model(cfg)
    problem = cmodel.projected_problem()
    n = shared["n"]
    trial_seed = rngmod.derive(seed_n, f"trial-{idx}")
    data = models.sample_counterexample(cmodel, n, trial_seed)

    sol = interpolants.min_norm_linear(data.X, data.y)
    w_hat = sol.w
    norm_sq = float(w_hat @ w_hat)
    tail_norm = float(np.linalg.norm(w_hat[1:]))
    resid = data.X @ w_hat - data.y
    train_weighted = float(np.mean(resid**2 / data.weights))

    pred = cmodel.project_predictor(w_hat)
    rng_test = rngmod.substream(trial_seed, "test")
    f_test, test_sample = _projected_losses(
        problem, lossmod.square(), pred, cfg["test_samples"], rng_test
    )
    unweighted, unweighted_se = _mc_mean(f_test)
    weighted, weighted_se = _mc_mean(f_test / test_sample.weights)

    eps_hat = shared["eps_hat"]
    c_tail = shared["c_tail"] * tail_norm
    rhs0 = boundsmod.weighted_optimistic_rhs(train_weighted, c_tail, n, 0.0)
    rhs1 = boundsmod.weighted_optimistic_rhs(train_weighted, c_tail, n, eps_hat)
    uni_rhs = norm_sq * shared["m2"] * shared["trace_tail"] / n
    return {
        "trial": idx,
        "n": n,
        "d": cfg["d"],
        "status": "ok",
        "norm_sq": norm_sq,
        "tail_norm": tail_norm,
        "train_weighted_loss": train_weighted,
        "weighted_test": weighted,
        "weighted_test_se": weighted_se,
        "unweighted_test": unweighted,
        "unweighted_test_se": unweighted_se,
        "weighted_rhs_eps0": rhs0,
        "weighted_rhs_epshat": rhs1,
        "weighted_holds_eps0": weighted <= rhs0,
        "weighted_holds_epshat": weighted <= rhs1,
        "universality_rhs": uni_rhs,
        "universality_ratio": unweighted / uni_rhs,
        "max_residual": float(sol.max_residual),
    }


def run_counterexample(config: dict, seed: int, workers: int = 1) -> ExperimentReport:
    cfg = check_config(config, _COUNTER_REQUIRED, _COUNTER_OPTIONAL, "counterexample")
    timings, notes = {}, []
    with _Stage(timings, "moments"):
        x = rngmod.substream(seed, "moments").standard_normal(cfg["moment_samples"])
        h2 = (1.0 + np.abs(x)) ** 2
        h4 = h2**2
        m = cfg["moment_samples"]
        m2, m4 = float(h2.mean()), float(h4.mean())
        cov = np.cov(np.stack([h2, h4]))
        m2_sq = m2 * m2
        gap = m4 - m2_sq
        # delta method for g(a, b) = b - a^2 at (mean h^2, mean h^4)
        var_gap = (cov[1, 1] + 4.0 * m2 * m2 * cov[0, 0] - 4.0 * m2 * cov[0, 1]) / m
        moments = {
            "m2": m2,
            "m2_se": float(np.sqrt(cov[0, 0] / m)),
            "m4": m4,
            "m4_se": float(np.sqrt(cov[1, 1] / m)),
            "m2_sq": m2_sq,
            "m2_sq_se": float(2.0 * m2 * np.sqrt(cov[0, 0] / m)),
            "gap": gap,
            "gap_se": float(np.sqrt(max(var_gap, 0.0))),
        }

    with _Stage(timings, "setup"):
        cmodel = _counter_model(cfg)
        trace_tail = cmodel.sigma_tail.trace
        c_tail = boundsmod.c_delta_l2(
            cmodel.sigma_tail, cfg["delta"], seed=rngmod.derive(seed, "cdelta")
        )

    eps_by_n = {}
    with _Stage(timings, "eps"):
        for n in cfg["n_grid"]:
            eps_by_n[n] = boundsmod.estimate_eps(
                cmodel.projected_problem(),
                lossmod.square(),
                n,
                trials=cfg["eps_trials"],
                seed=rngmod.derive(seed, f"eps-n{n}"),
                delta=cfg["delta"],
                m_pop=cfg["eps_pop"],
            )

    records = []
    with _Stage(timings, "trials"):
        for n in cfg["n_grid"]:
            seed_n = rngmod.derive(seed, f"n={n}")
            shared = {
                "n": n,
                "c_tail": c_tail,
                "eps_hat": eps_by_n[n],
                "m2": m2,
                "trace_tail": trace_tail,
            }
            args = [(cfg, seed_n, i, shared) for i in range(cfg["trials"])]
            records.extend(_pool_map(_counterexample_trial, args, workers))
    records.sort(key=lambda r: (r["n"], r["trial"]))

    per_n = []
    for n in cfg["n_grid"]:
        done = _completed(records, n)
        per_n.append(
            {
                "n": n,
                "eps_hat": eps_by_n[n],
                "c_tail": c_tail,
                "weighted_hold_frac_eps0": _frac(
                    r["weighted_holds_eps0"] for r in done
                ),
                "weighted_hold_frac_epshat": _frac(
                    r["weighted_holds_epshat"] for r in done
                ),
                "universality_ratio_median": _median(
                    r["universality_ratio"] for r in done
                ),
                "lhs_median": _median(r["weighted_test"] for r in done),
                "rhs_eps0_median": _median(r["weighted_rhs_eps0"] for r in done),
                "rhs_epshat_median": _median(r["weighted_rhs_epshat"] for r in done),
                "completed": len(done),
            }
        )
    aggregates = {"per_n": per_n, "moments": moments, "trace_tail": trace_tail}
    return ExperimentReport(
        "counterexample",
        _clean(cfg),
        int(seed),
        VERSION,
        _clean(records),
        _clean(aggregates),
        timings,
        excluded=sum(r["status"] != "ok" for r in records),
        notes=notes,
    )


# ---------------------------------------------------------------------------
# weight-shared network bound

_NN_REQUIRED = ("n", "d", "n_units", "covariance", "noise_std")
_NN_OPTIONAL = {
    "delta": 0.05,
    "signal_scale": 1.0,
    "trials_random": 200,
    "trials_fitted": 50,
    "fit_steps": 2000,
    "step_scale": 0.05,
    "init_std": 0.1,
    "test_samples": 100_000,
    "eps_trials": 100,
    "eps_pop": 50_000,
}


def fit_weightshared(x, y, n_units, steps, lr, init_std, rng):
    """Full-batch gradient descent on (sum_j a_j relu(<w,x> - b_j) - y)^2.

    Subgradient 0 exactly at the kinks; the step is applied to the
    mean-loss gradient.  Returns (w, a, b, diverged flag, steps run).
    """
    n, d = x.shape
    w = init_std * rng.standard_normal(d)
    a = init_std * rng.standard_normal(n_units)
    b = init_std * rng.standard_normal(n_units)
    prev = math.inf
    rises = 0
    run = 0
    # overflow is how divergence announces itself; detect it, don't warn
    with np.errstate(over="ignore", invalid="ignore"):
        for run in range(1, steps + 1):
            u = x @ w
            gap = u[:, None] - b[None, :]
            act = np.maximum(gap, 0.0)
            mask = gap > 0.0
            resid = act @ a - y
            loss = float(resid @ resid) / n
            if not math.isfinite(loss):
                return w, a, b, True, run
            if loss > prev:
                rises += 1
                if rises >= 10:
                    return w, a, b, True, run
            else:
                rises = 0
            prev = loss
            grad_a = (2.0 / n) * (act.T @ resid)
            grad_b = (-2.0 / n) * a * (mask.T @ resid)
            grad_w = (2.0 / n) * (x.T @ (resid * (mask @ a)))
            a = a - lr * grad_a
            b = b - lr * grad_b
            w = w - lr * grad_w
    return w, a, b, False, run


def _nn_trial(args):
    cfg, seed, idx, shared, mode = args
    model = _index_model(cfg, "linear_noise")
    problem = model.projected_problem()
    n = cfg["n"]
    trial_seed = rngmod.derive(seed, f"{mode}-trial-{idx}")
    data = models.sample(model, n, trial_seed)
    rng = rngmod.substream(trial_seed, "theta")

    diverged = False
    steps_run = 0
    if mode == "fitted":
        w, a, b, diverged, steps_run = fit_weightshared(
            data.X,
            data.y,
            cfg["n_units"],
            cfg["fit_steps"],
            cfg["step_scale"],
            cfg["init_std"],
            rng,
        )
    else:
        w = cfg["init_std"] * rng.standard_normal(cfg["d"])
        a = cfg["init_std"] * rng.standard_normal(cfg["n_units"])
        b = cfg["init_std"] * rng.standard_normal(cfg["n_units"])

    base = {
        "trial": idx,
        "mode": mode,
        "n": n,
        "d": cfg["d"],
        "n_units": cfg["n_units"],
        "status": "excluded" if diverged else "ok",
        "diverged": diverged,
        "steps_run": steps_run,
        "w_norm": math.nan,
        "lip_constant": math.nan,
        "train_loss": math.nan,
        "test_loss": math.nan,
        "test_se": math.nan,
        "eps_hat": math.nan,
        "rhs_eps0": math.nan,
        "rhs_epshat": math.nan,
        "holds_eps0": False,
        "holds_epshat": False,
    }
    if diverged:
        return base

    loss = lossmod.nn_weightshared(a, b)
    w_norm = float(np.linalg.norm(w))
    train_loss = float(lossmod.eval_loss(loss, data.X @ w, data.y).mean())
    pred = model.project_predictor(w)
    f_test, _ = _projected_losses(
        problem, loss, pred, cfg["test_samples"], rngmod.substream(trial_seed, "test")
    )
    test_loss, test_se = _mc_mean(f_test)
    eps_hat = boundsmod.estimate_eps(
        model,
        loss,
        n,
        trials=cfg["eps_trials"],
        seed=rngmod.derive(trial_seed, "eps"),
        delta=cfg["delta"],
        m_pop=cfg["eps_pop"],
    )
    c_w = shared["c_delta"] * w_norm
    ev0 = boundsmod.BoundEvaluation.build(
        test_loss, train_loss, loss.sqrt_lip_sq, c_w, n, 0.0
    )
    ev1 = boundsmod.BoundEvaluation.build(
        test_loss, train_loss, loss.sqrt_lip_sq, c_w, n, eps_hat
    )
    base.update(
        {
            "w_norm": w_norm,
            "lip_constant": math.sqrt(loss.sqrt_lip_sq),
            "train_loss": train_loss,
            "test_loss": test_loss,
            "test_se": test_se,
            "eps_hat": eps_hat,
            "rhs_eps0": ev0.rhs,
            "rhs_epshat": ev1.rhs,
            "holds_eps0": ev0.holds,
            "holds_epshat": ev1.holds,
        }
    )
    return base


def run_nn_bound(config: dict, seed: int, workers: int = 1) -> ExperimentReport:
    cfg = check_config(config, _NN_REQUIRED, _NN_OPTIONAL, "nn_bound")
    if cfg["n_units"] > 16:
        raise SchemaError("nn_bound: n_units must stay <= 16")
    timings, notes = {}, []
    with _Stage(timings, "setup"):
        model = _index_model(cfg, "linear_noise")
        geom = models.geometry(model)
        c_delta = boundsmod.c_delta_l2(
            geom, cfg["delta"], seed=rngmod.derive(seed, "cdelta")
        )

    records = []
    shared = {"c_delta": c_delta}
    with _Stage(timings, "random"):
        args = [
            (cfg, seed, i, shared, "random") for i in range(cfg["trials_random"])
        ]
        records.extend(_pool_map(_nn_trial, args, workers))
    with _Stage(timings, "fitted"):
        args = [
            (cfg, seed, i, shared, "fitted") for i in range(cfg["trials_fitted"])
        ]
        records.extend(_pool_map(_nn_trial, args, workers))
    records.sort(key=lambda r: (r["mode"], r["trial"]))

    modes = {}
    for mode in ("random", "fitted"):
        done = [r for r in records if r["mode"] == mode and r["status"] == "ok"]
        total = sum(r["mode"] == mode for r in records)
        modes[mode] = {
            "hold_frac_eps0": _frac(r["holds_eps0"] for r in done),
            "hold_frac_epshat": _frac(r["holds_epshat"] for r in done),
            "eps_hat_median": _median(r["eps_hat"] for r in done),
            "test_median": _median(r["test_loss"] for r in done),
            "train_median": _median(r["train_loss"] for r in done),
            "completed": len(done),
            "excluded": total - len(done),
        }
    aggregates = {"modes": modes, "c_delta": c_delta}
    return ExperimentReport(
        "nn_bound",
        _clean(cfg),
        int(seed),
        VERSION,
        _clean(records),
        _clean(aggregates),
        timings,
        excluded=sum(r["status"] != "ok" for r in records),
        notes=notes,
    )


# ---------------------------------------------------------------------------
# concentration self-tests

_CONC_REQUIRED = ()
_CONC_OPTIONAL = {
    "trials": 10_000,
    "alpha": 1e-3,
    "norm_dims": (1000,),
    "norm_t": (1.0, 2.0, 3.0, 4.0),
    "rmt_shapes": ((200, 50), (500, 100)),
    "rmt_t": (1.0, 2.0, 3.0),
    "sigmah_covs": (
        {"kind": "bilevel", "d": 1000, "spike_count": 1, "spike_value": 100.0,
         "tail_value": 1.0},
        {"kind": "isotropic", "d": 1000, "scale": 1.0},
    ),
    "sigmah_deltas": (0.1, 0.05, 0.01),
}


def _binom_row(check, p1, p2, t, trials, count, bound, alpha):
    """One-sided test of H0: exceedance probability <= bound."""
    p = min(bound, 1.0)
    critical = int(spstats.binom.ppf(1.0 - alpha, trials, p))
    return {
        "check": check,
        "p1": int(p1),
        "p2": int(p2),
        "t": float(t),
        "trials": int(trials),
        "count": int(count),
        "freq": count / trials,
        "bound": float(bound),
        "critical": critical,
        "passed": bool(count <= critical),
    }


def run_concentration(config: dict, seed: int, workers: int = 1) -> ExperimentReport:
    cfg = check_config(config, _CONC_REQUIRED, _CONC_OPTIONAL, "concentration")
    timings, notes = {}, []
    trials, alpha = cfg["trials"], cfg["alpha"]
    records = []

    with _Stage(timings, "norm_tail"):
        for dim in cfg["norm_dims"]:
            rng = rngmod.substream(seed, f"norm-{dim}")
            norms = np.empty(trials)
            step = max(1, 2_000_000 // dim)
            for lo in range(0, trials, step):
                block = rng.standard_normal((min(step, trials - lo), dim))
                norms[lo : lo + block.shape[0]] = np.linalg.norm(block, axis=1)
            dev = np.abs(norms - math.sqrt(dim))
            for t in cfg["norm_t"]:
                count = int(np.sum(dev >= t))
                bound = 4.0 * math.exp(-t * t / 4.0)
                records.append(
                    _binom_row("norm_tail", dim, 0, t, trials, count, bound, alpha)
                )

    with _Stage(timings, "rmt"):
        for big, small in cfg["rmt_shapes"]:
            rng = rngmod.substream(seed, f"rmt-{big}x{small}")
            smin = np.empty(trials)
            smax = np.empty(trials)
            step = max(1, 4_000_000 // (big * small))
            for lo in range(0, trials, step):
                block = rng.standard_normal((min(step, trials - lo), big, small))
                sv = np.linalg.svd(block, compute_uv=False)
                smin[lo : lo + block.shape[0]] = sv[:, -1]
                smax[lo : lo + block.shape[0]] = sv[:, 0]
            edge_lo = math.sqrt(big) - math.sqrt(small)
            edge_hi = math.sqrt(big) + math.sqrt(small)
            for t in cfg["rmt_t"]:
                bound = 2.0 * math.exp(-t * t / 2.0)
                low = int(np.sum(smin < edge_lo - t))
                high = int(np.sum(smax > edge_hi + t))
                joint = int(np.sum((smin < edge_lo - t) | (smax > edge_hi + t)))
                for check, count in (
                    ("rmt_min", low),
                    ("rmt_max", high),
                    ("rmt_joint", joint),
                ):
                    records.append(
                        _binom_row(check, big, small, t, trials, count, bound, alpha)
                    )

    sigmah = []
    with _Stage(timings, "sigmah"):
        for spec in cfg["sigmah_covs"]:
            cov = _covariance(dict(spec))
            lam = cov.spectrum
            if lam is None:
                lam = np.linalg.eigvalsh(cov.as_matrix())
            rng = rngmod.substream(seed, f"sigmah-{json.dumps(spec, sort_keys=True)}")
            vals = np.empty(trials)
            step = max(1, 2_000_000 // lam.size)
            for lo in range(0, trials, step):
                block = rng.standard_normal((min(step, trials - lo), lam.size))
                vals[lo : lo + block.shape[0]] = (block**2) @ lam
            defect = 1.0 - vals / cov.trace
            for delta in cfg["sigmah_deltas"]:
                quant = float(np.quantile(defect, 1.0 - delta))
                rate = math.log(4.0 / delta) / math.sqrt(cov.eff_rank)
                sigmah.append(
                    {
                        "cov": dict(spec),
                        "delta": delta,
                        "defect_quantile": quant,
                        "rate": rate,
                        "ratio": quant / rate,
                    }
                )
    notes.append(
        "sigmah defect/rate ratios are reported, not asserted: the lemma's"
        " constant is unspecified"
    )

    aggregates = {
        "all_passed": bool(all(r["passed"] for r in records)),
        "sigmah": sigmah,
    }
    return ExperimentReport(
        "concentration",
        _clean(cfg),
        int(seed),
        VERSION,
        _clean(records),
        _clean(aggregates),
        timings,
        excluded=0,
        notes=notes,
    )


DRIVERS = {
    "benign_linear": run_benign_linear,
    "benign_phase": run_benign_phase,
    "benign_relu": run_benign_relu,
    "matrix_sensing": run_matrix_sensing,
    "counterexample": run_counterexample,
    "nn_bound": run_nn_bound,
    "concentration": run_concentration,
}
