"""Command-line entry point.

One strict-JSON-config front end over the samplers, solvers, bound
calculators, and experiment drivers.  Exit codes: 0 success, 1 I/O
failure, 2 config/schema violation, 3 numerical failure; every failure
prints a single ``error: <category>: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import inspect
import json
import os
import sys

import numpy as np

from . import bounds as boundsmod
from . import harness
from . import interpolants
from . import losses as lossmod
from . import models
from .errors import InfeasibleError, NumericalError, SchemaError

_ENVELOPE_TOL = 1e-8

_BOUND_OPS = {
    name: getattr(boundsmod, name)
    for name in (
        "optimistic_rhs",
        "weighted_optimistic_rhs",
        "norm_bound_linear",
        "norm_bound_phase",
        "norm_bound_matrix",
        "consistency_rhs_matrix",
        "c_delta_nuclear",
        "lambda_tradeoff_envelope",
        "lambda_tradeoff_penalty",
        "nn_complexity",
    )
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (SchemaError, ValueError) as exc:
        print(f"error: schema: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, InfeasibleError) as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="interplab",
        description="interpolation-bound laboratory: generators, solvers,"
        " bound calculators, and experiment suites",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, seed_required=False):
        p.add_argument("--config", help="path to a JSON config")
        p.add_argument(
            "--seed",
            type=int,
            required=seed_required,
            help="64-bit master seed",
        )
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.add_argument("--plots", action="store_true", help="emit SVG plots")

    p = sub.add_parser("losscheck", help="grid-check envelope inequalities")
    p.add_argument("--loss", default="all", help="catalog loss name, or 'all'")
    common(p)
    p.set_defaults(fn=_cmd_losscheck)

    p = sub.add_parser("gen", help="draw a dataset from a model spec")
    common(p, seed_required=True)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("fit", help="run an interpolation solver on a dataset")
    common(p)
    p.set_defaults(fn=_cmd_fit)

    p = sub.add_parser("bound", help="evaluate one bound calculator")
    p.add_argument("--op", required=True, help="bound operation name")
    p.add_argument("--args", default="{}", help="JSON object of arguments")
    common(p)
    p.set_defaults(fn=_cmd_bound)

    p = sub.add_parser("experiment", help="run a named experiment driver")
    common(p, seed_required=True)
    p.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("concentration", help="run the concentration self-tests")
    common(p, seed_required=True)
    p.set_defaults(fn=_cmd_concentration)

    p = sub.add_parser("report", help="re-emit CSV/plots from a stored report")
    common(p)
    p.set_defaults(fn=_cmd_report)

    return parser


def _load_config(args, default=None) -> dict:
    if args.config is None:
        if default is not None:
            return dict(default)
        raise SchemaError(f"{args.subcommand}: --config is required")
    with open(args.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise SchemaError(f"{args.subcommand}: config must be a JSON object")
    return cfg


def _provenance(args, config) -> dict:
    return {
        "version": harness.VERSION,
        "seed": int(args.seed) if args.seed is not None else None,
        "config": config,
    }


def _write_json(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_losscheck(args) -> int:
    entries = lossmod.catalog()
    if args.loss != "all":
        if args.loss not in entries:
            raise SchemaError(f"unknown catalog loss {args.loss!r}")
        entries = {args.loss: entries[args.loss]}
    lambdas = np.linspace(0.1, 10.0, 100)
    grid = np.arange(-10.0, 10.0 + 1e-12, 0.05)
    results = {}
    worst = -float("inf")
    for name, spec in entries.items():
        per_label = []
        for y in lossmod.CHECK_LABELS[name]:
            checks = lossmod.check_envelope_inequalities(spec, lambdas, grid, y)
            per_label.append({"y": y, **checks})
            vals = [v for v in checks.values() if v is not None]
            worst = max(worst, max(vals))
        results[name] = per_label
        print(f"losscheck {name}: ok")
    passed = worst <= _ENVELOPE_TOL
    payload = _provenance(args, {"loss": args.loss})
    payload.update(
        {
            "name": "losscheck",
            "tolerance": _ENVELOPE_TOL,
            "worst_violation": worst,
            "passed": passed,
            "results": results,
        }
    )
    _write_json(os.path.join(args.out, "losscheck.json"), payload)
    if not passed:
        raise NumericalError(f"envelope violation {worst:.3e} > {_ENVELOPE_TOL}")
    return 0


_GEN_MODELS = ("multi_index", "counterexample", "matrix_sensing")


def _cmd_gen(args) -> int:
    cfg = _load_config(args)
    cfg = harness.check_config(cfg, ("model", "n"), {}, "gen")
    spec = dict(cfg["model"])
    kind = spec.pop("kind", None)
    if kind not in _GEN_MODELS:
        raise SchemaError(f"gen: model kind must be one of {_GEN_MODELS}")
    n, seed = int(cfg["n"]), int(args.seed)
    if kind == "multi_index":
        spec = harness.check_config(
            spec,
            ("d", "covariance", "link", "noise_std"),
            {"signal_scale": 0.0, "offset": 0.0},
            "gen.model",
        )
        d, scale = spec["d"], float(spec["signal_scale"])
        w_col = np.zeros((d, 0)) if scale == 0.0 else scale * np.eye(d, 1)
        model = models.MultiIndexModel(
            mu=np.zeros(d),
            sigma=harness._covariance(spec["covariance"], d),
            W=w_col,
            link=spec["link"],
            noise=models.gaussian_noise(spec["noise_std"]),
            offset=spec["offset"],
        )
        data = models.sample(model, n, seed)
        arrays = {"X": data.X, "y": data.y}
    elif kind == "counterexample":
        spec = harness.check_config(spec, ("d", "tail"), {}, "gen.model")
        cmodel = harness._counter_model(spec)
        data = models.sample_counterexample(cmodel, n, seed)
        arrays = {"X": data.X, "y": data.y, "weights": data.weights}
    else:
        spec = harness.check_config(
            spec,
            ("d1", "d2", "r", "noise_std"),
            {"x_star_scale": 1.0},
            "gen.model",
        )
        inst = models.sample_matrix_sensing(
            spec["d1"], spec["d2"], spec["r"], n, spec["noise_std"],
            spec["x_star_scale"], seed,
        )
        arrays = {"a_ops": inst.a_ops, "y": inst.y, "x_star": inst.x_star}
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "dataset.npz")
    np.savez(
        path,
        provenance=json.dumps(_provenance(args, cfg), sort_keys=True),
        **arrays,
    )
    print(f"gen: wrote {path} ({n} samples, kind={kind})")
    return 0


_FIT_SOLVERS = (
    "min_norm_linear",
    "phase_construct",
    "phase_brute",
    "relu_construct",
    "nuclear_min",
)


def _cmd_fit(args) -> int:
    cfg = _load_config(args)
    cfg = harness.check_config(cfg, ("solver", "data"), {"args": {}}, "fit")
    solver, extra = cfg["solver"], dict(cfg["args"])
    if solver not in _FIT_SOLVERS:
        raise SchemaError(f"fit: solver must be one of {_FIT_SOLVERS}")
    with np.load(cfg["data"]) as npz:
        arrays = {k: npz[k] for k in npz.files}

    if solver == "min_norm_linear":
        extra = harness.check_config(extra, (), {}, "fit.args")
        sol = interpolants.min_norm_linear(arrays["X"], arrays["y"])
    elif solver == "phase_construct":
        extra = harness.check_config(extra, ("w_sharp",), {}, "fit.args")
        sol = interpolants.phase_construct(
            arrays["X"], arrays["y"], np.asarray(extra["w_sharp"], dtype=float)
        )
    elif solver == "phase_brute":
        extra = harness.check_config(extra, (), {}, "fit.args")
        sol = interpolants.phase_brute(arrays["X"], arrays["y"])
    elif solver == "relu_construct":
        extra = harness.check_config(
            extra, ("w_sharp", "b_sharp"), {"zero_mode": "relaxed"}, "fit.args"
        )
        sol = interpolants.relu_construct(
            arrays["X"],
            arrays["y"],
            np.asarray(extra["w_sharp"], dtype=float),
            extra["b_sharp"],
            zero_mode=extra["zero_mode"],
        )
    else:
        extra = harness.check_config(
            extra,
            (),
            {"rho": 1.0, "max_iter": 5000, "feas_tol": 1e-6},
            "fit.args",
        )
        sol = interpolants.nuclear_min(
            arrays["a_ops"],
            arrays["y"],
            rho=extra["rho"],
            max_iter=extra["max_iter"],
            feas_tol=extra["feas_tol"],
        )

    payload = _provenance(args, cfg)
    payload.update(
        {
            "name": "fit",
            "solver": solver,
            "kind": sol.kind,
            "norm": sol.norm,
            "max_residual": sol.max_residual,
            "iterations": sol.iterations,
        }
    )
    if sol.w is not None:
        payload["w"] = [float(v) for v in sol.w]
    if sol.x_hat is not None:
        payload["x_hat"] = [[float(v) for v in row] for row in sol.x_hat]
    path = os.path.join(args.out, "solution.json")
    _write_json(path, payload)
    print(f"fit {solver}: norm={sol.norm:.6g} max_residual={sol.max_residual:.3e}")
    return 0


def _cmd_bound(args) -> int:
    if args.op not in _BOUND_OPS:
        raise SchemaError(f"unknown bound op {args.op!r}")
    fn = _BOUND_OPS[args.op]
    try:
        kwargs = json.loads(args.args)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"--args is not valid JSON: {exc}") from exc
    if not isinstance(kwargs, dict):
        raise SchemaError("--args must be a JSON object")
    try:
        inspect.signature(fn).bind(**kwargs)
    except TypeError as exc:
        raise SchemaError(f"{args.op}: {exc}") from exc
    result = fn(**kwargs)
    if isinstance(result, dict):
        print(json.dumps(result))
    else:
        print(repr(float(result)))
    return 0


def _cmd_experiment(args) -> int:
    cfg = _load_config(args)
    name = cfg.pop("experiment", None)
    if name not in harness.DRIVERS:
        raise SchemaError(
            f"config must name an 'experiment' in {sorted(harness.DRIVERS)}"
        )
    report = harness.DRIVERS[name](cfg, int(args.seed), workers=args.workers)
    paths = harness.write_report(report, args.out, plots=args.plots)
    print(
        f"{name}: {len(report.records)} records"
        f" ({report.excluded} excluded) -> {paths['csv']}"
    )
    return 0


def _cmd_concentration(args) -> int:
    cfg = _load_config(args, default={})
    report = harness.run_concentration(cfg, int(args.seed), workers=args.workers)
    paths = harness.write_report(report, args.out, plots=args.plots)
    ok = report.aggregates["all_passed"]
    print(f"concentration: all_passed={ok} -> {paths['csv']}")
    if not ok:
        raise NumericalError("a concentration tail exceeded its bound")
    return 0


def _cmd_report(args) -> int:
    stored = _load_config(args)
    required = (
        "name",
        "version",
        "seed",
        "config",
        "timings",
        "excluded",
        "notes",
        "aggregates",
        "records",
    )
    stored = harness.check_config(stored, required, {}, "report")
    report = harness.ExperimentReport(
        name=stored["name"],
        config=stored["config"],
        seed=stored["seed"],
        version=stored["version"],
        records=stored["records"],
        aggregates=stored["aggregates"],
        timings=stored["timings"],
        excluded=stored["excluded"],
        notes=stored["notes"],
    )
    paths = harness.write_report(report, args.out, plots=args.plots)
    print(f"report {report.name}: -> {paths['csv']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
