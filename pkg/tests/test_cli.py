"""Command-line entry points, exercised in process."""

import json

import numpy as np
import pytest

from interplab import cli


def _write_cfg(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def test_bound_prints_plain_float(capsys):
    rc = cli.main([
        "bound", "--op", "norm_bound_matrix", "--args",
        '{"r": 1, "xstar_fro": 1, "n": 100, "sigma_sq": 1,'
        ' "d1": 10, "d2": 100, "eps_hat": 0}',
    ])
    out = capsys.readouterr().out
    assert rc == 0
    assert out.strip() == "2.0"


def test_bound_dict_result_is_json(capsys):
    rc = cli.main([
        "bound", "--op", "consistency_rhs_matrix", "--args",
        '{"r": 1, "d1": 10, "d2": 100, "n": 1000, "sigma": 1.0,'
        ' "xstar_fro": 1.0}',
    ])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload) >= {"undersampling", "noise_cross", "noise_floor", "total"}


def test_bound_unknown_op_is_schema_error(capsys):
    rc = cli.main(["bound", "--op", "frobnicate"])
    err = capsys.readouterr().err
    assert rc == 2
    assert err.startswith("error: schema:")


def test_bound_bad_argument_name(capsys):
    rc = cli.main(["bound", "--op", "norm_bound_linear", "--args",
                   '{"xi_norm_sq": 1, "trace": 2, "bogus": 3}'])
    assert rc == 2


def test_missing_config_file_is_io_error(tmp_path, capsys):
    rc = cli.main([
        "experiment", "--config", str(tmp_path / "nope.json"), "--seed", "1",
        "--out", str(tmp_path / "o"),
    ])
    err = capsys.readouterr().err
    assert rc == 1
    assert err.startswith("error: io:")


def test_unknown_config_key_names_the_key(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, "c.json", {
        "experiment": "benign_linear",
        "n_grid": [10], "d": 30,
        "covariance": {"kind": "isotropic", "scale": 1.0},
        "noise_std": 1.0, "trials": 1, "typo_key": 5,
    })
    rc = cli.main(["experiment", "--config", cfg, "--seed", "1",
                   "--out", str(tmp_path / "o")])
    err = capsys.readouterr().err
    assert rc == 2
    assert "typo_key" in err


def test_losscheck_writes_passing_audit(tmp_path, capsys):
    rc = cli.main(["losscheck", "--loss", "square",
                   "--out", str(tmp_path)])
    assert rc == 0
    audit = json.loads((tmp_path / "losscheck.json").read_text())
    assert audit["passed"] is True
    assert audit["worst_violation"] <= audit["tolerance"] == 1e-8
    rows = audit["results"]["square"]
    assert rows and all("y" in row for row in rows)


def test_gen_then_fit_round_trip(tmp_path, capsys):
    gen_cfg = _write_cfg(tmp_path, "g.json", {
        "model": {"kind": "multi_index", "d": 40,
                  "covariance": {"kind": "isotropic", "scale": 1.0},
                  "link": "linear_noise", "noise_std": 1.0},
        "n": 12,
    })
    rc = cli.main(["gen", "--config", gen_cfg, "--seed", "3",
                   "--out", str(tmp_path / "data")])
    assert rc == 0
    with np.load(tmp_path / "data" / "dataset.npz") as npz:
        assert npz["X"].shape == (12, 40)
        assert "provenance" in npz.files

    fit_cfg = _write_cfg(tmp_path, "f.json", {
        "solver": "min_norm_linear",
        "data": str(tmp_path / "data" / "dataset.npz"),
    })
    rc = cli.main(["fit", "--config", fit_cfg, "--out", str(tmp_path / "sol")])
    assert rc == 0
    sol = json.loads((tmp_path / "sol" / "solution.json").read_text())
    assert sol["solver"] == "min_norm_linear"
    assert sol["max_residual"] <= 1e-8
    assert len(sol["w"]) == 40


def test_fit_nuclear_on_generated_matrix_data(tmp_path, capsys):
    gen_cfg = _write_cfg(tmp_path, "g.json", {
        "model": {"kind": "matrix_sensing", "d1": 5, "d2": 6, "r": 1,
                  "noise_std": 0.0},
        "n": 40,
    })
    assert cli.main(["gen", "--config", gen_cfg, "--seed", "4",
                     "--out", str(tmp_path / "data")]) == 0
    fit_cfg = _write_cfg(tmp_path, "f.json", {
        "solver": "nuclear_min",
        "data": str(tmp_path / "data" / "dataset.npz"),
    })
    assert cli.main(["fit", "--config", fit_cfg,
                     "--out", str(tmp_path / "sol")]) == 0
    sol = json.loads((tmp_path / "sol" / "solution.json").read_text())
    assert sol["max_residual"] <= 1e-6
    assert np.asarray(sol["x_hat"]).shape == (5, 6)


def test_fit_contradictory_targets_is_numerical_error(tmp_path, capsys):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((4, 10))
    x[3] = x[2]
    y = np.array([0.1, 0.2, 1.0, -1.0])
    np.savez(tmp_path / "bad.npz", X=x, y=y)
    fit_cfg = _write_cfg(tmp_path, "f.json", {
        "solver": "min_norm_linear", "data": str(tmp_path / "bad.npz"),
    })
    rc = cli.main(["fit", "--config", fit_cfg, "--out", str(tmp_path / "sol")])
    err = capsys.readouterr().err
    assert rc == 3
    assert err.startswith("error: numerical:")


TINY_EXPERIMENT = {
    "experiment": "benign_linear",
    "n_grid": [10, 20],
    "d": 80,
    "covariance": {"kind": "isotropic", "scale": 1.0},
    "noise_std": 1.0,
    "trials": 3,
    "eps_pop": 20_000,
}


def test_experiment_outputs_and_determinism(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, "e.json", TINY_EXPERIMENT)
    for sub in ("a", "b"):
        rc = cli.main(["experiment", "--config", cfg, "--seed", "11",
                       "--out", str(tmp_path / sub)])
        assert rc == 0
    assert (tmp_path / "a" / "trials.csv").read_bytes() == (
        tmp_path / "b" / "trials.csv"
    ).read_bytes()
    # wall-clock timings aside, the stored reports agree exactly
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    ra.pop("timings"), rb.pop("timings")
    assert ra == rb
    assert ra["name"] == "benign_linear"
    assert len(ra["records"]) == 6


def test_report_reemits_identical_csv(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, "e.json", TINY_EXPERIMENT)
    assert cli.main(["experiment", "--config", cfg, "--seed", "11",
                     "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["report", "--config", str(tmp_path / "a" / "report.json"),
                     "--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "a" / "trials.csv").read_bytes() == (
        tmp_path / "again" / "trials.csv"
    ).read_bytes()


def test_experiment_plots_flag_writes_svg(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, "e.json", TINY_EXPERIMENT)
    rc = cli.main(["experiment", "--config", cfg, "--seed", "11",
                   "--out", str(tmp_path / "p"), "--plots"])
    assert rc == 0
    svgs = list((tmp_path / "p" / "plots").glob("*.svg"))
    assert svgs


def test_concentration_subcommand_tiny(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, "c.json", {
        "trials": 200, "norm_dims": [100], "norm_t": [3.0],
        "rmt_shapes": [[40, 10]], "rmt_t": [2.0],
        "sigmah_covs": [{"kind": "isotropic", "d": 30, "scale": 1.0}],
        "sigmah_deltas": [0.1],
    })
    rc = cli.main(["concentration", "--config", cfg, "--seed", "2",
                   "--out", str(tmp_path / "o")])
    assert rc == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["name"] == "concentration"
