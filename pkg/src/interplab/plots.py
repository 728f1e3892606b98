"""Optional SVG rendering of experiment reports."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def render(report, out_dir) -> list:
    """Write the plots this report supports; returns the created paths."""
    agg = report.aggregates
    jobs = []
    if agg.get("per_n"):
        jobs.append(("bound_vs_loss.svg", _bound_vs_loss, agg["per_n"]))
    if "moments" in agg:
        jobs.append(("moment_gap.svg", _moment_gap, agg["moments"]))
    if not jobs:
        return []
    os.makedirs(out_dir, exist_ok=True)
    made = []
    for fname, fn, payload in jobs:
        path = os.path.join(out_dir, fname)
        fn(report.name, payload, path)
        made.append(path)
    return made


def _bound_vs_loss(name, per_n, path):
    ns = [row["n"] for row in per_n]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for key, label, style in (
        ("lhs_median", "test loss (median)", "o-"),
        ("rhs_eps0_median", "bound at eps = 0", "s--"),
        ("rhs_epshat_median", "bound at measured eps", "d:"),
    ):
        vals = [row.get(key) for row in per_n]
        if all(v is not None for v in vals):
            ax.plot(ns, vals, style, label=label)
    ax.set_xlabel("sample size n")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.set_title(name)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _moment_gap(name, moments, path):
    labels = ["fourth moment", "squared second moment"]
    heights = [moments["m4"], moments["m2_sq"]]
    errs = [moments["m4_se"], moments["m2_sq_se"]]
    fig, ax = plt.subplots(figsize=(4.0, 3.4))
    ax.bar(labels, heights, yerr=errs, capsize=4, color=["#4878d0", "#ee854a"])
    ax.set_ylabel("value")
    ax.set_title(
        f"{name}: gap = {moments['gap']:.3f} "
        f"({moments['gap'] / moments['gap_se']:.0f} SEs)"
    )
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
