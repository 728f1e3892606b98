"""Bound calculators: optimistic right-hand sides and empirical constants.

The central object is the optimistic rate for a nonnegative loss whose
square root is sqrt(H)-Lipschitz in the prediction: with probability
1 - delta, uniformly over predictors,

    (1 - eps) * L(w)  <=  ( sqrt(L_hat(w)) + sqrt(H * C_delta(w)^2 / n) )^2,

where C_delta(w) bounds the complexity of w through the covariance left
after projecting out the index directions, and eps collects the
low-dimensional concentration terms.  This module computes such right-hand
sides, Monte Carlo estimates of the C_delta quantiles, and empirical
stand-ins eps_hat / tau_hat measured on the projected problem; it stays
deliberately ignorant of how the predictor was produced.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import losses as lossmod
from . import rng as rngmod
from .models import Covariance, ModelGeometry

DEFAULT_DELTA = 0.05
_EPS_GRID = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0)


# ---------------------------------------------------------------------------
# right-hand sides


def optimistic_rhs(
    train_loss: float,
    sqrt_lip_sq: float,
    c_delta: float,
    n: int,
    eps_hat: float = 0.0,
) -> float:
    """(1 - eps)^{-1} (sqrt(train) + sqrt(H C^2 / n))^2."""
    _check_unit_interval(eps_hat)
    if train_loss < 0 or sqrt_lip_sq < 0 or c_delta < 0 or n < 1:
        raise ValueError("bad bound inputs")
    complexity = sqrt_lip_sq * c_delta**2 / n
    # keep the degenerate cases exact instead of round-tripping through sqrt
    if train_loss == 0.0:
        return complexity / (1.0 - eps_hat)
    if complexity == 0.0:
        return train_loss / (1.0 - eps_hat)
    root = math.sqrt(train_loss) + math.sqrt(complexity)
    return root**2 / (1.0 - eps_hat)


def weighted_optimistic_rhs(
    train_weighted_loss: float, c_tail: float, n: int, eps_hat: float = 0.0
) -> float:
    """(1 - eps)^{-1} (sqrt(weighted train loss) + C_tail / sqrt(n))^2."""
    _check_unit_interval(eps_hat)
    if train_weighted_loss < 0 or c_tail < 0 or n < 1:
        raise ValueError("bad bound inputs")
    root = math.sqrt(train_weighted_loss) + c_tail / math.sqrt(n)
    return root**2 / (1.0 - eps_hat)


def _check_unit_interval(eps_hat: float) -> None:
    if not 0.0 <= eps_hat < 1.0:
        raise ValueError("eps_hat must lie in [0, 1)")


@dataclasses.dataclass(frozen=True)
class BoundEvaluation:
    """One bound instance: population loss against its optimistic RHS."""

    lhs: float
    train_loss: float
    sqrt_lip_sq: float
    c_delta: float
    n: int
    eps_hat: float
    rhs: float
    holds: bool
    slack: float
    tau_hat: float = float("nan")

    @classmethod
    def build(
        cls,
        lhs: float,
        train_loss: float,
        sqrt_lip_sq: float,
        c_delta: float,
        n: int,
        eps_hat: float = 0.0,
        tau_hat: float = float("nan"),
    ) -> "BoundEvaluation":
        rhs = optimistic_rhs(train_loss, sqrt_lip_sq, c_delta, n, eps_hat)
        return cls(
            lhs=float(lhs),
            train_loss=float(train_loss),
            sqrt_lip_sq=float(sqrt_lip_sq),
            c_delta=float(c_delta),
            n=int(n),
            eps_hat=float(eps_hat),
            rhs=float(rhs),
            holds=bool(lhs <= rhs),
            slack=float(rhs - lhs),
            tau_hat=float(tau_hat),
        )

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# complexity quantiles


def c_delta_l2(
    sigma_perp, delta: float = DEFAULT_DELTA, m: int | None = None, seed: int = 0
) -> float:
    """Empirical (1 - delta/4)-quantile of ||z||_2, z ~ N(0, S_perp).

    Multiplied by ||w||_2 this dominates the projected complexity of any
    fixed-norm predictor with the advertised confidence.  Accepts a
    ModelGeometry, a Covariance, a 1-D spectrum, or a small dense matrix.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    geom = _as_geometry(sigma_perp)
    if m is None:
        m = max(100_000, int(math.ceil(100.0 / delta)))
    if m < math.ceil(100.0 / delta):
        raise ValueError("m is too small to resolve the requested quantile")
    norms_sq = geom.sample_perp_norm_sq(m, rngmod.substream(seed, "c-delta-l2"))
    return float(np.quantile(np.sqrt(norms_sq), 1.0 - delta / 4.0))


def _as_geometry(sigma_perp) -> ModelGeometry:
    if isinstance(sigma_perp, ModelGeometry):
        return sigma_perp
    if isinstance(sigma_perp, Covariance):
        cov = sigma_perp
    else:
        arr = np.asarray(sigma_perp, dtype=float)
        cov = Covariance(spectrum=arr) if arr.ndim == 1 else Covariance(dense=arr)
    return ModelGeometry.from_parts(cov, np.zeros((cov.d, 0)))


def c_delta_nuclear(d1: int, d2: int, delta: float = DEFAULT_DELTA) -> float:
    """Deterministic complexity constant for nuclear-norm predictors.

    sqrt(d1) + sqrt(d2) + sqrt(8 log(32/delta)); multiplied by ||X||_* it
    plays the role the l2 quantile plays for vector predictors.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if d1 < 1 or d2 < 1:
        raise ValueError("need d1, d2 >= 1")
    return math.sqrt(d1) + math.sqrt(d2) + math.sqrt(8.0 * math.log(32.0 / delta))


# ---------------------------------------------------------------------------
# norm predictions for specific interpolants


def norm_bound_linear(xi_norm_sq: float, trace: float, eps_hat: float = 0.0) -> float:
    """(1 + eps) ||xi||^2 / tr(S): squared-norm cost of interpolating noise."""
    if xi_norm_sq < 0 or trace <= 0:
        raise ValueError("need xi_norm_sq >= 0 and trace > 0")
    return (1.0 + eps_hat) * xi_norm_sq / trace


def norm_bound_phase(
    w_sharp_norm: float,
    pop_loss: float,
    n: int,
    trace_perp: float,
    eps_hat: float = 0.0,
) -> float:
    """||w#|| + (1 + eps) sqrt(n L / tr(S_perp)) for magnitude interpolation."""
    if w_sharp_norm < 0 or pop_loss < 0 or n < 1 or trace_perp <= 0:
        raise ValueError("bad norm-bound inputs")
    return w_sharp_norm + (1.0 + eps_hat) * math.sqrt(n * pop_loss / trace_perp)


def norm_bound_matrix(
    r: int,
    xstar_fro: float,
    n: int,
    sigma_sq: float,
    d1: int,
    d2: int,
    eps_hat: float = 0.0,
) -> float:
    """sqrt(r) ||X*||_F + (1 + eps) sqrt(n sigma^2 / max(d1, d2))."""
    if r < 1 or xstar_fro < 0 or n < 1 or sigma_sq < 0 or d1 < 1 or d2 < 1:
        raise ValueError("bad norm-bound inputs")
    return math.sqrt(r) * xstar_fro + (1.0 + eps_hat) * math.sqrt(
        n * sigma_sq / max(d1, d2)
    )


def consistency_rhs_matrix(
    r: int, d1: int, d2: int, n: int, sigma: float, xstar_fro: float
) -> dict:
    """Unconstanted consistency rate for noisy nuclear-norm interpolation.

    Returns the three terms of the relative-error rate (dimensions are
    normalized so d1 <= d2) and their sum; callers compare the measured
    relative excess loss against a small multiple of the total.
    """
    if r < 1 or d1 < 1 or d2 < 1 or n < 1 or sigma < 0 or xstar_fro <= 0:
        raise ValueError("bad consistency inputs")
    if d1 > d2:
        d1, d2 = d2, d1
    snr = sigma / xstar_fro
    base = r * (d1 + d2) / n
    terms = {
        "undersampling": base,
        "noise_cross": math.sqrt(base) * snr,
        "noise_floor": (math.sqrt(d1 / d2) + n / (d1 * d2)) * snr**2,
    }
    terms["total"] = sum(terms.values())
    return terms


def nn_complexity(a, b, w_norm: float) -> float:
    """Complexity of a ramp network: largest |prefix sum of a| times ||w||."""
    if w_norm < 0:
        raise ValueError("w_norm must be nonnegative")
    return lossmod.nn_lip_constant(a, b) * w_norm


# ---------------------------------------------------------------------------
# closed forms of the lambda trade-offs

# These are the two scalar optimizations that turn envelope inequalities
# into square-root bounds; tests confirm them against brute maximization.


def lambda_tradeoff_envelope(a: float, b: float, h: float) -> float:
    """sup_{lam >= 0} [-lam a + lam b / (h + lam)] = (sqrt(b) - sqrt(h a))_+^2."""
    if a <= 0 or b <= 0 or h <= 0:
        raise ValueError("need positive a, b, h")
    return max(math.sqrt(b) - math.sqrt(h * a), 0.0) ** 2


def lambda_tradeoff_penalty(a: float, b: float) -> float:
    """sup_{lam > 0} [-lam a - b / lam] = -2 sqrt(a b)."""
    if a < 0 or b < 0:
        raise ValueError("need nonnegative a, b")
    return -2.0 * math.sqrt(a * b)


# ---------------------------------------------------------------------------
# empirical concentration constants


def estimate_eps(
    model_or_problem,
    loss: lossmod.LossSpec,
    n: int,
    trials: int = 200,
    seed: int = 0,
    delta: float = DEFAULT_DELTA,
    grid_vals: tuple = _EPS_GRID,
    m_pop: int = 100_000,
) -> float:
    """Empirical uniform-concentration defect of the projected problem.

    For each of `trials` fresh n-sample datasets of the (k+1)-dimensional
    projected problem, measures the worst relative underestimate
    1 - L_hat(v) / L(v) over a grid of projected predictors v (population
    losses are Monte Carlo with m_pop shared draws), then returns the
    (1 - delta)-quantile over trials, clipped to [0, 1).  When the problem
    carries per-sample weights the losses are weighted accordingly.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials for a stable quantile")
    problem = _as_problem(model_or_problem)
    k = problem.k
    grid = _predictor_grid(k, grid_vals)

    pop = _grid_losses(problem, loss, grid, m_pop, rngmod.substream(seed, "eps-pop"))
    valid = pop > 1e-12
    if not valid.any():
        raise ValueError("all grid predictors have zero population loss")

    stats = np.empty(trials)
    for t in range(trials):
        rng = rngmod.substream(seed, f"eps-trial-{t}")
        emp = _grid_losses(problem, loss, grid, n, rng)
        stats[t] = float(np.max(1.0 - emp[valid] / pop[valid]))
    q = float(np.quantile(stats, 1.0 - delta))
    return float(np.clip(q, 0.0, np.nextafter(1.0, 0.0)))


def estimate_tau(
    loss: lossmod.LossSpec,
    model_or_problem,
    predictor_grid,
    m: int = 100_000,
    seed: int = 0,
) -> float:
    """Hypercontractivity ratio max over predictors of E[f^4]^{1/4} / E[f].

    predictor_grid rows are (k+1)-vectors: standardized index coefficients
    followed by the perpendicular-channel coefficient.
    """
    if m < 10_000:
        raise ValueError("need m >= 10000 draws")
    problem = _as_problem(model_or_problem)
    grid = np.atleast_2d(np.asarray(predictor_grid, dtype=float))
    if grid.shape[1] != problem.k + 1:
        raise ValueError("predictor rows must have k+1 entries")
    vals = _grid_losses(
        problem, loss, grid, m, rngmod.substream(seed, "tau"), moments=True
    )
    mean, mean4 = vals
    ratios = mean4 ** 0.25 / np.where(mean > 0, mean, np.nan)
    ratios = ratios[np.isfinite(ratios)]
    if ratios.size == 0:
        raise ValueError("no predictor in the grid has positive mean loss")
    return float(np.max(ratios))


def _as_problem(model_or_problem):
    if hasattr(model_or_problem, "projected_problem"):
        return model_or_problem.projected_problem()
    return model_or_problem


def _predictor_grid(k: int, grid_vals) -> np.ndarray:
    axes = [np.asarray(grid_vals, dtype=float)] * (k + 1)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _grid_losses(problem, loss, grid, n, rng, moments: bool = False):
    """Mean loss (optionally also the 4th moment) per grid predictor."""
    sample = problem.sample(n, rng)
    g_perp = rng.standard_normal(n)
    k = problem.k
    perp_gain = sample.perp_scale * g_perp
    mean = np.empty(grid.shape[0])
    mean4 = np.empty(grid.shape[0])
    step = max(1, 20_000_000 // max(n, 1))
    for lo in range(0, grid.shape[0], step):
        part = grid[lo : lo + step]
        preds = perp_gain[:, None] * part[:, k]
        if k:
            preds = preds + sample.gz @ part[:, :k].T
        f = lossmod.eval_loss(loss, preds, sample.y[:, None])
        if sample.weights is not None:
            f = f / sample.weights[:, None]
        mean[lo : lo + step] = f.mean(axis=0)
        mean4[lo : lo + step] = (f**4).mean(axis=0)
    if moments:
        return mean, mean4
    return mean
