"""Loss catalog with square-root-Lipschitz constants and Moreau envelopes.

Every loss here is a nonnegative function f(yhat, y) of a scalar prediction.
The regularity that matters downstream is not Lipschitzness of f but of
sqrt(f): each spec declares the constant H such that sqrt(f) is
sqrt(H)-Lipschitz in yhat.  The Moreau envelope

    f_lam(x) = inf_u  f(u) + lam * (u - x)^2

is the workhorse for checking those declarations: sqrt(H)-Lipschitzness of
sqrt(f) is equivalent to f_lam >= (lam / (lam + H)) * f for all lam >= 0, and
an M-Lipschitz f satisfies f_lam >= f - M^2 / (4 lam).  Both inequalities are
machine-checked on grids by `check_envelope_inequalities`.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np

GRID_POINTS = 1024      # bracket grid resolution for the numeric envelope
REFINE_WIDTH = 1e-10    # golden-section terminates at this bracket width
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

_CLOSED_FORM_KINDS = frozenset(
    {"square", "squared_hinge", "phase_retrieval", "relu_interp"}
)


@dataclasses.dataclass(frozen=True)
class LossSpec:
    """A nonnegative loss with declared regularity constants.

    sqrt_lip_sq is H with sqrt(f) being sqrt(H)-Lipschitz in yhat.  lip is a
    label-uniform Lipschitz constant of f itself when finite (rare: most
    catalog losses grow quadratically; see `lip_for` for per-label constants).
    smooth bounds the second derivative for losses with continuous f'.
    """

    kind: str
    params: dict
    sqrt_lip_sq: float
    lip: float | None = None
    smooth: float | None = None


# ---------------------------------------------------------------------------
# constructors


def square() -> LossSpec:
    """f(yhat, y) = (yhat - y)^2."""
    return LossSpec("square", {}, sqrt_lip_sq=1.0, smooth=2.0)


def squared_hinge() -> LossSpec:
    """f(yhat, y) = max(1 - yhat*y, 0)^2 with labels y in {-1, +1}."""
    return LossSpec("squared_hinge", {}, sqrt_lip_sq=1.0, smooth=2.0)


def phase_retrieval() -> LossSpec:
    """f(yhat, y) = (|yhat| - y)^2 with labels y >= 0."""
    return LossSpec("phase_retrieval", {}, sqrt_lip_sq=1.0)


def relu_interp() -> LossSpec:
    """ReLU interpolation loss: (yhat - y)^2 if y > 0, else relu(yhat)^2.

    Labels are y >= 0 and the y == 0 branch is matched exactly, so a zero
    label asks only for a nonpositive pre-activation.
    """
    return LossSpec("relu_interp", {}, sqrt_lip_sq=1.0, smooth=2.0)


def sigma_square(activation: str = "relu") -> LossSpec:
    """f(yhat, y) = (act(yhat) - y)^2 for a 1-Lipschitz activation."""
    _check_activation(activation)
    smooth = 2.0 if activation == "identity" else None
    return LossSpec(
        "sigma_square", {"activation": activation}, sqrt_lip_sq=1.0, smooth=smooth
    )


def sigma_hinge(activation: str = "relu") -> LossSpec:
    """f(yhat, y) = max(1 - act(yhat)*y, 0)^2, labels in {-1, +1}."""
    _check_activation(activation)
    smooth = 2.0 if activation == "identity" else None
    return LossSpec(
        "sigma_hinge", {"activation": activation}, sqrt_lip_sq=1.0, smooth=smooth
    )


def weighted(inner: LossSpec, weights, weight_floor: float | None = None) -> LossSpec:
    """Per-sample reweighting f(yhat, y) = inner(yhat, y) / w.

    `weights` holds one positive weight per sample, aligned positionally with
    the predictions the loss will be evaluated on (samplers supply them at
    generation time).  The declared H divides by the smallest weight, which
    is the uniform constant over the sample set.
    """
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if w.size == 0 or np.any(w <= 0):
        raise ValueError("weights must be positive and nonempty")
    floor = float(w.min()) if weight_floor is None else float(weight_floor)
    if floor <= 0 or w.min() < floor - 1e-12:
        raise ValueError("weight_floor must be positive and below all weights")
    return LossSpec(
        "weighted",
        {"inner": inner, "weights": w, "weight_floor": floor},
        sqrt_lip_sq=inner.sqrt_lip_sq / floor,
    )


def nn_weightshared(a, b) -> LossSpec:
    """Squared loss of a width-N ramp network: (sum_i a_i relu(u - b_i) - y)^2.

    The network is piecewise linear in u with slope equal to a prefix sum of
    the (b-sorted) outer weights, so sqrt(f) is Lipschitz with the largest
    absolute prefix sum and H is its square.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size or a.size == 0:
        raise ValueError("a and b must be nonempty and of equal length")
    return LossSpec(
        "nn_weightshared", {"a": a, "b": b}, sqrt_lip_sq=nn_lip_constant(a, b) ** 2
    )


def custom(
    fn: Callable,
    sqrt_lip_sq: float,
    lip: float | None = None,
    smooth: float | None = None,
    inf_fn: Callable | None = None,
) -> LossSpec:
    """Wrap a vectorized callable fn(yhat, y) as a loss spec.

    Not part of the shipped catalog (and not reachable from JSON configs);
    exists so estimators and tests can probe the machinery with ad-hoc
    losses.  inf_fn(y), if given, supplies the lam = 0 envelope.
    """
    params = {"fn": fn, "inf_fn": inf_fn}
    return LossSpec("custom", params, sqrt_lip_sq, lip=lip, smooth=smooth)


def nn_lip_constant(a, b) -> float:
    """max_j |a_1 + ... + a_j| after sorting units by ascending threshold b."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    order = np.argsort(b, kind="stable")
    return float(np.abs(np.cumsum(a[order])).max())


def catalog() -> dict[str, LossSpec]:
    """Shipped losses, keyed by a name that pins activation variants."""
    return {
        "square": square(),
        "squared_hinge": squared_hinge(),
        "phase_retrieval": phase_retrieval(),
        "relu_interp": relu_interp(),
        "sigma_square_relu": sigma_square("relu"),
        "sigma_square_identity": sigma_square("identity"),
        "sigma_hinge_relu": sigma_hinge("relu"),
        "sigma_hinge_identity": sigma_hinge("identity"),
        "nn_weightshared": nn_weightshared([1.0, -1.0], [0.0, 1.0]),
        "weighted": weighted(square(), [4.0]),
    }


#: labels used when sweeping a catalog entry over a prediction grid
CHECK_LABELS: dict[str, tuple[float, ...]] = {
    "square": (0.0, 1.5),
    "squared_hinge": (-1.0, 1.0),
    "phase_retrieval": (0.0, 1.0, 2.5),
    "relu_interp": (0.0, 1.7),
    "sigma_square_relu": (-1.2, 0.8),
    "sigma_square_identity": (0.0, 1.5),
    "sigma_hinge_relu": (-1.0, 1.0),
    "sigma_hinge_identity": (-1.0, 1.0),
    "nn_weightshared": (0.0, 0.9),
    "weighted": (0.0, 1.5),
}


def _check_activation(activation: str) -> None:
    if activation not in ("relu", "identity"):
        raise ValueError(f"unknown activation {activation!r}")


def _act(name: str, x):
    return np.maximum(x, 0.0) if name == "relu" else x


# ---------------------------------------------------------------------------
# evaluation


def eval_loss(loss: LossSpec, yhat, y):
    """Vectorized loss value; yhat and y broadcast."""
    yhat = np.asarray(yhat, dtype=float)
    y = np.asarray(y, dtype=float)
    kind = loss.kind
    if kind == "square":
        return (yhat - y) ** 2
    if kind == "squared_hinge":
        _check_pm1(y)
        return np.maximum(1.0 - yhat * y, 0.0) ** 2
    if kind == "phase_retrieval":
        _check_nonneg(y)
        return (np.abs(yhat) - y) ** 2
    if kind == "relu_interp":
        _check_nonneg(y)
        return np.where(y > 0, (yhat - y) ** 2, np.maximum(yhat, 0.0) ** 2)
    if kind == "sigma_square":
        return (_act(loss.params["activation"], yhat) - y) ** 2
    if kind == "sigma_hinge":
        _check_pm1(y)
        s = _act(loss.params["activation"], yhat)
        return np.maximum(1.0 - s * y, 0.0) ** 2
    if kind == "weighted":
        inner = eval_loss(loss.params["inner"], yhat, y)
        return inner / loss.params["weights"]
    if kind == "nn_weightshared":
        return (_nn_forward(loss.params["a"], loss.params["b"], yhat) - y) ** 2
    if kind == "custom":
        return np.asarray(loss.params["fn"](yhat, y), dtype=float)
    raise ValueError(f"unknown loss kind {kind!r}")


def _nn_forward(a, b, u):
    u = np.asarray(u, dtype=float)
    return np.maximum(u[..., None] - b, 0.0) @ a


def _check_pm1(y) -> None:
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("hinge labels must be exactly -1 or +1")


def _check_nonneg(y) -> None:
    if np.any(y < 0):
        raise ValueError("labels must be nonnegative for this loss")


def lip_for(loss: LossSpec, y) -> float | None:
    """Lipschitz constant of f(., y) in yhat for this label, None if infinite.

    The only catalog case with a finite constant is sigma_hinge(relu) at
    y = +1, where the loss is capped at 1 and the steepest slope is 2.
    """
    if loss.lip is not None:
        return loss.lip
    if loss.kind == "sigma_hinge" and loss.params["activation"] == "relu":
        if np.all(np.asarray(y) == 1.0):
            return 2.0
    if loss.kind == "weighted":
        inner = lip_for(loss.params["inner"], y)
        if inner is not None:
            return inner / loss.params["weight_floor"]
    return None


def sqrtlip_from_smooth(smooth: float) -> float:
    """H for sqrt(f) from an H_s-smoothness bound on nonnegative f: H_s / 2."""
    if smooth < 0:
        raise ValueError("smoothness constant must be nonnegative")
    return smooth / 2.0


# ---------------------------------------------------------------------------
# Moreau envelope


def moreau_envelope(loss: LossSpec, lam, yhat, y, method: str = "auto"):
    """Envelope value inf_u f(u, y) + lam * (u - yhat)^2, elementwise.

    lam, yhat and y broadcast.  lam = 0 returns the global infimum of
    f(., y).  method selects the route: "closed" insists on an analytic
    form (square family, phase, relu branches, and weighted reductions of
    those), "numeric" forces the bracketed grid-plus-golden-section search,
    "auto" prefers closed and falls back to numeric.
    """
    if loss.kind == "weighted":
        # Scaling reduction: (f/w)_lam = f_{w lam} / w, exact on either route.
        w = loss.params["weights"]
        inner = moreau_envelope(
            loss.params["inner"], np.asarray(lam, dtype=float) * w, yhat, y, method
        )
        return inner / w
    lam_b, yhat_b, y_b = np.broadcast_arrays(
        np.asarray(lam, dtype=float),
        np.asarray(yhat, dtype=float),
        np.asarray(y, dtype=float),
    )
    if np.any(lam_b < 0):
        raise ValueError("lam must be nonnegative")
    if method not in ("auto", "closed", "numeric"):
        raise ValueError(f"unknown method {method!r}")

    out = np.empty(lam_b.shape, dtype=float)
    zero = lam_b == 0
    if zero.any():
        out[zero] = np.broadcast_to(_global_inf(loss, y_b), lam_b.shape)[zero]
    pos = ~zero
    if pos.any():
        lam_p, yhat_p, y_p = lam_b[pos], yhat_b[pos], y_b[pos]
        if method != "numeric" and _has_closed_form(loss):
            vals = _closed_envelope(loss, lam_p, yhat_p, y_p)
        elif method == "closed":
            raise ValueError(f"no closed-form envelope for kind {loss.kind!r}")
        else:
            vals = _numeric_envelope(loss, lam_p, yhat_p, y_p)
        out[pos] = vals
    return out if out.shape else float(out)


def _has_closed_form(loss: LossSpec) -> bool:
    if loss.kind in _CLOSED_FORM_KINDS:
        return True
    if loss.kind in ("sigma_square", "sigma_hinge"):
        return loss.params["activation"] == "identity"
    if loss.kind == "weighted":
        return _has_closed_form(loss.params["inner"])
    return False


def _closed_envelope(loss: LossSpec, lam, yhat, y):
    # All closed-form kinds have H = 1 and envelope lam/(lam+1) * f; for the
    # piecewise ones this holds branchwise because the active parabola at the
    # infimum is the one containing yhat's branch.
    if loss.kind in ("sigma_square", "sigma_hinge"):
        base = square() if loss.kind == "sigma_square" else squared_hinge()
        return _closed_envelope(base, lam, yhat, y)
    return lam / (lam + 1.0) * eval_loss(loss, yhat, y)


def _global_inf(loss: LossSpec, y):
    """inf_u f(u, y) as a function of the label."""
    y = np.asarray(y, dtype=float)
    kind = loss.kind
    if kind in ("square", "squared_hinge", "phase_retrieval", "relu_interp"):
        eval_loss(loss, 0.0, y)  # label validation only
        return np.zeros(y.shape)
    if kind == "sigma_square":
        if loss.params["activation"] == "identity":
            return np.zeros(y.shape)
        return np.minimum(y, 0.0) ** 2  # relu range is [0, inf)
    if kind == "sigma_hinge":
        _check_pm1(y)
        if loss.params["activation"] == "identity":
            return np.zeros(y.shape)
        return np.where(y > 0, 0.0, 1.0)
    if kind == "weighted":
        return _global_inf(loss.params["inner"], y) / loss.params["weights"]
    if kind == "nn_weightshared":
        lo, hi = _nn_range(loss.params["a"], loss.params["b"])
        return np.clip(lo - y, 0.0, None) ** 2 + np.clip(y - hi, 0.0, None) ** 2
    if kind == "custom":
        inf_fn = loss.params["inf_fn"]
        if inf_fn is None:
            raise ValueError("custom loss needs inf_fn for the lam = 0 envelope")
        return np.asarray(inf_fn(y), dtype=float)
    raise ValueError(f"unknown loss kind {kind!r}")


def _nn_range(a, b) -> tuple[float, float]:
    """Range of the ramp network over the real line (continuous, pw linear)."""
    order = np.argsort(b, kind="stable")
    a_s, b_s = a[order], b[order]
    vals = [0.0]  # limit as u -> -inf: all units inactive
    vals.extend(_nn_forward(a_s, b_s, b_s))
    total = float(a_s.sum())
    lo, hi = min(vals), max(vals)
    if total > 0:
        hi = np.inf
    elif total < 0:
        lo = -np.inf
    return lo, hi


def _numeric_envelope(loss: LossSpec, lam, yhat, y):
    """Guaranteed 1-D minimization of the envelope objective.

    Any minimizer lies in [yhat - r, yhat + r] with r = sqrt(f(yhat)/lam),
    because outside it the quadratic penalty alone exceeds the u = yhat
    candidate.  A dense grid on the bracket locates the best cell, then
    golden-section polishes it to REFINE_WIDTH.
    """
    f0 = eval_loss(loss, yhat, y)
    out = f0.copy()
    act = f0 > 0
    if not act.any():
        return out
    lam_a, x_a, y_a, f0_a = lam[act], yhat[act], y[act], f0[act]
    rad = np.sqrt(f0_a / lam_a)

    offsets = np.linspace(-1.0, 1.0, GRID_POINTS)
    lo = np.empty_like(x_a)
    hi = np.empty_like(x_a)
    best = np.empty_like(x_a)
    # chunk the grid stage to bound temporaries (ramp nets cost an extra
    # factor of N per evaluation)
    per_eval = (
        loss.params["a"].size if loss.kind == "nn_weightshared" else 1
    )
    chunk = max(1, 2_000_000 // (GRID_POINTS * per_eval))
    for s in range(0, x_a.size, chunk):
        e = s + chunk
        u = x_a[s:e, None] + rad[s:e, None] * offsets
        obj = eval_loss(loss, u, y_a[s:e, None]) + lam_a[s:e, None] * (
            u - x_a[s:e, None]
        ) ** 2
        j = np.argmin(obj, axis=1)
        rows = np.arange(u.shape[0])
        best[s:e] = obj[rows, j]
        lo[s:e] = u[rows, np.maximum(j - 1, 0)]
        hi[s:e] = u[rows, np.minimum(j + 1, GRID_POINTS - 1)]

    def objective(u):
        return eval_loss(loss, u, y_a) + lam_a * (u - x_a) ** 2

    width = float(np.max(hi - lo))
    if width > REFINE_WIDTH:
        n_iter = int(math.ceil(math.log(width / REFINE_WIDTH) / -math.log(_INVPHI)))
        x1 = hi - _INVPHI * (hi - lo)
        x2 = lo + _INVPHI * (hi - lo)
        f1, f2 = objective(x1), objective(x2)
        for _ in range(min(n_iter, 120)):
            left = f1 < f2
            lo = np.where(left, lo, x1)
            hi = np.where(left, x2, hi)
            x1 = hi - _INVPHI * (hi - lo)
            x2 = lo + _INVPHI * (hi - lo)
            f1, f2 = objective(x1), objective(x2)
        best = np.minimum(best, np.minimum(f1, f2))
    out[act] = np.minimum(f0_a, best)
    return out


# ---------------------------------------------------------------------------
# empirical checks


def estimate_sqrt_lip(loss: LossSpec, y, grid) -> float:
    """Max adjacent-point slope of sqrt(f(., y)) on the grid (estimates H^0.5)."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be 1-D with at least two points")
    s = np.sqrt(eval_loss(loss, grid, y))
    return float(np.max(np.abs(np.diff(s)) / np.diff(grid)))


def check_envelope_inequalities(loss: LossSpec, lambdas, grid, y) -> dict:
    """Grid-check the envelope inequalities implied by the declared constants.

    Returns max violations (positive means a genuine violation beyond
    roundoff) of:
      * sqrt_lip:   f_lam >= (lam / (lam + H)) f      for declared H
      * lip:        f_lam >= f - M^2 / (4 lam)         when lip_for is finite
      * dominance:  f_lam <= f
      * monotone:   f_lam nondecreasing in lam
    """
    lambdas = np.sort(np.asarray(lambdas, dtype=float))
    grid = np.asarray(grid, dtype=float)
    f = eval_loss(loss, grid, y)
    env = moreau_envelope(loss, lambdas[:, None], grid[None, :], y)

    h = loss.sqrt_lip_sq
    with np.errstate(divide="ignore", invalid="ignore"):
        target = np.where(
            lambdas[:, None] + h > 0, lambdas[:, None] / (lambdas[:, None] + h), 0.0
        )
    sqrt_lip_viol = float(np.max(target * f - env))

    m = lip_for(loss, y)
    lip_viol = None
    if m is not None:
        pos = lambdas > 0
        if pos.any():
            slack = f - m**2 / (4.0 * lambdas[pos, None])
            lip_viol = float(np.max(slack - env[pos]))
    dominance_viol = float(np.max(env - f))
    monotone_viol = float(np.max(env[:-1] - env[1:])) if len(lambdas) > 1 else 0.0
    return {
        "sqrt_lip": sqrt_lip_viol,
        "lip": lip_viol,
        "dominance": dominance_viol,
        "monotone": monotone_viol,
    }
