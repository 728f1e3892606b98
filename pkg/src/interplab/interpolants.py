"""Interpolating estimators: minimum-norm solvers and constructions.

All vector solvers go through the n x n Gram matrix of the design, never a
d x d system, so overparametrized problems (d in the thousands) stay cheap.
The nonlinear interpolation problems (sign patterns for magnitude targets,
dead units for ReLU targets) are handled by fixing a reference predictor
and solving the induced linear system for a minimum-norm correction; a
2^n enumeration oracle is available at toy sizes to confirm the shortcut.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg

from .errors import InfeasibleError, NumericalError

RANK_CUTOFF = 1e-10          # relative singular-value cutoff for Gram solves
BRUTE_MAX_N = 20
_FEAS_TOL = 1e-6


@dataclasses.dataclass(frozen=True)
class InterpolantSolution:
    """A fitted interpolant plus the certificates of its fit.

    norm is the l2 norm of w for vector problems and the nuclear norm of
    x_hat for the matrix problem.  max_residual measures the constraint
    violation in the problem's native form (see each solver).  status is
    "exact" for direct solves, otherwise "iterative-converged" or
    "iteration-budget-hit".
    """

    kind: str
    norm: float
    max_residual: float
    status: str
    w: np.ndarray | None = None
    b: float | None = None
    x_hat: np.ndarray | None = None
    iterations: int = 0
    objective_history: np.ndarray | None = None


class GramSolver:
    """Factorized least-norm solves Xw = t through the n x n Gram matrix."""

    def __init__(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            raise ValueError("design must be 2-D")
        self.x = x
        gram = x @ x.T
        vals, vecs = np.linalg.eigh(gram)
        top = float(vals[-1]) if vals.size else 0.0
        keep = vals > (RANK_CUTOFF**2) * max(top, 0.0)
        self.vals = vals[keep]
        self.vecs = vecs[:, keep]

    @property
    def rank(self) -> int:
        return self.vals.size

    def min_norm_sq(self, targets: np.ndarray) -> np.ndarray:
        """||w||^2 of the least-norm solution for row-stacked targets."""
        c = np.atleast_2d(targets) @ self.vecs
        return (c**2 / self.vals).sum(axis=1)

    def range_defect(self, targets: np.ndarray) -> np.ndarray:
        """Norm of the target component outside the row space of X."""
        t = np.atleast_2d(targets)
        c = t @ self.vecs
        gap = (t**2).sum(axis=1) - (c**2).sum(axis=1)
        return np.sqrt(np.clip(gap, 0.0, None))

    def solve(self, t: np.ndarray) -> np.ndarray:
        c = (t @ self.vecs) / self.vals
        return self.x.T @ (self.vecs @ c)


def min_norm_linear(x: np.ndarray, t: np.ndarray) -> InterpolantSolution:
    """Least-norm w with Xw = t.

    Rank-deficient designs are fine as long as t lies in the row space;
    otherwise the system is inconsistent and InfeasibleError is raised.
    """
    t = np.asarray(t, dtype=float).ravel()
    solver = GramSolver(x)
    if t.size != solver.x.shape[0]:
        raise ValueError("target length must match the number of rows")
    w = solver.solve(t)
    resid = float(np.max(np.abs(solver.x @ w - t))) if t.size else 0.0
    if resid > _FEAS_TOL * max(1.0, float(np.max(np.abs(t), initial=0.0))):
        raise InfeasibleError(
            f"targets are inconsistent with the design (residual {resid:.3e})"
        )
    return InterpolantSolution(
        kind="linear",
        norm=float(np.linalg.norm(w)),
        max_residual=resid,
        status="exact",
        w=w,
    )


# ---------------------------------------------------------------------------
# magnitude targets


def phase_construct(x: np.ndarray, y: np.ndarray, w_sharp: np.ndarray) -> InterpolantSolution:
    """Interpolate |<w, x_i>| = y_i around a reference predictor.

    Signs are taken from the reference: rows with <w_sharp, x_i> >= 0 (ties
    included) keep positive sign.  The correction solves the linear system
    for the signed residuals, so the result is w_sharp plus a least-norm
    update, feasible by construction.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if np.any(y < 0):
        raise ValueError("magnitude targets must be nonnegative")
    w_sharp = np.asarray(w_sharp, dtype=float).ravel()
    t0 = x @ w_sharp
    sign = np.where(t0 >= 0, 1.0, -1.0)
    xi = sign * (y - np.abs(t0))
    w = w_sharp + min_norm_linear(x, xi).w
    resid = float(np.max(np.abs((x @ w) ** 2 - y**2), initial=0.0))
    return InterpolantSolution(
        kind="phase_construct",
        norm=float(np.linalg.norm(w)),
        max_residual=resid,
        status="exact",
        w=w,
    )


def phase_brute(x: np.ndarray, y: np.ndarray) -> InterpolantSolution:
    """Exact minimum-norm solution of |<w, x_i>| = y_i by 2^n enumeration.

    Only for toy sizes (n <= 20); every sign pattern is scored by its
    least-norm cost through the shared Gram factorization, infeasible
    patterns (rank-deficient designs) are skipped.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = x.shape[0]
    if n > BRUTE_MAX_N:
        raise ValueError(f"phase_brute enumerates 2^n patterns; refuses n > {BRUTE_MAX_N}")
    if np.any(y < 0):
        raise ValueError("magnitude targets must be nonnegative")
    solver = GramSolver(x)
    feas_tol = _FEAS_TOL * max(1.0, float(np.max(y, initial=0.0)))

    best_cost = np.inf
    best_t = None
    chunk = 1 << 14
    for start in range(0, 1 << n, chunk):
        idx = np.arange(start, min(start + chunk, 1 << n))
        signs = 1.0 - 2.0 * ((idx[:, None] >> np.arange(n)) & 1)
        targets = signs * y
        ok = solver.range_defect(targets) <= feas_tol
        if not ok.any():
            continue
        costs = np.where(ok, solver.min_norm_sq(targets), np.inf)
        j = int(np.argmin(costs))
        if costs[j] < best_cost:
            best_cost = float(costs[j])
            best_t = targets[j]
    if best_t is None:
        raise InfeasibleError("no sign pattern is consistent with the design")
    w = solver.solve(best_t)
    resid = float(np.max(np.abs((x @ w) ** 2 - y**2), initial=0.0))
    return InterpolantSolution(
        kind="phase_brute",
        norm=float(np.linalg.norm(w)),
        max_residual=resid,
        status="exact",
        w=w,
    )


# ---------------------------------------------------------------------------
# ReLU targets


def relu_construct(
    x: np.ndarray,
    y: np.ndarray,
    w_sharp: np.ndarray,
    b_sharp: float,
    zero_mode: str = "relaxed",
) -> InterpolantSolution:
    """Interpolate relu(<w, x_i> + b) = y_i around a reference predictor.

    Rows with y_i > 0 pin the pre-activation to y_i.  Rows with y_i = 0 only
    need a nonpositive pre-activation: "relaxed" cancels the reference's
    positive part there (the pre-activation becomes min(t_i, 0) <= 0), while
    "strict" forces the pre-activation to exactly zero, which is the natural
    comparison point for how much the one-sided constraint saves.
    """
    if zero_mode not in ("relaxed", "strict"):
        raise ValueError(f"unknown zero_mode {zero_mode!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if np.any(y < 0):
        raise ValueError("relu targets must be nonnegative")
    w_sharp = np.asarray(w_sharp, dtype=float).ravel()
    t0 = x @ w_sharp + b_sharp
    pos = y > 0
    if zero_mode == "relaxed":
        xi = np.where(pos, y - t0, -np.maximum(t0, 0.0))
    else:
        xi = np.where(pos, y - t0, -t0)
    w = w_sharp + min_norm_linear(x, xi).w
    resid = float(np.max(np.abs(np.maximum(x @ w + b_sharp, 0.0) - y), initial=0.0))
    return InterpolantSolution(
        kind=f"relu_construct_{zero_mode}",
        norm=float(np.linalg.norm(w)),
        max_residual=resid,
        status="exact",
        w=w,
        b=float(b_sharp),
    )


# ---------------------------------------------------------------------------
# nuclear-norm interpolation


def nuclear_min(
    a_ops: np.ndarray,
    y: np.ndarray,
    rho: float = 1.0,
    max_iter: int = 5000,
    feas_tol: float = 1e-6,
    rel_tol: float = 1e-6,
    split_tol: float = 1e-7,
) -> InterpolantSolution:
    """min ||X||_* subject to <A_i, X> = y_i, by ADMM splitting.

    One block enforces the affine constraints by projection (precomputed
    n x n Gram of the vectorized sensing matrices), the other applies
    singular-value soft-thresholding; the returned iterate is the
    affine-projected one, so feasibility holds up to solver precision.
    Convergence requires feasibility <= feas_tol, relative objective
    change <= rel_tol over the final 10 iterations, and the two blocks
    agreeing to split_tol; the penalty rescales by 10x whenever the primal
    and dual residuals diverge by 10x.
    """
    a_ops = np.asarray(a_ops, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, d1, d2 = a_ops.shape
    if y.size != n:
        raise ValueError("measurement length must match the number of operators")
    a_vec = a_ops.reshape(n, d1 * d2)
    gram = a_vec @ a_vec.T
    try:
        factor = scipy.linalg.cho_factor(gram)

        def gram_solve(v):
            return scipy.linalg.cho_solve(factor, v)
    except scipy.linalg.LinAlgError:
        pinv = np.linalg.pinv(gram, rcond=1e-12)

        def gram_solve(v):
            return pinv @ v

    def project(mat):
        defect = a_vec @ mat.ravel() - y
        out = mat - (a_vec.T @ gram_solve(defect)).reshape(d1, d2)
        return out

    x = project(np.zeros((d1, d2)))
    z = x.copy()
    u = np.zeros((d1, d2))
    history = []
    status = "iteration-budget-hit"
    iterations = max_iter
    for it in range(1, max_iter + 1):
        x = project(z - u)
        z_prev = z
        z = _svt(x + u, 1.0 / rho)
        u = u + x - z
        history.append(float(_nuclear_norm(x)))

        r_primal = float(np.linalg.norm(x - z))
        r_dual = rho * float(np.linalg.norm(z - z_prev))
        if r_primal > 10.0 * r_dual and r_primal > 1e-12:
            rho *= 10.0
            u /= 10.0
        elif r_dual > 10.0 * r_primal and r_dual > 1e-12:
            rho /= 10.0
            u *= 10.0

        if it >= 10:
            window = history[-10:]
            scale = max(abs(window[-1]), 1e-12)
            stable = (max(window) - min(window)) <= rel_tol * scale
            feas = float(np.max(np.abs(a_vec @ x.ravel() - y)))
            agree = r_primal <= split_tol * (1.0 + float(np.linalg.norm(x)))
            if stable and agree and feas <= feas_tol:
                status = "iterative-converged"
                iterations = it
                break

    feas = float(np.max(np.abs(a_vec @ x.ravel() - y)))
    if status == "iteration-budget-hit" and feas > feas_tol:
        raise NumericalError(
            f"nuclear ADMM failed feasibility at budget ({feas:.3e})"
        )
    return InterpolantSolution(
        kind="nuclear",
        norm=_nuclear_norm(x),
        max_residual=feas,
        status=status,
        x_hat=x,
        iterations=iterations,
        objective_history=np.asarray(history),
    )


def _svt(mat: np.ndarray, thresh: float) -> np.ndarray:
    uu, s, vt = np.linalg.svd(mat, full_matrices=False)
    s = np.maximum(s - thresh, 0.0)
    return (uu * s) @ vt


def _nuclear_norm(mat: np.ndarray) -> float:
    return float(np.linalg.svd(mat, compute_uv=False).sum())


def certify_nuclear(
    x_hat: np.ndarray,
    a_ops: np.ndarray,
    tol: float = 1e-3,
    rank_cutoff: float = 1e-6,
) -> dict:
    """Dual-certificate check for nuclear-norm optimality of x_hat.

    Finds measurement coefficients nu whose combination G = sum nu_i A_i
    best matches the subgradient U V' on the tangent space of x_hat's
    numerical top-r subspace, then reports the operator norm of G and the
    tangent alignment residual (Frobenius, normalized by sqrt(r)).  Both
    must be within tol of their ideal values (1 and 0) to pass.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    a_ops = np.asarray(a_ops, dtype=float)
    n, d1, d2 = a_ops.shape
    uu, s, vt = np.linalg.svd(x_hat, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        raise ValueError("certificate needs a nonzero candidate")
    r = int((s > rank_cutoff * s[0]).sum())
    ur = uu[:, :r]
    vr = vt[:r, :].T
    uv = ur @ vr.T

    pu = ur @ ur.T
    pv = vr @ vr.T

    def tangent(mats):
        left = np.einsum("ij,njk->nik", pu, mats)
        right = np.einsum("nij,jk->nik", mats, pv)
        both = np.einsum("ij,njk->nik", pu, right)
        return left + right - both

    basis = tangent(a_ops).reshape(n, d1 * d2)
    nu, *_ = np.linalg.lstsq(basis.T, uv.ravel(), rcond=None)
    combo = np.tensordot(nu, a_ops, axes=(0, 0))
    op_norm = float(np.linalg.svd(combo, compute_uv=False)[0])
    align = float(
        np.linalg.norm(tangent(combo[None])[0] - uv) / np.sqrt(r)
    )
    passed = (op_norm <= 1.0 + tol) and (align <= tol)
    return {
        "rank": r,
        "op_norm": op_norm,
        "alignment": align,
        "passed": bool(passed),
        "nu": nu,
    }
