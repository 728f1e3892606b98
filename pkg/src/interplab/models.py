"""Data-generating models: Gaussian multi-index designs and relatives.

Covariances are diagonal-first: the common experiments use (possibly spiked)
diagonal spectra in d up to a few tens of thousands, so nothing here ever
materializes a d x d matrix unless explicitly asked to.  The geometry object
carries the oblique projection that kills the index directions,

    Q = I - W (W' S W)^{-1} W' S,        S_perp = Q' S Q,

in factored form; Q' S Q collapses to S - SW (W'SW)^{-1} (SW)', a diagonal
minus a rank-k correction.

Each model also exposes a projected low-dimensional view of itself: a linear
predictor w (plus offset) acts on a sample only through its loading on the
k index coordinates and an independent Gaussian remainder with variance
w' S_perp w.  Population losses, and the empirical concentration estimators
built on top of them, sample that (k+1)-dimensional problem instead of the
ambient one.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import NumericalError
from . import rng as rngmod

_DENSE_LIMIT = 500


# ---------------------------------------------------------------------------
# covariances


@dataclasses.dataclass(frozen=True)
class Covariance:
    """PSD covariance stored as a diagonal spectrum or a small dense matrix."""

    spectrum: np.ndarray | None = None
    dense: np.ndarray | None = None

    def __post_init__(self):
        if (self.spectrum is None) == (self.dense is None):
            raise ValueError("exactly one of spectrum/dense must be given")
        if self.spectrum is not None:
            s = np.asarray(self.spectrum, dtype=float).ravel()
            if s.size == 0 or np.any(s < 0):
                raise ValueError("spectrum must be nonnegative and nonempty")
            object.__setattr__(self, "spectrum", s)
        else:
            m = np.asarray(self.dense, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError("dense covariance must be square")
            if m.shape[0] > _DENSE_LIMIT:
                raise ValueError(
                    f"dense covariance capped at d = {_DENSE_LIMIT}; use a spectrum"
                )
            if not np.allclose(m, m.T, atol=1e-10):
                raise ValueError("dense covariance must be symmetric")
            object.__setattr__(self, "dense", 0.5 * (m + m.T))

    @property
    def d(self) -> int:
        return self.spectrum.size if self.spectrum is not None else self.dense.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return self.spectrum is not None

    @property
    def trace(self) -> float:
        if self.spectrum is not None:
            return float(self.spectrum.sum())
        return float(np.trace(self.dense))

    @property
    def trace_sq(self) -> float:
        """Trace of S^2."""
        if self.spectrum is not None:
            return float((self.spectrum**2).sum())
        return float((self.dense**2).sum())

    @property
    def eff_rank(self) -> float:
        """trace(S)^2 / trace(S^2); zero covariance has effective rank 0."""
        ts = self.trace_sq
        return self.trace**2 / ts if ts > 0 else 0.0

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if self.spectrum is not None:
            return self.spectrum * v
        return self.dense @ v

    def matmat(self, m: np.ndarray) -> np.ndarray:
        if self.spectrum is not None:
            return self.spectrum[:, None] * m
        return self.dense @ m

    def quad(self, v: np.ndarray) -> float:
        """v' S v."""
        return float(v @ self.matvec(v))

    def as_matrix(self) -> np.ndarray:
        if self.spectrum is not None:
            return np.diag(self.spectrum)
        return self.dense.copy()

    def sqrt_factor(self) -> np.ndarray:
        """Matrix B with B B' = S (diagonal sqrt or Cholesky of dense)."""
        if self.spectrum is not None:
            return np.diag(np.sqrt(self.spectrum))
        return _psd_factor(self.dense)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n rows of N(0, S)."""
        g = rng.standard_normal((n, self.d))
        if self.spectrum is not None:
            return g * np.sqrt(self.spectrum)
        return g @ _psd_factor(self.dense).T


def _psd_factor(m: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        # semidefinite fallback
        vals, vecs = np.linalg.eigh(m)
        vals = np.clip(vals, 0.0, None)
        return vecs * np.sqrt(vals)


def make_covariance(kind: str, **params) -> Covariance:
    """Factory for the shipped covariance families.

    kinds: isotropic(d, scale), bilevel(d, spike_count, spike_value,
    tail_value), spectrum(values), dense(matrix).
    """
    if kind == "isotropic":
        d = int(params.pop("d"))
        scale = float(params.pop("scale", 1.0))
        _no_extra(params)
        if d < 1 or scale < 0:
            raise ValueError("need d >= 1 and scale >= 0")
        return Covariance(spectrum=np.full(d, scale))
    if kind == "bilevel":
        d = int(params.pop("d"))
        count = int(params.pop("spike_count"))
        spike = float(params.pop("spike_value"))
        tail = float(params.pop("tail_value"))
        _no_extra(params)
        if not 0 <= count <= d:
            raise ValueError("spike_count must lie in [0, d]")
        spec = np.full(d, tail)
        spec[:count] = spike
        return Covariance(spectrum=spec)
    if kind == "spectrum":
        values = np.asarray(params.pop("values"), dtype=float)
        _no_extra(params)
        return Covariance(spectrum=values)
    if kind == "dense":
        matrix = np.asarray(params.pop("matrix"), dtype=float)
        _no_extra(params)
        return Covariance(dense=matrix)
    raise ValueError(f"unknown covariance kind {kind!r}")


def _no_extra(params: dict) -> None:
    if params:
        raise ValueError(f"unexpected parameters: {sorted(params)}")


# ---------------------------------------------------------------------------
# noise


@dataclasses.dataclass(frozen=True)
class Noise:
    """Scalar noise channel: gaussian(std), discrete table, or none."""

    kind: str
    std: float = 0.0
    values: np.ndarray | None = None
    probs: np.ndarray | None = None

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return self.std * rng.standard_normal(n)
        if self.kind == "table":
            idx = rng.choice(self.values.size, size=n, p=self.probs)
            return self.values[idx]
        if self.kind == "none":
            return np.zeros(n)
        raise ValueError(f"unknown noise kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian({self.std:g})"
        if self.kind == "table":
            return f"table({self.values.size})"
        return "none"


def gaussian_noise(std: float) -> Noise:
    if std < 0:
        raise ValueError("std must be nonnegative")
    return Noise("gaussian", std=std)


def table_noise(values, probs) -> Noise:
    v = np.asarray(values, dtype=float).ravel()
    p = np.asarray(probs, dtype=float).ravel()
    if v.size != p.size or v.size == 0:
        raise ValueError("values and probs must be nonempty and equal length")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probs must be a probability vector")
    return Noise("table", values=v, probs=p / p.sum())


def no_noise() -> Noise:
    return Noise("none")


# ---------------------------------------------------------------------------
# multi-index model


LINKS = ("linear_noise", "magnitude_noise", "relu_pointmass", "custom")


@dataclasses.dataclass(frozen=True)
class MultiIndexModel:
    """x ~ N(mu, S); y depends on x only through the k index projections W'x.

    Links (k <= 1 for the named ones; signal means the single index value,
    zero when k = 0):
      linear_noise    y = signal + xi
      magnitude_noise y = |signal + xi|
      relu_pointmass  y = max(signal + offset + xi, 0)   (exact zeros)
      custom          y = link_fn(eta, xi) for a user callable on (n,k), (n,)
    """

    mu: np.ndarray
    sigma: Covariance
    W: np.ndarray
    link: str
    noise: Noise
    offset: float = 0.0
    link_fn: object = None

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).ravel()
        w = np.asarray(self.W, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        if w.size == 0:
            w = w.reshape(self.sigma.d, 0)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "W", w)
        d = self.sigma.d
        if mu.size != d or w.shape[0] != d:
            raise ValueError("mu and W must match the covariance dimension")
        if not 0 <= w.shape[1] < d:
            raise ValueError("need 0 <= k < d")
        if self.link not in LINKS:
            raise ValueError(f"unknown link {self.link!r}")
        if self.link == "custom" and self.link_fn is None:
            raise ValueError("custom link needs link_fn")
        if self.link in ("linear_noise", "magnitude_noise", "relu_pointmass"):
            if w.shape[1] > 1:
                raise ValueError(f"link {self.link!r} expects k <= 1")
        if w.shape[1] > 0:
            m = w.T @ self.sigma.matmat(w)
            if np.linalg.cond(m) > 1e12:
                raise ValueError("W' S W must be invertible")

    @property
    def d(self) -> int:
        return self.sigma.d

    @property
    def k(self) -> int:
        return self.W.shape[1]

    def model_id(self) -> str:
        return f"{self.link}-d{self.d}-k{self.k}-{self.noise.describe()}"

    def apply_link(self, eta: np.ndarray, xi: np.ndarray) -> np.ndarray:
        signal = eta[:, 0] if self.k >= 1 else np.zeros(xi.shape[0])
        if self.link == "linear_noise":
            return signal + xi
        if self.link == "magnitude_noise":
            return np.abs(signal + xi)
        if self.link == "relu_pointmass":
            return np.maximum(signal + self.offset + xi, 0.0)
        return np.asarray(self.link_fn(eta, xi), dtype=float)

    def projected_problem(self) -> "ProjectedProblem":
        m = self.W.T @ self.sigma.matmat(self.W) if self.k else np.zeros((0, 0))
        chol = _psd_factor(m) if self.k else m
        return ProjectedProblem(model=self, index_chol=chol)

    def project_predictor(self, w: np.ndarray, b: float = 0.0) -> "ProjectedPredictor":
        """Reduce a d-dim linear predictor to its (k+1)-dim effective form."""
        w = np.asarray(w, dtype=float).ravel()
        sw = self.sigma.matvec(w)
        if self.k:
            m = self.W.T @ self.sigma.matmat(self.W)
            c_raw = np.linalg.solve(m, self.W.T @ sw)
            perp_var = float(w @ sw) - float(c_raw @ (self.W.T @ sw))
            c_std = _psd_factor(m).T @ c_raw
        else:
            c_std = np.zeros(0)
            perp_var = float(w @ sw)
        offset = float(b + w @ self.mu)
        return ProjectedPredictor(
            c_std=c_std, perp_std=float(np.sqrt(max(perp_var, 0.0))), offset=offset
        )


@dataclasses.dataclass(frozen=True)
class ProjectedPredictor:
    """Effective action of a linear predictor on the projected problem.

    Prediction on a projected draw: offset + <c_std, gz> + perp_std * (scale
    of the perpendicular channel) * fresh standard normal.
    """

    c_std: np.ndarray
    perp_std: float
    offset: float = 0.0

    @property
    def as_array(self) -> np.ndarray:
        return np.concatenate([self.c_std, [self.perp_std]])


@dataclasses.dataclass(frozen=True)
class ProjectedSample:
    gz: np.ndarray            # (n, k) standard-normal index coordinates
    y: np.ndarray             # (n,) labels
    perp_scale: np.ndarray    # (n,) multiplier on the perpendicular channel
    weights: np.ndarray | None = None  # per-sample loss weights, if any


@dataclasses.dataclass(frozen=True)
class ProjectedProblem:
    """(k+1)-dimensional view shared by estimators and population losses."""

    model: object
    index_chol: np.ndarray

    @property
    def k(self) -> int:
        return self.index_chol.shape[0]

    def sample(self, n: int, rng: np.random.Generator) -> ProjectedSample:
        model = self.model
        gz = rng.standard_normal((n, self.k))
        mean = model.W.T @ model.mu if self.k else np.zeros(0)
        eta = mean + gz @ self.index_chol.T
        xi = model.noise.draw(n, rng)
        y = model.apply_link(eta, xi)
        if not np.all(np.isfinite(y)):
            raise NumericalError("link produced non-finite labels")
        return ProjectedSample(gz=gz, y=y, perp_scale=np.ones(n))

    def predict(
        self,
        pred: ProjectedPredictor,
        sample: ProjectedSample,
        g_perp: np.ndarray,
    ) -> np.ndarray:
        out = np.full(sample.y.shape, pred.offset)
        if self.k:
            out = out + sample.gz @ pred.c_std
        return out + pred.perp_std * sample.perp_scale * g_perp


def geometry(model_or_sigma, W=None) -> "ModelGeometry":
    """Oblique-projection geometry for a model or an explicit (S, W) pair."""
    if W is None:
        model = model_or_sigma
        return ModelGeometry.from_parts(model.sigma, model.W)
    return ModelGeometry.from_parts(model_or_sigma, W)


@dataclasses.dataclass(frozen=True)
class ModelGeometry:
    """Factored form of Q = I - W (W'SW)^{-1} W'S and S_perp = Q'SQ."""

    sigma: Covariance
    W: np.ndarray
    sw: np.ndarray       # S W, (d, k)
    m_inv: np.ndarray    # (W' S W)^{-1}, (k, k)

    @classmethod
    def from_parts(cls, sigma: Covariance, W) -> "ModelGeometry":
        w = np.asarray(W, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        if w.size == 0:
            w = w.reshape(sigma.d, 0)
        if w.shape[0] != sigma.d:
            raise ValueError("W rows must match the covariance dimension")
        sw = sigma.matmat(w)
        if w.shape[1]:
            m = w.T @ sw
            if np.linalg.cond(m) > 1e12:
                raise ValueError("W' S W must be invertible")
            m_inv = np.linalg.inv(m)
        else:
            m_inv = np.zeros((0, 0))
        return cls(sigma=sigma, W=w, sw=sw, m_inv=m_inv)

    @property
    def d(self) -> int:
        return self.sigma.d

    @property
    def k(self) -> int:
        return self.W.shape[1]

    # -- dense materializations (small d only; tests and direct inspection)

    def q_matrix(self) -> np.ndarray:
        q = np.eye(self.d)
        if self.k:
            q -= self.W @ self.m_inv @ self.sw.T
        return q

    def sigma_perp_matrix(self) -> np.ndarray:
        s = self.sigma.as_matrix()
        if self.k:
            s = s - self.sw @ self.m_inv @ self.sw.T
        return s

    # -- cheap functionals

    def apply_q_t(self, x: np.ndarray) -> np.ndarray:
        """Q' x for vectors or row-stacked matrices (acts on last axis)."""
        if not self.k:
            return np.asarray(x, dtype=float)
        coef = x @ self.W @ self.m_inv
        return x - coef @ self.sw.T

    @property
    def trace_perp(self) -> float:
        t = self.sigma.trace
        if self.k:
            t -= float(np.trace(self.m_inv @ (self.sw.T @ self.sw)))
        return t

    @property
    def trace_sq_perp(self) -> float:
        t = self.sigma.trace_sq
        if self.k:
            ssw = self.sigma.matmat(self.sw)          # S^2 W
            a = self.m_inv @ (self.sw.T @ self.sw)    # M^{-1} W'S^2W
            t -= 2.0 * float(np.trace(self.m_inv @ (self.sw.T @ ssw)))
            t += float(np.trace(a @ a))
        return max(t, 0.0)

    @property
    def eff_rank_perp(self) -> float:
        ts = self.trace_sq_perp
        return self.trace_perp**2 / ts if ts > 0 else 0.0

    def perp_quad(self, w: np.ndarray) -> float:
        """w' S_perp w."""
        w = np.asarray(w, dtype=float).ravel()
        v = float(w @ self.sigma.matvec(w))
        if self.k:
            t = self.sw.T @ w
            v -= float(t @ self.m_inv @ t)
        return max(v, 0.0)

    def perp_spectrum(self) -> np.ndarray | None:
        """Eigenvalues of S_perp when cheaply available, else None.

        Cheap cases: k = 0 diagonal; index directions living on disjoint
        coordinates of a diagonal S (their eigenvalues drop to zero); any
        dense S (small by construction).
        """
        if not self.k:
            if self.sigma.is_diagonal:
                return self.sigma.spectrum.copy()
            return np.linalg.eigvalsh(self.sigma.dense)
        if self.sigma.is_diagonal:
            cols = []
            for j in range(self.k):
                nz = np.nonzero(self.W[:, j])[0]
                if nz.size != 1:
                    cols = None
                    break
                cols.append(nz[0])
            if cols is not None and len(set(cols)) == self.k:
                spec = self.sigma.spectrum.copy()
                spec[cols] = 0.0
                return spec
        if self.d <= _DENSE_LIMIT:
            return np.clip(np.linalg.eigvalsh(self.sigma_perp_matrix()), 0.0, None)
        return None

    def sample_perp_norm_sq(self, m: int, rng: np.random.Generator) -> np.ndarray:
        """m draws of ||z||^2 with z ~ N(0, S_perp).

        Uses grouped chi-square draws when the spectrum is available with few
        distinct values, otherwise samples z = Q'x with x ~ N(0, S) in
        chunks.
        """
        spec = self.perp_spectrum()
        if spec is not None:
            vals, counts = np.unique(spec, return_counts=True)
            if vals.size <= 64:
                out = np.zeros(m)
                for v, c in zip(vals, counts):
                    if v > 0:
                        out += v * rng.chisquare(int(c), size=m)
                return out
        out = np.empty(m)
        chunk = max(1, 20_000_000 // max(self.d, 1))
        for s in range(0, m, chunk):
            e = min(s + chunk, m)
            x = self.sigma.sample(e - s, rng)
            z = self.apply_q_t(x)
            out[s:e] = (z**2).sum(axis=1)
        return out


# ---------------------------------------------------------------------------
# ambient sampling


@dataclasses.dataclass(frozen=True)
class SampleSet:
    """A design matrix with labels, tagged by the seed that produced it."""

    X: np.ndarray
    y: np.ndarray
    seed: int
    model_id: str
    weights: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def sample(model: MultiIndexModel, n: int, seed: int) -> SampleSet:
    """Draw n samples; fixed draw order makes this bit-reproducible by seed."""
    if n < 1:
        raise ValueError("need n >= 1")
    rng = rngmod.stream(seed)
    x = model.mu + model.sigma.sample(n, rng)
    eta = x @ model.W
    xi = model.noise.draw(n, rng)
    y = model.apply_link(eta, xi)
    if not np.all(np.isfinite(y)):
        raise NumericalError("link produced non-finite labels")
    return SampleSet(X=x, y=y, seed=int(seed), model_id=model.model_id())


# ---------------------------------------------------------------------------
# matrix sensing


@dataclasses.dataclass(frozen=True)
class MatrixSensingInstance:
    """Random Gaussian measurements of a fixed rank-r ground truth."""

    a_ops: np.ndarray     # (n, d1, d2) sensing matrices
    y: np.ndarray         # (n,) measurements
    x_star: np.ndarray    # (d1, d2), Frobenius norm = x_star_scale exactly
    r: int
    noise_std: float
    seed: int

    @property
    def n(self) -> int:
        return self.a_ops.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.x_star.shape

    def apply(self, x: np.ndarray) -> np.ndarray:
        """<A_i, X> for all i."""
        return np.tensordot(self.a_ops, x, axes=([1, 2], [0, 1]))


def sample_matrix_sensing(
    d1: int,
    d2: int,
    r: int,
    n: int,
    noise_std: float,
    x_star_scale: float = 1.0,
    seed: int = 0,
) -> MatrixSensingInstance:
    if not 1 <= r <= min(d1, d2):
        raise ValueError("need 1 <= r <= min(d1, d2)")
    if n < 1 or noise_std < 0 or x_star_scale <= 0:
        raise ValueError("bad instance parameters")
    rng = rngmod.stream(seed)
    left = rng.standard_normal((d1, r))
    right = rng.standard_normal((r, d2))
    x_star = left @ right
    fro = float(np.linalg.norm(x_star))
    if fro == 0.0:
        raise NumericalError("degenerate ground truth draw")
    x_star = x_star * (x_star_scale / fro)
    sv = np.linalg.svd(x_star, compute_uv=False)
    if (sv > 1e-10 * sv[0]).sum() != r:
        raise NumericalError("ground truth rank deficiency")
    a_ops = rng.standard_normal((n, d1, d2))
    y = np.tensordot(a_ops, x_star, axes=([1, 2], [0, 1]))
    y = y + noise_std * rng.standard_normal(n)
    return MatrixSensingInstance(
        a_ops=a_ops, y=y, x_star=x_star, r=r, noise_std=noise_std, seed=int(seed)
    )


# ---------------------------------------------------------------------------
# anti-universality model


@dataclasses.dataclass(frozen=True)
class CounterexampleModel:
    """Tail coordinates scaled by a head-dependent factor h(x_head).

    x_head ~ N(0, S_head) in k dims; independently z ~ N(0, S_tail); the
    observed vector is (x_head, h(x_head) * z) and y = g(x_head).  Gaussian
    conditionally on the head, decidedly non-Gaussian jointly.
    """

    sigma_head: Covariance
    sigma_tail: Covariance
    h_kind: str = "one_plus_abs"        # h(x) = 1 + |x_1|
    g_kind: str = "h_squared"           # y = h(x_head)^2
    h_fn: object = None
    g_fn: object = None

    def __post_init__(self):
        if self.h_kind not in ("one_plus_abs", "custom"):
            raise ValueError(f"unknown h_kind {self.h_kind!r}")
        if self.g_kind not in ("h_squared", "custom"):
            raise ValueError(f"unknown g_kind {self.g_kind!r}")
        if self.h_kind == "custom" and self.h_fn is None:
            raise ValueError("custom h needs h_fn")
        if self.g_kind == "custom" and self.g_fn is None:
            raise ValueError("custom g needs g_fn")

    @property
    def k(self) -> int:
        return self.sigma_head.d

    @property
    def d(self) -> int:
        return self.k + self.sigma_tail.d

    def h(self, x_head: np.ndarray) -> np.ndarray:
        if self.h_kind == "one_plus_abs":
            return 1.0 + np.abs(x_head[:, 0])
        return np.asarray(self.h_fn(x_head), dtype=float)

    def g(self, x_head: np.ndarray) -> np.ndarray:
        if self.g_kind == "h_squared":
            return self.h(x_head) ** 2
        return np.asarray(self.g_fn(x_head), dtype=float)

    def model_id(self) -> str:
        return f"counterexample-d{self.d}-k{self.k}-{self.h_kind}"

    def projected_problem(self) -> "CounterexampleProjected":
        return CounterexampleProjected(model=self)

    def project_predictor(self, w, b: float = 0.0) -> ProjectedPredictor:
        w = np.asarray(w, dtype=float).ravel()
        head, tail = w[: self.k], w[self.k:]
        c_std = self.sigma_head.sqrt_factor().T @ head
        perp_var = float(tail @ self.sigma_tail.matvec(tail))
        return ProjectedPredictor(
            c_std=c_std, perp_std=float(np.sqrt(max(perp_var, 0.0))), offset=float(b)
        )


@dataclasses.dataclass(frozen=True)
class CounterexampleProjected:
    """Projected view: the perpendicular channel is modulated by h."""

    model: CounterexampleModel

    @property
    def k(self) -> int:
        return self.model.k

    def sample(self, n: int, rng: np.random.Generator) -> ProjectedSample:
        gz = rng.standard_normal((n, self.k))
        x_head = gz @ self.model.sigma_head.sqrt_factor().T
        h = self.model.h(x_head)
        y = self.model.g(x_head)
        return ProjectedSample(gz=gz, y=y, perp_scale=h, weights=h**2)

    def predict(self, pred, sample, g_perp):
        out = np.full(sample.y.shape, pred.offset)
        if self.k:
            out = out + sample.gz @ pred.c_std
        return out + pred.perp_std * sample.perp_scale * g_perp


def sample_counterexample(model: CounterexampleModel, n: int, seed: int) -> SampleSet:
    """Draw (x_head, h * z) with labels y = g and weights h^2."""
    if n < 1:
        raise ValueError("need n >= 1")
    rng = rngmod.stream(seed)
    x_head = model.sigma_head.sample(n, rng)
    z = model.sigma_tail.sample(n, rng)
    h = model.h(x_head)
    y = model.g(x_head)
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(h)):
        raise NumericalError("h or g produced non-finite values")
    x = np.concatenate([x_head, h[:, None] * z], axis=1)
    return SampleSet(
        X=x, y=y, seed=int(seed), model_id=model.model_id(), weights=h**2
    )
