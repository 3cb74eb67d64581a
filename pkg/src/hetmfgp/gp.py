"""Zero-mean Gaussian-process regression with an ARD Matern 5/2 kernel.

Inputs are scaled to the unit cube by a box (the process window, or the data
range if none is given) and targets are standardized, so the zero-mean prior
is reasonable.  Hyperparameters maximise the log marginal likelihood with a
multi-start bounded Nelder-Mead search in log space.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

logger = logging.getLogger(__name__)

SQRT5 = math.sqrt(5.0)
NUGGET_FLOOR = 1e-12
JITTER_START = 1e-10
JITTER_MAX = 1e-4
SCHEMA = "hetmfgp.gp/1"


class GpFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class KernelParams:
    signal_variance: float
    lengthscales: tuple[float, ...]
    nugget: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "lengthscales",
                           tuple(float(v) for v in np.atleast_1d(self.lengthscales)))
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be > 0")
        if not all(ls > 0 for ls in self.lengthscales):
            raise ValueError("lengthscales must be > 0")
        if self.nugget < NUGGET_FLOOR:
            object.__setattr__(self, "nugget", NUGGET_FLOOR)

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def to_log(self) -> np.ndarray:
        return np.log([self.signal_variance, *self.lengthscales, self.nugget])

    @classmethod
    def from_log(cls, theta) -> "KernelParams":
        theta = np.exp(np.asarray(theta, dtype=float))
        return cls(float(theta[0]), tuple(theta[1:-1]), float(theta[-1]))


def matern52_matrix(X1, X2, lengthscales, signal_variance=1.0) -> np.ndarray:
    """Matern 5/2 cross-covariance between the rows of X1 and X2."""
    ls = np.asarray(lengthscales, dtype=float)
    A = np.atleast_2d(X1) / ls
    B = np.atleast_2d(X2) / ls
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    r = np.sqrt(np.maximum(sq, 0.0))
    return signal_variance * (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * np.exp(-SQRT5 * r)


def matern52(x, x2, params: KernelParams) -> float:
    """k(x, x') = s2 (1 + sqrt5 r + 5 r^2/3) exp(-sqrt5 r), r the ARD-scaled distance."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.size != params.dim or x2.size != params.dim:
        raise ValueError("point dimension does not match the lengthscales")
    r = math.sqrt(float(np.sum(((x - x2) / np.asarray(params.lengthscales)) ** 2)))
    return params.signal_variance * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0) * math.exp(-SQRT5 * r)


@dataclass(frozen=True)
class Standardizer:
    mean: float
    std: float

    @classmethod
    def fit(cls, y) -> "Standardizer":
        y = np.asarray(y, dtype=float)
        if y.size == 0:
            return cls(0.0, 1.0)
        std = float(np.std(y))
        return cls(float(np.mean(y)), std if std > 0 else 1.0)

    def transform(self, y):
        return (np.asarray(y, dtype=float) - self.mean) / self.std

    def inverse(self, z):
        return np.asarray(z, dtype=float) * self.std + self.mean


def _factor(K):
    """Cholesky with diagonal jitter escalation; returns (L, jitter) or raises."""
    try:
        return cholesky(K, lower=True, check_finite=False), 0.0
    except (LinAlgError, ValueError):
        pass
    jitter = JITTER_START
    n = K.shape[0]
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return cholesky(K + jitter * np.eye(n), lower=True, check_finite=False), jitter
        except (LinAlgError, ValueError):
            jitter *= 10.0
    raise LinAlgError("covariance not positive definite after jitter escalation")


def _lml(Z, u, params: KernelParams) -> float:
    n = Z.shape[0]
    K = matern52_matrix(Z, Z, params.lengthscales, params.signal_variance)
    K[np.diag_indices(n)] += params.nugget
    try:
        L, _ = _factor(K)
    except LinAlgError:
        return -np.inf
    alpha = cho_solve((L, True), u, check_finite=False)
    return float(-0.5 * u @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi))


@dataclass
class GpModel:
    """Fitted GP.  ``Z``/``u`` are the scaled inputs and standardized targets."""

    Z: np.ndarray
    u: np.ndarray
    params: KernelParams
    input_lower: np.ndarray
    input_upper: np.ndarray
    standardizer: Standardizer
    log_likelihood: float = float("nan")
    config: dict = field(default_factory=dict)
    L: np.ndarray = field(init=False, repr=False)
    alpha: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        self.u = np.asarray(self.u, dtype=float).ravel()
        self.input_lower = np.asarray(self.input_lower, dtype=float)
        self.input_upper = np.asarray(self.input_upper, dtype=float)
        n = self.Z.shape[0]
        K = matern52_matrix(self.Z, self.Z, self.params.lengthscales, self.params.signal_variance)
        K[np.diag_indices(n)] += self.params.nugget
        try:
            self.L, jitter = _factor(K)
        except LinAlgError as exc:
            cond = np.linalg.cond(K)
            raise GpFitError(f"covariance factorization failed (condition ~ {cond:.3g})") from exc
        if jitter:
            logger.debug("GP factorization needed jitter %.1e", jitter)
        self.alpha = cho_solve((self.L, True), self.u, check_finite=False)

    @property
    def dim(self) -> int:
        return self.Z.shape[1]

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    def scale(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"query dimension {X.shape[1]} != model dimension {self.dim}")
        return (X - self.input_lower) / (self.input_upper - self.input_lower)

    def mean_scaled(self, Zq) -> np.ndarray:
        """Posterior mean only, in scaled/standardized units."""
        Zq = np.atleast_2d(np.asarray(Zq, dtype=float))
        Ks = matern52_matrix(Zq, self.Z, self.params.lengthscales, self.params.signal_variance)
        return Ks @ self.alpha

    def mean_and_gradient_scaled(self, Zq):
        """Posterior mean and its gradient w.r.t. the scaled query inputs."""
        Zq = np.atleast_2d(np.asarray(Zq, dtype=float))
        ls = np.asarray(self.params.lengthscales)
        diff = (Zq[:, None, :] - self.Z[None, :, :]) / ls  # (m, n, d)
        r = np.sqrt(np.sum(diff * diff, axis=2))
        e = np.exp(-SQRT5 * r)
        s2 = self.params.signal_variance
        Ks = s2 * (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * e
        # dk/dz = -(5/3) s2 (1 + sqrt5 r) exp(-sqrt5 r) (z - z')/l^2
        dK = (-(5.0 / 3.0) * s2 * (1.0 + SQRT5 * r) * e)[:, :, None] * diff / ls
        return Ks @ self.alpha, np.einsum("mnd,n->md", dK, self.alpha)

    def predict_scaled(self, Zq):
        """Posterior mean and latent variance in scaled/standardized units."""
        Zq = np.atleast_2d(np.asarray(Zq, dtype=float))
        if Zq.shape[1] != self.dim:
            raise ValueError(f"query dimension {Zq.shape[1]} != model dimension {self.dim}")
        Ks = matern52_matrix(Zq, self.Z, self.params.lengthscales, self.params.signal_variance)
        mean = Ks @ self.alpha
        v = solve_triangular(self.L, Ks.T, lower=True, check_finite=False)
        var = self.params.signal_variance - np.sum(v * v, axis=0)
        if np.any(var < -1e-10 * max(1.0, self.params.signal_variance)):
            warnings.warn("negative posterior variance clamped to 0", stacklevel=2)
        return mean, np.maximum(var, 0.0)

    def predict(self, X):
        """Posterior mean and latent variance in data units."""
        mean, var = self.predict_scaled(self.scale(X))
        s = self.standardizer
        return s.inverse(mean), var * s.std ** 2

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "Z": self.Z.tolist(), "u": self.u.tolist(),
            "params": {"signal_variance": self.params.signal_variance,
                       "lengthscales": list(self.params.lengthscales),
                       "nugget": self.params.nugget},
            "input_lower": self.input_lower.tolist(), "input_upper": self.input_upper.tolist(),
            "standardizer": {"mean": self.standardizer.mean, "std": self.standardizer.std},
            "log_likelihood": self.log_likelihood,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d) -> "GpModel":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"not a GP model document (schema {d.get('schema')!r})")
        p = d["params"]
        return cls(np.array(d["Z"]), np.array(d["u"]),
                   KernelParams(p["signal_variance"], tuple(p["lengthscales"]), p["nugget"]),
                   np.array(d["input_lower"]), np.array(d["input_upper"]),
                   Standardizer(**d["standardizer"]), d.get("log_likelihood", float("nan")),
                   d.get("config", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GpModel":
        return cls.from_dict(json.loads(text))


def log_marginal_likelihood(model: GpModel, params: KernelParams | None = None) -> float:
    """Gaussian log evidence of the model's standardized targets; -inf if K is not PD."""
    return _lml(model.Z, model.u, params or model.params)


@dataclass(frozen=True)
class GpConfig:
    restarts: int = 8
    seed: int = 0
    lengthscale_bounds: tuple[float, float] = (1e-2, 1e2)
    signal_variance_bounds: tuple[float, float] = (1e-2, 1e4)
    nugget_bounds: tuple[float, float] = (1e-10, 1e-1)
    max_evals_per_param: int = 300


def lhs_unit(n: int, d: int, rng) -> np.ndarray:
    U = np.empty((n, d))
    for j in range(d):
        U[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return U


def multistart_minimize(objective, lower, upper, restarts, seed, first=None, max_evals=None,
                        xatol=1e-4, fatol=1e-9):
    """Bounded Nelder-Mead from LHS starts; best by (value, start index).

    Returns (x, value, results) where ``results`` lists every arm's result.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rng = np.random.default_rng(seed)
    starts = list(lower + lhs_unit(restarts, lower.size, rng) * (upper - lower))
    if first is not None:
        starts = [np.clip(np.asarray(first, dtype=float), lower, upper)] + starts[:-1]
    bounds = list(zip(lower, upper))
    opts = {"xatol": xatol, "fatol": fatol, "maxfev": max_evals or 300 * lower.size}
    results = []
    for x0 in starts:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(objective, x0, method="Nelder-Mead", bounds=bounds, options=opts)
        results.append(res)
    order = sorted(range(len(results)),
                   key=lambda i: (results[i].fun if np.isfinite(results[i].fun) else np.inf, i))
    best = results[order[0]]
    return np.clip(best.x, lower, upper), float(best.fun), results


def _dedupe(Z, y):
    keep = []
    for i in range(Z.shape[0]):
        if all(np.max(np.abs(Z[i] - Z[j])) >= 1e-10 for j in keep):
            keep.append(i)
    if len(keep) < Z.shape[0]:
        warnings.warn(f"dropped {Z.shape[0] - len(keep)} duplicate training rows", stacklevel=3)
    return Z[keep], y[keep]


def fit_gp(X, y, config: GpConfig | None = None, input_bounds=None,
           params: KernelParams | None = None) -> GpModel:
    """Fit a GP to (X, y).

    ``input_bounds`` = (lower, upper) sets the unit-cube scaling (defaults to
    the data range).  Passing ``params`` skips hyperparameter optimization.
    """
    config = config or GpConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError("X and y row counts differ")
    if y.size < 2 and params is None:
        raise ValueError("need at least 2 training points to fit hyperparameters")
    if input_bounds is None:
        lo, hi = X.min(axis=0), X.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in input_bounds)
    Z = (X - lo) / (hi - lo)
    Z, y = _dedupe(Z, y)
    stdz = Standardizer.fit(y)
    u = stdz.transform(y)
    d = Z.shape[1]

    if params is None:
        lower = np.log([config.signal_variance_bounds[0]] + [config.lengthscale_bounds[0]] * d
                       + [config.nugget_bounds[0]])
        upper = np.log([config.signal_variance_bounds[1]] + [config.lengthscale_bounds[1]] * d
                       + [config.nugget_bounds[1]])

        def objective(theta):
            value = _lml(Z, u, KernelParams.from_log(theta))
            return -value if np.isfinite(value) else 1e25

        theta, value, _ = multistart_minimize(
            objective, lower, upper, config.restarts, config.seed,
            max_evals=config.max_evals_per_param * lower.size)
        if value >= 1e25:
            raise GpFitError("no restart produced a factorizable covariance")
        params = KernelParams.from_log(theta)
    cfg = {"restarts": config.restarts, "seed": config.seed}
    return GpModel(Z, u, params, lo, hi, stdz, _lml(Z, u, params), cfg)


def cross_val_r2(X, y, folds: int = 5, seed: int = 0, config: GpConfig | None = None,
                 input_bounds=None) -> float:
    """Pooled k-fold cross-validated R^2 of GP predictions."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    order = np.random.default_rng(seed).permutation(y.size)
    pred = np.empty_like(y)
    for k in range(folds):
        test = order[k::folds]
        train = np.setdiff1d(order, test)
        model = fit_gp(X[train], y[train], config, input_bounds)
        pred[test] = model.predict(X[test])[0]
    return float(1.0 - np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2))
