"""Input-mapping calibration: an affine map from the HF to the LF input space.

Everything here works in scaled coordinates: HF inputs scaled to the unit cube
by the HF window, mapped points expressed in the LF surrogate's unit-cube
coordinates, and outputs standardized by the LF surrogate.  The map is
``G = X_HF @ A.T + b``; mapped points are not clamped to the LF window.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .gp import GpModel, lhs_unit

logger = logging.getLogger(__name__)

SCHEMA = "hetmfgp.imc/1"


@dataclass(frozen=True)
class AffineMap:
    A: np.ndarray  # (d_lf, d_hf)
    b: np.ndarray  # (d_lf,)
    output: str = ""

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if b.size != A.shape[0]:
            raise ValueError(f"b has {b.size} entries, A has {A.shape[0]} rows")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("map entries must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def d_in(self) -> int:
        return self.A.shape[1]

    @property
    def d_out(self) -> int:
        return self.A.shape[0]

    @classmethod
    def nominal(cls, d_lf: int, d_hf: int, output: str = "") -> "AffineMap":
        """Identity on the shared leading coordinates, zeros elsewhere."""
        return cls(np.eye(d_lf, d_hf), np.zeros(d_lf), output)

    @classmethod
    def from_vector(cls, beta, d_lf: int, d_hf: int, output: str = "") -> "AffineMap":
        beta = np.asarray(beta, dtype=float)
        return cls(beta[: d_lf * d_hf].reshape(d_lf, d_hf), beta[d_lf * d_hf:], output)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.A.ravel(), self.b])

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist(), "output": self.output}

    @classmethod
    def from_dict(cls, d) -> "AffineMap":
        return cls(np.array(d["A"]), np.array(d["b"]), d.get("output", ""))


def apply_map(amap: AffineMap, X_scaled) -> np.ndarray:
    """Pseudo LF inputs G (N x d_lf) for scaled HF inputs (N x d_hf)."""
    X = np.atleast_2d(np.asarray(X_scaled, dtype=float))
    if X.shape[1] != amap.d_in:
        raise ValueError(f"inputs have {X.shape[1]} columns, map expects {amap.d_in}")
    return X @ amap.A.T + amap.b


def regularization(amap: AffineMap, nominal: AffineMap) -> float:
    """Frobenius norm of A - A0 plus Euclidean norm of b - b0."""
    return float(np.linalg.norm(amap.A - nominal.A) + np.linalg.norm(amap.b - nominal.b))


def imc_loss(amap: AffineMap, X_scaled, y, lf_surrogate: GpModel, lam: float,
             nominal: AffineMap | None = None) -> float:
    """Squared misfit of the LF surrogate mean at the mapped points, plus penalty.

    ``y`` is in data units; residuals are standardized by the surrogate.
    """
    nominal = nominal or AffineMap.nominal(amap.d_out, amap.d_in)
    G = apply_map(amap, X_scaled)
    resid = lf_surrogate.standardizer.transform(y) - lf_surrogate.mean_scaled(G)
    return float(resid @ resid) + lam * regularization(amap, nominal)


@dataclass(frozen=True)
class ImcConfig:
    lam: float = 0.01
    nominal: AffineMap | None = None
    n_iter: int = 500
    tol: float = 1e-8
    seed: int = 0
    restarts: int = 4
    perturbation: float = 0.5
    optimizer: str = "lbfgs"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class ImcResult:
    map: AffineMap
    loss_trace: list = field(default_factory=list)  # best-so-far per iteration
    step_distances: list = field(default_factory=list)  # ||beta_n - beta_{n-1}||
    final_loss: float = float("nan")
    nominal_loss: float = float("nan")
    n_evaluations: int = 0
    converged: bool = False
    fallback_to_nominal: bool = False
    lam: float = 0.0
    nominal: AffineMap | None = None

    def to_json(self) -> str:
        nominal = self.nominal or AffineMap.nominal(self.map.d_out, self.map.d_in)
        return json.dumps({
            "schema": SCHEMA,
            "map": self.map.to_dict(),
            "nominal": nominal.to_dict(),
            "lam": self.lam,
            "loss_trace": self.loss_trace,
            "step_distances": self.step_distances,
            "final_loss": self.final_loss,
            "nominal_loss": self.nominal_loss,
            "n_evaluations": self.n_evaluations,
            "converged": self.converged,
            "fallback_to_nominal": self.fallback_to_nominal,
        }, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ImcResult":
        d = json.loads(text)
        if d.get("schema") != SCHEMA:
            raise ValueError("not an IMC result document")
        return cls(AffineMap.from_dict(d["map"]), d["loss_trace"], d["step_distances"],
                   d["final_loss"], d["nominal_loss"], d["n_evaluations"], d["converged"],
                   d["fallback_to_nominal"], d["lam"], AffineMap.from_dict(d["nominal"]))


def _nelder_mead_arm(objective, gradient, x0, maxiter, tol, callback):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return minimize(objective, x0, method="Nelder-Mead", callback=callback,
                        options={"maxiter": maxiter, "xatol": tol, "fatol": tol,
                                 "adaptive": True})


def _lbfgs_arm(objective, gradient, x0, maxiter, tol, callback):
    return minimize(objective, x0, jac=gradient, method="L-BFGS-B", callback=callback,
                    options={"maxiter": maxiter, "ftol": tol, "gtol": tol})


# each arm: (objective, gradient, x0, maxiter, tol, callback) -> OptimizeResult
OPTIMIZERS = {"lbfgs": _lbfgs_arm, "nelder-mead": _nelder_mead_arm}


def fit_imc(X_scaled, y, lf_surrogate: GpModel, config: ImcConfig | None = None,
            output: str = "") -> ImcResult:
    """Calibrate the affine map by multi-start local search.

    Arm 0 starts at the nominal map; the others at LHS perturbations of it
    (half-width ``perturbation`` per parameter).  One iteration is one step of
    the local optimizer; the iteration budget ``n_iter`` is shared between
    arms.  The search stops early once the best loss falls below ``tol`` or an
    arm improves the best loss by less than ``tol``.
    """
    config = config or ImcConfig()
    X = np.atleast_2d(np.asarray(X_scaled, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    d_hf, d_lf = X.shape[1], lf_surrogate.dim
    n_params = d_lf * (d_hf + 1)
    if X.shape[0] < d_lf * d_hf / 2:
        warnings.warn(f"only {X.shape[0]} HF points for {n_params} map parameters; "
                      "the fit is under-determined", stacklevel=2)
    nominal = config.nominal or AffineMap.nominal(d_lf, d_hf, output)
    beta0 = nominal.to_vector()
    u = lf_surrogate.standardizer.transform(y)
    n_evals = 0

    def objective(beta):
        nonlocal n_evals
        n_evals += 1
        A = beta[: d_lf * d_hf].reshape(d_lf, d_hf)
        b = beta[d_lf * d_hf:]
        resid = u - lf_surrogate.mean_scaled(X @ A.T + b)
        reg = np.linalg.norm(A - nominal.A) + np.linalg.norm(b - nominal.b)
        return float(resid @ resid) + config.lam * reg

    def gradient(beta):
        A = beta[: d_lf * d_hf].reshape(d_lf, d_hf)
        b = beta[d_lf * d_hf:]
        mean, dmean = lf_surrogate.mean_and_gradient_scaled(X @ A.T + b)
        w = -2.0 * (u - mean)  # d(loss)/d(mean)
        gG = w[:, None] * dmean  # (N, d_lf)
        gA = gG.T @ X
        gb = gG.sum(axis=0)
        dA, db = A - nominal.A, b - nominal.b
        nA, nb = np.linalg.norm(dA), np.linalg.norm(db)
        if nA > 0:
            gA = gA + config.lam * dA / nA
        if nb > 0:
            gb = gb + config.lam * db / nb
        return np.concatenate([gA.ravel(), gb])

    nominal_loss = objective(beta0)
    best = {"x": beta0.copy(), "f": nominal_loss}
    trace, steps = [], []
    prev = {"x": beta0.copy()}

    def callback(xk, *args):
        f = objective(xk)
        if f < best["f"]:
            best["x"], best["f"] = xk.copy(), f
        trace.append(best["f"])
        steps.append(float(np.linalg.norm(xk - prev["x"])))
        prev["x"] = xk.copy()

    try:
        arm = OPTIMIZERS[config.optimizer]
    except KeyError:
        raise ValueError(f"unknown optimizer {config.optimizer!r}") from None
    rng = np.random.default_rng(config.seed)
    offsets = config.perturbation * (2.0 * lhs_unit(max(config.restarts - 1, 1), n_params, rng) - 1.0)
    starts = [beta0] + [beta0 + off for off in offsets[: config.restarts - 1]]
    per_arm = max(1, config.n_iter // len(starts))
    converged = False
    for k, x0 in enumerate(starts):
        remaining = config.n_iter - len(trace)
        if remaining <= 0:
            break
        before = best["f"]
        arm(objective, gradient, x0, min(per_arm, remaining), config.tol, callback)
        logger.debug("IMC arm %d: best loss %.6g", k, best["f"])
        if best["f"] <= config.tol or (k > 0 and before - best["f"] < config.tol):
            converged = True
            break
    # polish from the incumbent with whatever budget is left
    remaining = config.n_iter - len(trace)
    if remaining > 0 and not best["f"] <= config.tol:
        res = arm(objective, gradient, best["x"], remaining, config.tol, callback)
        converged = converged or bool(res.success)

    fallback = not best["f"] < nominal_loss
    if fallback:
        warnings.warn("IMC search did not improve on the nominal map", stacklevel=2)
        best = {"x": beta0, "f": nominal_loss}
    amap = AffineMap.from_vector(best["x"], d_lf, d_hf, output)
    return ImcResult(amap, trace, steps, best["f"], nominal_loss, n_evals, converged,
                     fallback, config.lam, nominal)
