"""Autoregressive (AR1) co-kriging over mapped HF inputs.

``y_HF(x) = rho * y_LF(g(x)) + gamma(g(x))`` with independent GP priors on
``y_LF`` and the discrepancy ``gamma``.  Training is recursive: the LF GP is
fitted first, then ``rho`` and the discrepancy hyperparameters maximise the
marginal likelihood of ``y_HF - rho * m_LF(g(x))``.  Both fidelities are
standardized with the LF standardizer so that ``rho`` compares like with like.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .doe import HF_WINDOW, LF_WINDOW, Dataset, ParameterWindow
from .gp import (GpConfig, GpModel, KernelParams, Standardizer, _lml, fit_gp,
                 multistart_minimize)
from .imc import AffineMap, apply_map

SCHEMA = "hetmfgp.mfgp/1"


class MfgpTrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class MfgpConfig:
    gp: GpConfig = field(default_factory=GpConfig)
    rho_bounds: tuple[float, float] = (-5.0, 5.0)
    restarts: int = 8
    seed: int = 0


@dataclass
class HetMfgpModel:
    lf_gp: GpModel | None
    discrepancy: GpModel  # inputs: mapped points in LF unit-cube coordinates
    rho: float
    map: AffineMap
    standardizer: Standardizer  # shared output scaling
    hf_lower: np.ndarray
    hf_upper: np.ndarray
    output: str = ""

    def __post_init__(self):
        if not math.isfinite(self.rho):
            raise ValueError("rho must be finite")
        if self.discrepancy.dim != self.map.d_out:
            raise ValueError("discrepancy GP dimension must equal the map output dimension")
        self.hf_lower = np.asarray(self.hf_lower, dtype=float)
        self.hf_upper = np.asarray(self.hf_upper, dtype=float)

    def mapped(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.map.d_in:
            raise ValueError(f"queries have {X.shape[1]} columns, expected {self.map.d_in}")
        return apply_map(self.map, (X - self.hf_lower) / (self.hf_upper - self.hf_lower))

    def predict(self, X):
        """Posterior mean and variance (data units) at HF-space queries."""
        G = self.mapped(X)
        mean_d, var_d = self.discrepancy.predict(G)  # LF-standardized units
        mean, var = mean_d, var_d
        if self.lf_gp is not None and self.rho != 0.0:
            m_lf, v_lf = self.lf_gp.predict_scaled(G)
            mean = mean + self.rho * m_lf
            var = var + self.rho ** 2 * v_lf
        s = self.standardizer
        return s.inverse(mean), np.maximum(var, 0.0) * s.std ** 2

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "output": self.output,
            "rho": self.rho,
            "map": self.map.to_dict(),
            "standardizer": {"mean": self.standardizer.mean, "std": self.standardizer.std},
            "hf_lower": self.hf_lower.tolist(), "hf_upper": self.hf_upper.tolist(),
            "lf_gp": None if self.lf_gp is None else self.lf_gp.to_dict(),
            "discrepancy": self.discrepancy.to_dict(),
        }

    @classmethod
    def from_dict(cls, d) -> "HetMfgpModel":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"not a Het-MFGP model document (schema {d.get('schema')!r})")
        lf = None if d["lf_gp"] is None else GpModel.from_dict(d["lf_gp"])
        return cls(lf, GpModel.from_dict(d["discrepancy"]), float(d["rho"]),
                   AffineMap.from_dict(d["map"]), Standardizer(**d["standardizer"]),
                   np.array(d["hf_lower"]), np.array(d["hf_upper"]), d.get("output", ""))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "HetMfgpModel":
        return cls.from_dict(json.loads(text))


def fit_lf_gp(lf_dataset: Dataset, output: str, config: GpConfig | None = None,
              window: ParameterWindow = LF_WINDOW) -> GpModel:
    return fit_gp(lf_dataset.X, lf_dataset.output(output), config,
                  input_bounds=(window.lower, window.upper))


def _discrepancy_gp(G, r, params: KernelParams, config: GpConfig) -> GpModel:
    d = G.shape[1]
    return GpModel(G, Standardizer.fit(r).transform(r), params, np.zeros(d), np.ones(d),
                   Standardizer.fit(r), config={"restarts": config.restarts, "seed": config.seed})


def train_mfgp(lf_dataset: Dataset | None, hf_dataset: Dataset, amap: AffineMap, output: str,
               config: MfgpConfig | None = None, lf_gp: GpModel | None = None,
               hf_window: ParameterWindow = HF_WINDOW,
               lf_window: ParameterWindow = LF_WINDOW) -> HetMfgpModel:
    """Fit the LF GP (unless given), then rho and the discrepancy GP.

    With no LF data the model reduces to a GP on the mapped HF inputs with
    ``rho = 0``.
    """
    config = config or MfgpConfig()
    if len(hf_dataset) < 2:
        raise MfgpTrainingError("need at least 2 HF training points")
    if amap.d_out != lf_window.dim or amap.d_in != hf_window.dim:
        raise MfgpTrainingError("map dimensions do not match the windows")
    y_hf = hf_dataset.output(output)
    G = apply_map(amap, hf_window.scale(hf_dataset.X))
    gp_cfg = GpConfig(**{**config.gp.__dict__, "seed": config.seed})

    no_lf = lf_gp is None and (lf_dataset is None or len(lf_dataset) == 0)
    if no_lf:
        stdz = Standardizer.fit(y_hf)
        unit = (np.zeros(G.shape[1]), np.ones(G.shape[1]))
        disc = fit_gp(G, stdz.transform(y_hf), gp_cfg, input_bounds=unit)
        return HetMfgpModel(None, disc, 0.0, amap, stdz, hf_window.lower_array,
                            hf_window.upper_array, output)

    if lf_gp is None:
        lf_gp = fit_lf_gp(lf_dataset, output, gp_cfg, lf_window)
    stdz = lf_gp.standardizer
    u = stdz.transform(y_hf)
    m = lf_gp.mean_scaled(G)
    n = u.size

    rho_ls = float(m @ u / (m @ m)) if m @ m > 0 else 0.0
    if np.linalg.norm(u - rho_ls * m) <= 1e-10 * max(np.linalg.norm(u), 1e-300):
        params = KernelParams(1.0, (1.0,) * G.shape[1], 0.0)
        disc = _discrepancy_gp(G, u - rho_ls * m, params, gp_cfg)
        return HetMfgpModel(lf_gp, disc, rho_ls, amap, stdz, hf_window.lower_array,
                            hf_window.upper_array, output)

    g = config.gp
    d = G.shape[1]
    lower = np.array([config.rho_bounds[0], math.log(g.signal_variance_bounds[0])]
                     + [math.log(g.lengthscale_bounds[0])] * d + [math.log(g.nugget_bounds[0])])
    upper = np.array([config.rho_bounds[1], math.log(g.signal_variance_bounds[1])]
                     + [math.log(g.lengthscale_bounds[1])] * d + [math.log(g.nugget_bounds[1])])

    def objective(p):
        r = u - p[0] * m
        scale = float(np.std(r))
        if not scale > 0:
            return 1e25
        value = _lml(G, (r - r.mean()) / scale, KernelParams.from_log(p[1:]))
        # likelihood of r itself: undo the standardization Jacobian
        value -= n * math.log(scale)
        return -value if np.isfinite(value) else 1e25

    first = np.concatenate([[np.clip(rho_ls, *config.rho_bounds)],
                            [0.0] + [0.0] * d + [math.log(1e-6)]])
    p, value, _ = multistart_minimize(objective, lower, upper, config.restarts, config.seed,
                                      first=first, max_evals=g.max_evals_per_param * lower.size)
    if value >= 1e25:
        raise MfgpTrainingError("no restart produced a valid discrepancy likelihood")
    rho = float(p[0])
    disc = _discrepancy_gp(G, u - rho * m, KernelParams.from_log(p[1:]), gp_cfg)
    return HetMfgpModel(lf_gp, disc, rho, amap, stdz, hf_window.lower_array,
                        hf_window.upper_array, output)


def mfgp_predict(model: HetMfgpModel, X):
    return model.predict(X)
