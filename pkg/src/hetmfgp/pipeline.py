"""Staged batch pipeline: data, LF calibration, maps, models, metrics, sweeps.

Every stage writes its artifacts under one output directory and records a
content hash of the configuration it used in ``manifest.json``.  A stage
whose hash matches and whose files exist is loaded instead of recomputed,
unless ``force`` is set.  All files are written atomically.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import MetricsReport, dump_json, ellipse_boundary, sobol_indices
from .doe import (HF_WINDOW, Dataset, ParameterWindow, atomic_write, config_hash,
                  derive_seed, full_factorial, generate_dataset, lhs_sample, model_config)
from .gp import GpConfig, GpModel, fit_gp
from .imc import AffineMap, ImcConfig, ImcResult, fit_imc
from .mfgp import HetMfgpModel, MfgpConfig, fit_lf_gp, train_mfgp
from .thermal import (CalibrationResult, GridSpec, HfInput, HfModel, LaserParams, LfModel,
                      MaterialProperties, PowderStream, calibrate_lf)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
OUTPUTS = ("depth", "width")


class StageError(RuntimeError):
    """Failure inside a named pipeline stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class PipelineConfig:
    n_hf: int = 20
    n_lf: int = 20
    lam: float = 0.01
    seed: int = 0
    repeats: int = 10
    n_test: int = 100
    nodes: int = 64
    grid_samples: int = 64
    gp_restarts: int = 8
    imc_restarts: int = 4
    imc_iterations: int = 500
    sobol_n: int = 4096
    window: ParameterWindow = HF_WINDOW
    material: MaterialProperties = field(default_factory=MaterialProperties.in625)
    hf_laser: LaserParams = LaserParams(0.75e-3, 0.35)
    lf_laser: LaserParams = LaserParams(0.75e-3, 0.4, 0.5)  # calibration start
    powder: PowderStream = PowderStream()
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        if self.window.names != HF_WINDOW.names:
            raise ValueError(f"window must list {HF_WINDOW.names} in that order")
        if self.n_hf < 2:
            raise ValueError("n_hf must be >= 2")
        if self.n_lf < 0:
            raise ValueError("n_lf must be >= 0")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.n_test < 2:
            raise ValueError("n_test must be >= 2")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")

    @property
    def lf_window(self) -> ParameterWindow:
        return self.window.subset(("P", "v"))

    @property
    def grid(self) -> GridSpec:
        return GridSpec(samples=self.grid_samples)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = self.window.to_dict()
        return d

    @classmethod
    def from_dict(cls, d) -> "PipelineConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "window" in d:
            d["window"] = ParameterWindow.from_dict(d["window"])
        if "material" in d:
            d["material"] = MaterialProperties(**d["material"])
        for key in ("hf_laser", "lf_laser"):
            if key in d:
                d[key] = LaserParams(**d[key])
        if "powder" in d:
            d["powder"] = PowderStream(**d["powder"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


class Pipeline:
    def __init__(self, config: PipelineConfig, out, force: bool = False):
        self.cfg = config
        self.out = Path(out)
        self.force = force
        self._hf_cache: dict = {}
        self._manifest_path = self.out / "manifest.json"

    # -- bookkeeping -------------------------------------------------------
    def _manifest(self) -> dict:
        if self._manifest_path.exists():
            return json.loads(self._manifest_path.read_text())
        return {}

    def _fresh(self, stage: str, key: str, paths) -> bool:
        if self.force:
            return False
        return self._manifest().get(stage) == key and all(Path(p).exists() for p in paths)

    def _stamp(self, stage: str, key: str) -> None:
        m = self._manifest()
        m[stage] = key
        atomic_write(self._manifest_path, dump_json(m))

    def _hf_model(self) -> HfModel:
        c = self.cfg
        return HfModel(c.material, c.hf_laser, c.powder, c.nodes)

    def _hf_data(self, design) -> Dataset:
        return generate_dataset(design, self._hf_model(), grid=self.cfg.grid, cache=self._hf_cache)

    # -- stages ------------------------------------------------------------
    def _calibration_key(self) -> str:
        c = self.cfg
        return config_hash({"hf": model_config(self._hf_model()), "lf_start": c.lf_laser,
                            "window": c.window.to_dict(), "grid": c.grid_samples})

    def calibrate(self) -> CalibrationResult:
        """Fit the LF laser (phi, alpha) on the 3 x 3 P-v factorial."""
        path = self.out / "calibration" / "calibration.json"
        key = self._calibration_key()
        if self._fresh("calibrate-lf", key, [path]):
            return CalibrationResult(**json.loads(path.read_text())["result"])
        c = self.cfg
        try:
            design = full_factorial(c.window, [3, 3, 1, 1, 1])
            hf = self._hf_data(design)
            inputs = [HfInput.from_table_units(*r) for r in design.points]
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                result = calibrate_lf(inputs, hf.depth, hf.width, c.material, c.lf_laser,
                                      nodes=c.nodes, grid=c.grid)
            for w in caught:
                logger.warning("calibrate-lf: %s", w.message)
        except Exception as exc:
            raise StageError("calibrate-lf", str(exc)) from exc
        hf.save(self.out / "calibration" / "factorial_hf.csv")
        atomic_write(path, dump_json({"result": asdict(result), "config_hash": key}))
        self._stamp("calibrate-lf", key)
        return result

    def lf_laser(self) -> LaserParams:
        return self.calibrate().laser(self.cfg.lf_laser)

    def _data_paths(self, n_hf=None, n_lf=None):
        c = self.cfg
        n_hf = c.n_hf if n_hf is None else n_hf
        n_lf = c.n_lf if n_lf is None else n_lf
        d = self.out / "data"
        hf = [d / f"hf_train_n{n_hf}_r{k}.csv" for k in range(c.repeats)]
        lf = [d / f"lf_train_n{n_lf}_r{k}.csv" for k in range(c.repeats)] if n_lf else []
        return d / f"test_n{c.n_test}.csv", hf, lf

    def gen_data(self, n_hf=None, n_lf=None):
        """Test set plus per-repeat HF and LF training sets. Returns (test, hf, lf)."""
        c = self.cfg
        n_hf = c.n_hf if n_hf is None else n_hf
        n_lf = c.n_lf if n_lf is None else n_lf
        test_p, hf_p, lf_p = self._data_paths(n_hf, n_lf)
        stage = f"gen-data:{n_hf}:{n_lf}"
        key = config_hash({"cal": self._calibration_key(), "seed": c.seed, "repeats": c.repeats,
                           "n_test": c.n_test, "nodes": c.nodes})
        if self._fresh(stage, key, [test_p, *hf_p, *lf_p]):
            return (Dataset.load(test_p), [Dataset.load(p) for p in hf_p],
                    [Dataset.load(p) for p in lf_p])
        lf_laser = self.lf_laser()
        try:
            test = self._hf_data(lhs_sample(c.window, c.n_test, derive_seed(c.seed, "test")))
            hf = [self._hf_data(lhs_sample(c.window, n_hf, derive_seed(c.seed, "hf_train", k)))
                  for k in range(c.repeats)]
            lf_model = LfModel(c.material, lf_laser, c.nodes)
            lf = [generate_dataset(lhs_sample(c.lf_window, n_lf,
                                              derive_seed(c.seed, "lf_train", k)),
                                   lf_model, grid=c.grid)
                  for k in range(c.repeats)] if n_lf else []
        except Exception as exc:
            raise StageError("gen-data", str(exc)) from exc
        if not n_lf:
            logger.info("gen-data: N_LF = 0, single-fidelity mode")
        test.save(test_p)
        for ds, p in zip(hf, hf_p):
            ds.save(p)
        for ds, p in zip(lf, lf_p):
            ds.save(p)
        self._stamp(stage, key)
        return test, hf, lf

    def _imc_config(self, k: int, lam: float) -> ImcConfig:
        c = self.cfg
        return ImcConfig(lam=lam, n_iter=c.imc_iterations, restarts=c.imc_restarts,
                         seed=derive_seed(c.seed, "imc", k))

    def _gp_config(self, stage: str, k: int) -> GpConfig:
        return GpConfig(restarts=self.cfg.gp_restarts, seed=derive_seed(self.cfg.seed, stage, k))

    def fit_repeat(self, hf: Dataset, lf: Dataset | None, k: int, output: str,
                   lam: float | None = None):
        """LF GP, IMC map and Het-MFGP for one repeat. Returns (ImcResult | None, model)."""
        c = self.cfg
        lam = c.lam if lam is None else lam
        if lf is None or len(lf) == 0:
            amap = AffineMap.nominal(c.lf_window.dim, c.window.dim, output)
            model = train_mfgp(None, hf, amap, output, MfgpConfig(self._gp_config("mfgp", k),
                               seed=derive_seed(c.seed, "mfgp", k)),
                               hf_window=c.window, lf_window=c.lf_window)
            return None, model
        lf_gp = fit_lf_gp(lf, output, self._gp_config("gp", k), c.lf_window)
        imc = fit_imc(c.window.scale(hf.X), hf.output(output), lf_gp,
                      self._imc_config(k, lam), output)
        model = train_mfgp(lf, hf, imc.map, output,
                           MfgpConfig(self._gp_config("mfgp", k), seed=derive_seed(c.seed, "mfgp", k)),
                           lf_gp=lf_gp, hf_window=c.window, lf_window=c.lf_window)
        return imc, model

    def baseline_gp(self, hf: Dataset, k: int, output: str) -> GpModel:
        c = self.cfg
        return fit_gp(hf.X, hf.output(output), self._gp_config("gp", k),
                      input_bounds=(c.window.lower, c.window.upper))

    def _model_paths(self):
        m = self.out / "models"
        return {(o, k): (m / f"imc_{o}_r{k}.json", m / f"mfgp_{o}_r{k}.json", m / f"gp_{o}_r{k}.json")
                for o in OUTPUTS for k in range(self.cfg.repeats)}

    def _train_key(self) -> str:
        c = self.cfg
        return config_hash({"cal": self._calibration_key(), "seed": c.seed, "repeats": c.repeats,
                            "n_hf": c.n_hf, "n_lf": c.n_lf, "lam": c.lam,
                            "gp_restarts": c.gp_restarts, "imc": [c.imc_restarts, c.imc_iterations]})

    def fit_maps(self) -> dict:
        """IMC maps per output and repeat (written as part of training)."""
        self.train()
        out = {}
        for (o, k), (imc_p, _, _) in self._model_paths().items():
            out[(o, k)] = ImcResult.from_json(imc_p.read_text()) if imc_p.exists() else None
        return out

    def train(self) -> dict:
        """Het-MFGP and HF-only GP for every output and repeat."""
        paths = self._model_paths()
        key = self._train_key()
        needed = [p for (imc_p, mf_p, gp_p) in paths.values() for p in (mf_p, gp_p)]
        if self._fresh("train", key, needed):
            return {ok: (HetMfgpModel.from_json(mf_p.read_text()), GpModel.from_json(gp_p.read_text()))
                    for ok, (_, mf_p, gp_p) in paths.items()}
        _, hf_sets, lf_sets = self.gen_data()
        models = {}
        for (o, k), (imc_p, mf_p, gp_p) in paths.items():
            lf = lf_sets[k] if lf_sets else None
            try:
                imc, mf = self.fit_repeat(hf_sets[k], lf, k, o)
                gp = self.baseline_gp(hf_sets[k], k, o)
            except Exception as exc:
                raise StageError("train", f"output {o}, repeat {k}: {exc}") from exc
            if imc is not None:
                atomic_write(imc_p, imc.to_json() + "\n")
            atomic_write(mf_p, mf.to_json() + "\n")
            atomic_write(gp_p, gp.to_json() + "\n")
            models[(o, k)] = (mf, gp)
        self._stamp("train", key)
        return models

    def evaluate(self) -> dict:
        """Averaged test metrics of Het-MFGP and the HF-only GP per output."""
        test, _, _ = self.gen_data()
        models = self.train()
        result = {}
        try:
            for o in OUTPUTS:
                rows = {"mfgp": [], "gp": []}
                for k in range(self.cfg.repeats):
                    mf, gp = models[(o, k)]
                    seed = derive_seed(self.cfg.seed, "hf_train", k)
                    for name, model in (("mfgp", mf), ("gp", gp)):
                        mean, var = model.predict(test.X)
                        rows[name].append(MetricsReport.evaluate(test.output(o), mean, var, o, seed))
                result[o] = {name: {"mean": MetricsReport.average(r).to_dict(),
                                    "runs": [x.to_dict() for x in r]} for name, r in rows.items()}
        except Exception as exc:
            raise StageError("evaluate", str(exc)) from exc
        atomic_write(self.out / "metrics.json", dump_json(result))
        return result

    def predict(self, X, output: str, repeat: int = 0):
        mf, _ = self.train()[(output, repeat)]
        return mf.predict(X)

    def sobol(self, output: str = "depth", n: int | None = None, repeat: int = 0):
        mf, _ = self.train()[(output, repeat)]
        try:
            idx = sobol_indices(lambda X: mf.predict(X)[0], self.cfg.window,
                                n or self.cfg.sobol_n, derive_seed(self.cfg.seed, "sobol"))
        except Exception as exc:
            raise StageError("sobol", str(exc)) from exc
        atomic_write(self.out / f"sobol_{output}.json", dump_json(idx.to_dict()))
        return idx

    def ellipse(self, x, repeat: int = 0, resolution: int = 181):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        models = self.train()
        (d, vd), (w, vw) = (models[(o, repeat)][0].predict(x) for o in OUTPUTS)
        try:
            e = ellipse_boundary(float(d[0]), float(w[0]), float(np.sqrt(vd[0])),
                                 float(np.sqrt(vw[0])), resolution)
        except Exception as exc:
            raise StageError("ellipse", str(exc)) from exc
        atomic_write(self.out / "ellipse.csv", e.to_csv_text())
        return e

    def sweep(self, n_hf_list, n_lf_list, lam_list=None) -> list:
        """Averaged L2 and sigma_avg for every (N_HF, N_LF, lambda) cell.

        A failing cell is recorded with its error and the sweep continues.
        """
        c = self.cfg
        lam_list = list(lam_list) if lam_list else [c.lam]
        if not (n_hf_list and n_lf_list and lam_list):
            raise StageError("sweep", "sweep lists must be non-empty")
        rows = []
        for n_hf in n_hf_list:
            for n_lf in n_lf_list:
                for lam in lam_list:
                    try:
                        rows.extend(self._sweep_cell(int(n_hf), int(n_lf), float(lam)))
                    except Exception as exc:
                        logger.error("sweep cell (%s, %s, %s) failed: %s", n_hf, n_lf, lam, exc)
                        rows.extend({"n_hf": n_hf, "n_lf": n_lf, "lam": lam, "output": o,
                                     "mfgp_l2": "", "mfgp_sigma": "", "gp_l2": "",
                                     "gp_sigma": "", "status": f"error: {exc}"}
                                    for o in OUTPUTS)
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()})
        atomic_write(self.out / "sweep.csv", buf.getvalue())
        return rows

    def _sweep_cell(self, n_hf: int, n_lf: int, lam: float) -> list:
        c = replace(self.cfg, n_hf=n_hf, n_lf=n_lf, lam=lam)
        sub = Pipeline(c, self.out, self.force)
        sub._hf_cache = self._hf_cache
        test, hf_sets, lf_sets = sub.gen_data()
        rows = []
        for o in OUTPUTS:
            mf_r, gp_r = [], []
            for k in range(c.repeats):
                _, mf = sub.fit_repeat(hf_sets[k], lf_sets[k] if lf_sets else None, k, o)
                gp = sub.baseline_gp(hf_sets[k], k, o)
                for model, acc in ((mf, mf_r), (gp, gp_r)):
                    mean, var = model.predict(test.X)
                    acc.append(MetricsReport.evaluate(test.output(o), mean, var, o))
            mf_m, gp_m = MetricsReport.average(mf_r), MetricsReport.average(gp_r)
            rows.append({"n_hf": n_hf, "n_lf": n_lf, "lam": lam, "output": o,
                         "mfgp_l2": mf_m.relative_l2, "mfgp_sigma": mf_m.sigma_avg,
                         "gp_l2": gp_m.relative_l2, "gp_sigma": gp_m.sigma_avg, "status": "ok"})
        return rows
