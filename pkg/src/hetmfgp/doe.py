"""Designs of experiments over the process window and evaluated datasets."""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .thermal import (GridSpec, HfInput, HfModel, LaserParams, LfModel, MaterialProperties,
                      PowderStream, lf_input_from_table_units, melt_pool_geometry)

# fixed per-stage offsets for deriving sub-seeds from one root seed
SEED_OFFSETS = {
    "hf_train": 1,
    "lf_train": 2,
    "test": 3,
    "gp": 4,
    "imc": 5,
    "mfgp": 6,
    "sobol": 7,
}


def derive_seed(root: int, stage: str, index: int = 0) -> int:
    """Deterministic 32-bit sub-seed for ``stage`` and repeat ``index``."""
    seq = np.random.SeedSequence([int(root), SEED_OFFSETS[stage], int(index)])
    return int(seq.generate_state(1)[0])


@dataclass(frozen=True)
class ParameterWindow:
    names: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    units: tuple[str, ...] = ()

    def __post_init__(self):
        d = len(self.names)
        if len(set(self.names)) != d:
            raise ValueError("parameter names must be unique")
        if len(self.lower) != d or len(self.upper) != d:
            raise ValueError("bounds must match the number of names")
        if self.units and len(self.units) != d:
            raise ValueError("units must match the number of names")
        for name, lo, hi in zip(self.names, self.lower, self.upper):
            if not lo < hi:
                raise ValueError(f"window for {name} needs lower < upper")

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def lower_array(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def upper_array(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    def subset(self, names) -> "ParameterWindow":
        idx = [self.names.index(n) for n in names]
        units = tuple(self.units[i] for i in idx) if self.units else ()
        return ParameterWindow(tuple(names), tuple(self.lower[i] for i in idx),
                               tuple(self.upper[i] for i in idx), units)

    def scale(self, X) -> np.ndarray:
        """Map window coordinates to the unit cube."""
        X = np.asarray(X, dtype=float)
        return (X - self.lower_array) / (self.upper_array - self.lower_array)

    def unscale(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        return self.lower_array + U * (self.upper_array - self.lower_array)

    def contains(self, X, tol: float = 1e-12) -> bool:
        X = np.atleast_2d(X)
        span = self.upper_array - self.lower_array
        return bool(np.all(X >= self.lower_array - tol * span)
                    and np.all(X <= self.upper_array + tol * span))

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower_array + self.upper_array)

    def to_dict(self) -> dict:
        return {"names": list(self.names), "lower": list(self.lower),
                "upper": list(self.upper), "units": list(self.units)}

    @classmethod
    def from_dict(cls, d) -> "ParameterWindow":
        return cls(tuple(d["names"]), tuple(float(v) for v in d["lower"]),
                   tuple(float(v) for v in d["upper"]), tuple(d.get("units", ())))


# process window, HF vector order
HF_WINDOW = ParameterWindow(
    names=("P", "v", "mdot", "gsh", "H"),
    lower=(700.0, 5.0, 3.0, 2.0, 3.0),
    upper=(1000.0, 10.0, 7.0, 5.0, 7.0),
    units=("W", "mm/s", "g/min", "dL/min", "mm"),
)
LF_WINDOW = HF_WINDOW.subset(("P", "v"))


@dataclass(frozen=True)
class Design:
    points: np.ndarray  # (n, d) in window units
    window: ParameterWindow
    seed: int | None
    kind: str  # "lhs" | "factorial"

    def __len__(self):
        return self.points.shape[0]


def lhs_sample(window: ParameterWindow, n: int, seed: int) -> Design:
    """Jittered random-permutation Latin hypercube."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    U = np.empty((n, window.dim))
    for j in range(window.dim):
        U[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return Design(window.unscale(U), window, seed, "lhs")


def full_factorial(window: ParameterWindow, levels) -> Design:
    if np.isscalar(levels):
        levels = [int(levels)] * window.dim
    if len(levels) != window.dim:
        raise ValueError("one level count per dimension required")
    axes = []
    for lo, hi, n in zip(window.lower, window.upper, levels):
        if n < 1:
            raise ValueError("levels must be >= 1")
        axes.append(np.array([0.5 * (lo + hi)]) if n == 1 else np.linspace(lo, hi, n))
    points = np.array(list(itertools.product(*axes)), dtype=float)
    return Design(points, window, None, "factorial")


# --------------------------------------------------------------------------
# datasets

HF_COLUMNS = ("P", "v", "mdot", "gsh", "H")
LF_COLUMNS = ("P", "v")


@dataclass
class Dataset:
    X: np.ndarray  # (n, d) in window units
    depth: np.ndarray  # m
    width: np.ndarray  # m
    fidelity: str  # "LF" | "HF"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(-1, self.dim_expected)
        self.depth = np.asarray(self.depth, dtype=float).ravel()
        self.width = np.asarray(self.width, dtype=float).ravel()
        n = self.X.shape[0]
        if self.depth.size != n or self.width.size != n:
            raise ValueError("input and output row counts differ")

    @property
    def dim_expected(self) -> int:
        if self.fidelity == "HF":
            return 5
        if self.fidelity == "LF":
            return 2
        raise ValueError(f"fidelity must be 'LF' or 'HF', got {self.fidelity!r}")

    @property
    def columns(self):
        return HF_COLUMNS if self.fidelity == "HF" else LF_COLUMNS

    def __len__(self):
        return self.X.shape[0]

    def output(self, name: str) -> np.ndarray:
        if name in ("depth", "delta"):
            return self.depth
        if name in ("width", "omega"):
            return self.width
        raise ValueError(f"unknown output {name!r}")

    def subset(self, rows) -> "Dataset":
        return Dataset(self.X[rows], self.depth[rows], self.width[rows],
                       self.fidelity, dict(self.provenance))

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(self.columns) + ["depth", "width"])
        for x, d, w in zip(self.X, self.depth, self.width):
            writer.writerow([f"{v:.17g}" for v in (*x, d, w)])
        return buf.getvalue()

    def save(self, path) -> None:
        """Write ``path`` (CSV) and ``path`` with ``.json`` suffix (provenance)."""
        path = Path(path)
        atomic_write(path, self.to_csv_text())
        meta = {"fidelity": self.fidelity, "provenance": self.provenance}
        atomic_write(path.with_suffix(".json"), json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Dataset":
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        fidelity = "HF" if tuple(header[:-2]) == HF_COLUMNS else "LF"
        if tuple(header[:-2]) not in (HF_COLUMNS, LF_COLUMNS) or header[-2:] != ["depth", "width"]:
            raise ValueError(f"unrecognised dataset header {header}")
        data = np.array(rows[1:], dtype=float).reshape(-1, len(header))
        provenance = {}
        meta_path = path.with_suffix(".json")
        if meta_path.exists():
            provenance = json.loads(meta_path.read_text())["provenance"]
        return cls(data[:, :-2], data[:, -2], data[:, -1], fidelity, provenance)


def atomic_write(path, text: str) -> None:
    """Write via a temporary file and rename, so failures leave no partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def config_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, default=_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _jsonable(o):
    if hasattr(o, "__dataclass_fields__"):
        return asdict(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def model_config(model) -> dict:
    cfg = {"kind": "HF" if isinstance(model, HfModel) else "LF",
           "material": asdict(model.material), "laser": asdict(model.laser),
           "nodes": model.nodes}
    if isinstance(model, HfModel):
        cfg["powder"] = asdict(model.powder)
    else:
        cfg["horizon_transits"] = model.horizon_transits
    return cfg


def to_model_input(row, fidelity: str):
    """Table-unit row -> HfInput (HF rows) or the LF (P, v) input."""
    if fidelity == "HF":
        return HfInput.from_table_units(*row)
    return lf_input_from_table_units(*row)


def generate_dataset(design: Design, model, mat: MaterialProperties | None = None,
                     laser: LaserParams | None = None, powder: PowderStream | None = None,
                     nodes: int = 64, grid: GridSpec | None = None,
                     cache: dict | None = None) -> Dataset:
    """Evaluate melt-pool geometry at every design row.

    ``model`` is ``"lf"``/``"hf"`` or a bound thermal model.  ``cache`` may be
    a dict shared across calls; it maps (config hash, row) to geometry.
    """
    if not isinstance(model, (LfModel, HfModel)):
        if str(model).lower() == "hf":
            model = HfModel(mat, laser, powder or PowderStream(), nodes)
        elif str(model).lower() == "lf":
            model = LfModel(mat, laser, nodes)
        else:
            raise ValueError(f"model must be 'lf' or 'hf', got {model!r}")
    fidelity = "HF" if isinstance(model, HfModel) else "LF"
    dim = 5 if fidelity == "HF" else 2
    points = np.asarray(design.points, dtype=float).reshape(-1, design.window.dim)
    if len(points) and points.shape[1] != dim:
        raise ValueError(f"{fidelity} model needs {dim}-D inputs, design has {points.shape[1]}")
    cfg = model_config(model)
    h = config_hash(cfg)
    depth = np.empty(len(points))
    width = np.empty(len(points))
    for i, row in enumerate(points):
        key = (h, tuple(row))
        if cache is not None and key in cache:
            geo = cache[key]
        else:
            try:
                geo = melt_pool_geometry(model, to_model_input(row, fidelity), grid=grid)
            except Exception as exc:
                raise RuntimeError(f"design row {i} ({row.tolist()}): {exc}") from exc
            if cache is not None:
                cache[key] = geo
        depth[i], width[i] = geo.depth, geo.width
    provenance = {"window": design.window.to_dict(), "seed": design.seed,
                  "design": design.kind, "model_config_hash": h}
    return Dataset(points, depth, width, fidelity, provenance)
