"""Accuracy metrics, correlations, Sobol indices and melt-pool ellipses."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .doe import ParameterWindow, lhs_sample


def _pair(y, yhat):
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.size != yhat.size:
        raise ValueError("truth and prediction lengths differ")
    return y, yhat


def r_squared(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    if y.size < 2:
        raise ValueError("r_squared needs at least 2 points")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        raise ValueError("r_squared is undefined for constant truth values")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def relative_l2(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    norm = float(np.linalg.norm(y))
    if norm == 0:
        raise ValueError("relative L2 is undefined for an all-zero truth vector")
    return float(np.linalg.norm(y - yhat)) / norm


def sigma_avg(variances) -> float:
    v = np.asarray(variances, dtype=float).ravel()
    if np.any(v < 0):
        raise ValueError("variances must be non-negative")
    return math.sqrt(float(np.mean(v)))


@dataclass
class MetricsReport:
    r_squared: float
    relative_l2: float
    sigma_avg: float
    n_points: int
    output: str = ""
    seeds: list = field(default_factory=list)  # set when averaged over repeats

    @classmethod
    def evaluate(cls, y, mean, var, output: str = "", seed=None) -> "MetricsReport":
        return cls(r_squared(y, mean), relative_l2(y, mean), sigma_avg(var), len(y), output,
                   [] if seed is None else [seed])

    @classmethod
    def average(cls, reports) -> "MetricsReport":
        reports = list(reports)
        if not reports:
            raise ValueError("nothing to average")
        seeds = [s for r in reports for s in r.seeds]
        return cls(float(np.mean([r.r_squared for r in reports])),
                   float(np.mean([r.relative_l2 for r in reports])),
                   float(np.mean([r.sigma_avg for r in reports])),
                   reports[0].n_points, reports[0].output, seeds)

    def to_dict(self) -> dict:
        return asdict(self)


def pearson(X, y) -> np.ndarray:
    """Sample Pearson coefficient of y with each column of X; NaN for constant columns."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError("X and y row counts differ")
    if y.size < 3:
        raise ValueError("pearson needs at least 3 points")
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    denom = np.sqrt(np.sum(Xc * Xc, axis=0) * np.sum(yc * yc))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (Xc.T @ yc) / denom
    return np.where(denom > 0, r, np.nan)


# --------------------------------------------------------------------------
# Sobol indices

@dataclass
class SobolIndices:
    names: list
    S1: list
    ST: list
    n: int
    seed: int
    # indices below zero are kept as estimated; flagged here
    negative: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def sobol_indices(predictor, window: ParameterWindow, n: int, seed: int) -> SobolIndices:
    """First-order and total Sobol indices by the Saltelli pick-freeze scheme.

    ``predictor`` maps an (m, d) array in window units to m outputs.  A and B
    are independent Latin hypercubes; (d + 2) * n predictor evaluations are
    made.  S1 uses the B-based estimator and ST the Jansen form.
    """
    if n < 256 or n & (n - 1):
        raise ValueError("n must be a power of two >= 256")
    d = window.dim
    seq = np.random.SeedSequence(seed)
    sa, sb = (int(s.generate_state(1)[0]) for s in seq.spawn(2))
    A = lhs_sample(window, n, sa).points
    B = lhs_sample(window, n, sb).points
    fA = np.asarray(predictor(A), dtype=float).ravel()
    fB = np.asarray(predictor(B), dtype=float).ravel()
    var = float(np.var(np.concatenate([fA, fB])))
    if not var > 0:
        raise ValueError("output variance is zero; Sobol indices are undefined")
    S1, ST = [], []
    for i in range(d):
        ABi = A.copy()
        ABi[:, i] = B[:, i]
        fABi = np.asarray(predictor(ABi), dtype=float).ravel()
        S1.append(float(np.mean(fB * (fABi - fA)) / var))
        ST.append(float(0.5 * np.mean((fA - fABi) ** 2) / var))
    negative = [name for name, s in zip(window.names, S1) if s < 0]
    return SobolIndices(list(window.names), S1, ST, n, seed, negative)


# --------------------------------------------------------------------------
# melt-pool cross-section

@dataclass
class EllipseBoundary:
    mean: np.ndarray  # (k, 2) columns y, z
    upper: np.ndarray  # mu + 2 sigma
    lower: np.ndarray  # mu - 2 sigma

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["y_mean", "z_mean", "y_plus2sigma", "z_plus2sigma",
                    "y_minus2sigma", "z_minus2sigma"])
        for row in np.hstack([self.mean, self.upper, self.lower]):
            w.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()


def _half_ellipse(semi_y, semi_z, theta):
    return np.column_stack([semi_y * np.cos(theta), -semi_z * np.sin(theta)])


def ellipse_boundary(depth: float, width: float, sigma_depth: float = 0.0,
                     sigma_width: float = 0.0, resolution: int = 181) -> EllipseBoundary:
    """Lower half-ellipse with semi-axes (width/2, depth) and its +/-2 sigma bands."""
    if not (depth > 0 and width > 0):
        raise ValueError("predicted depth and width must be positive")
    if sigma_depth < 0 or sigma_width < 0:
        raise ValueError("standard deviations must be non-negative")
    theta = np.linspace(0.0, math.pi, resolution)
    mean = _half_ellipse(0.5 * width, depth, theta)
    upper = _half_ellipse(0.5 * (width + 2 * sigma_width), depth + 2 * sigma_depth, theta)
    lower = _half_ellipse(0.5 * max(width - 2 * sigma_width, 0.0),
                          max(depth - 2 * sigma_depth, 0.0), theta)
    return EllipseBoundary(mean, upper, lower)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
