"""Analytical melt-pool thermal models and geometry extraction.

Two moving-source conduction models are provided:

* the low-fidelity Eagar-Tsai solution (Gaussian surface source on a
  semi-infinite plate), which depends on laser power and scan velocity only;
* a high-fidelity surface-disk model that superposes moving point-source
  Green's functions over the beam disk, with a laser term attenuated by the
  powder stream plus a heated-powder term.  Its powder submodel is a documented
  stand-in (see :class:`PowderStream`).

All quantities are SI.  Field points are given in the frame moving with the
source: the source centre sits at the origin, travels along +x, and the
substrate occupies z <= 0.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import kernels

logger = logging.getLogger(__name__)

# window unit -> SI factors, in HF vector order (P, v, mdot, gsh, H)
TABLE_TO_SI = {
    "P": 1.0,  # W
    "v": 1e-3,  # mm/s -> m/s
    "mdot": 1e-3 / 60.0,  # g/min -> kg/s
    "gsh": 1e-4 / 60.0,  # dL/min -> m^3/s
    "H": 1e-3,  # mm -> m
}


class ThermalDomainError(ValueError):
    """A field point where a thermal model cannot be evaluated."""


class PoolTruncatedError(RuntimeError):
    """The liquidus isotherm reaches the edge of the sampling grid."""


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class MaterialProperties:
    density: float  # kg/m^3
    specific_heat: float  # J/(kg K)
    diffusivity: float  # m^2/s
    conductivity: float  # W/(m K)
    liquidus_temperature: float = 1623.0  # K
    ambient_temperature: float = 300.0  # K

    def __post_init__(self):
        for name in ("density", "specific_heat", "diffusivity", "conductivity",
                     "liquidus_temperature", "ambient_temperature"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if self.liquidus_temperature <= self.ambient_temperature:
            raise ValueError("liquidus_temperature must exceed ambient_temperature")
        implied = self.conductivity / (self.density * self.specific_heat)
        if abs(self.diffusivity - implied) > 0.01 * implied:
            warnings.warn(
                f"diffusivity {self.diffusivity:.4g} differs from k/(rho c) = "
                f"{implied:.4g} by more than 1%", stacklevel=2)

    @classmethod
    def in625(cls, **overrides) -> "MaterialProperties":
        """IN625 with high-temperature averaged properties."""
        props = dict(density=8440.0, specific_heat=600.0, conductivity=20.0)
        props.update(overrides)
        denom = props["density"] * props["specific_heat"]
        props.setdefault("diffusivity", props["conductivity"] / denom if denom > 0 else 0.0)
        return cls(**props)


@dataclass(frozen=True)
class LaserParams:
    """Beam radius r_L, absorptivity, and the Gaussian width factor phi.

    The low-fidelity model uses a Gaussian of standard deviation
    ``sigma_factor * beam_radius``; the high-fidelity model uses ``beam_radius``
    as the 1/e^2 intensity radius and ignores ``sigma_factor``.
    """

    beam_radius: float
    absorptivity: float
    sigma_factor: float = 0.5

    def __post_init__(self):
        if not self.beam_radius > 0:
            raise ValueError("beam_radius must be > 0")
        if not 0 < self.absorptivity <= 1:
            raise ValueError("absorptivity must be in (0, 1]")
        if not self.sigma_factor > 0:
            raise ValueError("sigma_factor must be > 0")

    @property
    def sigma(self) -> float:
        return self.sigma_factor * self.beam_radius


@dataclass(frozen=True)
class PowderStream:
    """Stand-in powder/laser interaction for the high-fidelity model.

    The laser reaching the substrate is attenuated by ``exp(-eta)`` with
    ``eta = attenuation * mdot * H / gsh``; the powder intercepts the
    remainder and delivers ``powder_efficiency`` of it to the pool as a
    broader Gaussian (1/e^2 radius ``radius_factor * r_L``).
    """

    attenuation: float = 4.0  # m^2/kg
    powder_efficiency: float = 0.8
    radius_factor: float = 1.5

    def attenuation_exponent(self, powder_flow: float, gas_flow: float,
                             nozzle_height: float) -> float:
        return self.attenuation * powder_flow * nozzle_height / gas_flow


@dataclass(frozen=True)
class LfInput:
    laser_power: float  # W
    scan_velocity: float  # m/s

    def __post_init__(self):
        if self.laser_power < 0:
            raise ValueError("laser_power must be >= 0")
        if not self.scan_velocity > 0:
            raise ValueError("scan_velocity must be > 0")


@dataclass(frozen=True)
class HfInput:
    laser_power: float  # W
    scan_velocity: float  # m/s
    powder_flow: float  # kg/s
    gas_flow: float  # m^3/s
    nozzle_height: float  # m

    def __post_init__(self):
        if self.laser_power < 0 or self.powder_flow < 0:
            raise ValueError("laser_power and powder_flow must be >= 0")
        if not (self.scan_velocity > 0 and self.gas_flow > 0 and self.nozzle_height > 0):
            raise ValueError("scan_velocity, gas_flow and nozzle_height must be > 0")

    @classmethod
    def from_table_units(cls, P, v, mdot, gsh, H) -> "HfInput":
        """Build from W, mm/s, g/min, dL/min, mm."""
        s = TABLE_TO_SI
        return cls(P * s["P"], v * s["v"], mdot * s["mdot"], gsh * s["gsh"], H * s["H"])

    def to_lf(self) -> LfInput:
        return LfInput(self.laser_power, self.scan_velocity)


def lf_input_from_table_units(P, v) -> LfInput:
    return LfInput(P * TABLE_TO_SI["P"], v * TABLE_TO_SI["v"])


@dataclass(frozen=True)
class MeltPoolGeometry:
    depth: float  # m
    width: float  # m

    def __post_init__(self):
        if self.depth < 0 or self.width < 0:
            raise ValueError("depth and width must be >= 0")
        if (self.depth == 0) != (self.width == 0):
            raise ValueError("depth and width must be both zero or both positive")


@dataclass(frozen=True)
class TemperatureGrid:
    """Temperatures on a tensor grid; axes of length 1 mark a plane."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    values: np.ndarray  # shape (len(x), len(y), len(z))

    def __post_init__(self):
        for name in ("x", "y", "z"):
            ax = getattr(self, name)
            if ax.size > 1 and not np.all(np.diff(ax) > 0):
                raise ValueError(f"grid axis {name} must be strictly increasing")
        if self.values.shape != (self.x.size, self.y.size, self.z.size):
            raise ValueError("values shape does not match axes")


@dataclass(frozen=True)
class GridSpec:
    """Sampling of the two cross-sections used for geometry extraction.

    With the ranges left as ``None`` the pool is bracketed automatically by a
    coarse pass before the fine grid is laid out.  Explicit ranges are used
    as given and a pool touching their edge raises
    :class:`PoolTruncatedError`.
    """

    samples: int = 64
    coarse_samples: int = 16
    x_range: tuple[float, float] | None = None
    depth_max: float | None = None
    half_width_max: float | None = None
    max_expansions: int = 10

    def __post_init__(self):
        if self.samples < 64:
            raise ValueError("samples must be >= 64 per axis")
        if self.coarse_samples < 4:
            raise ValueError("coarse_samples must be >= 4")

    @property
    def explicit(self) -> bool:
        return (self.x_range is not None and self.depth_max is not None
                and self.half_width_max is not None)


# --------------------------------------------------------------------------
# quadrature rules

def _gauss_legendre(n: int, lo: float, hi: float):
    u, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (u + 1.0), half * w


def _check_nodes(nodes: int):
    if int(nodes) != nodes or nodes < 8:
        raise ValueError(f"quadrature node count must be an integer >= 8, got {nodes!r}")


def _as_points(point) -> tuple[np.ndarray, bool]:
    pts = np.asarray(point, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.ascontiguousarray(np.atleast_2d(pts))
    if pts.shape[1] != 3:
        raise ValueError("points must have 3 coordinates")
    return pts, single


# --------------------------------------------------------------------------
# low fidelity: Eagar-Tsai

@dataclass(frozen=True)
class LfModel:
    """Eagar-Tsai model bound to material, laser and numerics.

    The transient integral over source time is evaluated at ``horizon`` (by
    default ``horizon_transits * r_L / v``) with the substitution
    ``u = sqrt(t - t')`` removing the inverse square-root singularity.
    """

    material: MaterialProperties
    laser: LaserParams
    nodes: int = 64
    horizon_transits: float = 50.0

    def __post_init__(self):
        _check_nodes(self.nodes)
        if not self.horizon_transits > 0:
            raise ValueError("horizon_transits must be > 0")

    def horizon(self, inp: LfInput) -> float:
        return self.horizon_transits * self.laser.beam_radius / inp.scan_velocity

    def temperature(self, points, inp: LfInput, horizon: float | None = None):
        pts, single = _as_points(points)
        if np.any(pts[:, 2] > 0):
            raise ThermalDomainError("field points must satisfy z <= 0")
        t = self.horizon(inp) if horizon is None else float(horizon)
        if not t > 0:
            raise ValueError("horizon must be > 0")
        mat, laser = self.material, self.laser
        T0 = mat.ambient_temperature
        if inp.laser_power == 0:
            out = np.full(pts.shape[0], T0)
            return out[0] if single else out
        u, w = _gauss_legendre(self.nodes, 0.0, math.sqrt(t))
        tau = u * u
        # dt' (t-t')^(-1/2) = 2 du
        wq = 2.0 * w
        a = mat.diffusivity
        amp = laser.absorptivity * inp.laser_power / (
            math.pi * mat.density * mat.specific_heat * math.sqrt(4.0 * math.pi * a))
        s, bad = kernels.lf_sum(pts, tau, wq, a, laser.sigma ** 2, inp.scan_velocity)
        if bad >= 0:
            raise ThermalDomainError(
                f"non-finite LF integrand at point {tuple(pts[bad])}")
        out = T0 + amp * s
        return out[0] if single else out


def lf_temperature(point, inp: LfInput, mat: MaterialProperties, laser: LaserParams,
                   horizon: float | None = None, nodes: int = 64):
    """Eagar-Tsai temperature (K) at one point or an (n, 3) array of points."""
    return LfModel(mat, laser, nodes).temperature(point, inp, horizon)


# --------------------------------------------------------------------------
# high fidelity: attenuated beam + heated powder over the beam disk

@dataclass(frozen=True)
class HfModel:
    """Surface-disk Green's-function model.

    The beam disk of radius r_L is integrated with a polar Gauss-Legendre
    tensor rule (``nodes`` radial x ``nodes`` angular).  Field points on the
    source plane inside the disk are singular; callers must offset them
    (see ``surface_offset``).
    """

    material: MaterialProperties
    laser: LaserParams
    powder: PowderStream = field(default_factory=PowderStream)
    nodes: int = 64

    def __post_init__(self):
        _check_nodes(self.nodes)

    def _disk_rule(self):
        r_L = self.laser.beam_radius
        r, wr = _gauss_legendre(self.nodes, 0.0, r_L)
        th, wt = _gauss_legendre(self.nodes, 0.0, 2.0 * math.pi)
        rr, tt = np.meshgrid(r, th, indexing="ij")
        weights = np.outer(wr * r, wt)
        return ((rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel(),
                rr.ravel(), weights.ravel())

    def source_intensity(self, radius, inp: HfInput):
        """alpha_L * I_A + I_p (W/m^2) at distance ``radius`` from the beam axis."""
        r_L = self.laser.beam_radius
        eta = self.powder.attenuation_exponent(inp.powder_flow, inp.gas_flow,
                                               inp.nozzle_height)
        transmitted = math.exp(-eta)
        I_A = (2.0 * inp.laser_power * transmitted / (math.pi * r_L ** 2)
               * np.exp(-2.0 * radius ** 2 / r_L ** 2))
        r_p = self.powder.radius_factor * r_L
        I_p = (self.powder.powder_efficiency * inp.laser_power * (1.0 - transmitted)
               * 2.0 / (math.pi * r_p ** 2) * np.exp(-2.0 * radius ** 2 / r_p ** 2))
        return self.laser.absorptivity * I_A + I_p

    def temperature(self, points, inp: HfInput, surface_offset: float = 0.0):
        pts, single = _as_points(points)
        if np.any(pts[:, 2] > 0):
            raise ThermalDomainError("field points must satisfy z <= 0")
        mat = self.material
        T0 = mat.ambient_temperature
        if inp.laser_power == 0:
            out = np.full(pts.shape[0], T0)
            return out[0] if single else out
        r_L = self.laser.beam_radius
        on_disk = (pts[:, 2] == 0) & (pts[:, 0] ** 2 + pts[:, 1] ** 2 <= r_L ** 2)
        if np.any(on_disk):
            if not surface_offset > 0:
                bad = pts[np.flatnonzero(on_disk)[0]]
                raise ThermalDomainError(
                    f"point {tuple(bad)} lies on the source disk (R = 0); "
                    "pass a positive surface_offset")
            pts = pts.copy()
            pts[on_disk, 2] = -surface_offset
        xi, eta, radius, w = self._disk_rule()
        qw = np.ascontiguousarray(w * self.source_intensity(radius, inp))
        s, bad = kernels.hf_sum(pts, xi, eta, qw, inp.scan_velocity, mat.diffusivity)
        if bad >= 0:
            raise ThermalDomainError(f"non-finite HF integrand at point {tuple(pts[bad])}")
        out = T0 + s / (2.0 * math.pi * mat.conductivity)
        return out[0] if single else out


def hf_temperature(point, inp: HfInput, mat: MaterialProperties, laser: LaserParams,
                   powder: PowderStream | None = None, nodes: int = 64,
                   surface_offset: float = 0.0):
    """High-fidelity temperature (K) at one point or an (n, 3) array of points."""
    model = HfModel(mat, laser, powder or PowderStream(), nodes)
    return model.temperature(point, inp, surface_offset)


# --------------------------------------------------------------------------
# melt-pool geometry

def _plane_temperatures(model, inp, xs, ts, plane):
    """T on the depth (x-z, y=0) or width (x-y, z=0) plane; shape (nx, nt)."""
    X, Tt = np.meshgrid(xs, ts, indexing="ij")
    pts = np.zeros((X.size, 3))
    pts[:, 0] = X.ravel()
    if plane == "depth":
        pts[:, 2] = -Tt.ravel()
    else:
        pts[:, 1] = Tt.ravel()
    if isinstance(model, HfModel):
        # desingularize the source plane by a quarter of the transverse spacing
        offset = 0.25 * (ts[1] - ts[0])
        T = model.temperature(pts, inp, surface_offset=offset)
    else:
        T = model.temperature(pts, inp)
    return T.reshape(X.shape)


def _extent(T, ts, t_melt):
    """Largest transverse extent of T >= t_melt, linearly refined.

    Returns (extent, touches) where ``touches`` flags the far, low-x and
    high-x edges of the grid.
    """
    mask = T >= t_melt
    touches = {"far": bool(mask[:, -1].any()), "x_lo": bool(mask[0].any()),
               "x_hi": bool(mask[-1].any())}
    extent = 0.0
    for i in np.flatnonzero(mask.any(axis=1)):
        k = np.flatnonzero(mask[i])[-1]
        if k == ts.size - 1:
            ext = ts[k]
        else:
            T_in, T_out = T[i, k], T[i, k + 1]
            ext = ts[k] + (T_in - t_melt) / (T_in - T_out) * (ts[k + 1] - ts[k])
        extent = max(extent, ext)
    return extent, touches


def _bracket(T, xs, ts, t_melt):
    """Melted index range on a coarse grid, padded by one cell."""
    mask = T >= t_melt
    xi = np.flatnonzero(mask.any(axis=1))
    ti = np.flatnonzero(mask.any(axis=0))
    x_lo = xs[max(xi[0] - 1, 0)]
    x_hi = xs[min(xi[-1] + 1, xs.size - 1)]
    t_hi = ts[min(ti[-1] + 1, ts.size - 1)]
    return x_lo, x_hi, t_hi


def _auto_box(model, inp, grid: GridSpec, t_melt):
    r = model.laser.beam_radius
    box = {"x_lo": -4.0 * r, "x_hi": 2.0 * r, "depth": 2.0 * r, "width": 2.0 * r}
    n = grid.coarse_samples
    for _ in range(grid.max_expansions):
        xs = np.linspace(box["x_lo"], box["x_hi"], n)
        temps = {p: _plane_temperatures(model, inp, xs, np.linspace(0.0, box[p], n), p)
                 for p in ("depth", "width")}
        grow = False
        for p, T in temps.items():
            _, touch = _extent(T, np.linspace(0.0, box[p], n), t_melt)
            if touch["far"]:
                box[p] *= 2.0
                grow = True
            if touch["x_lo"]:
                box["x_lo"] *= 2.0
                grow = True
            if touch["x_hi"]:
                box["x_hi"] *= 2.0
                grow = True
        if not grow:
            break
    else:
        raise PoolTruncatedError(
            f"melt pool still touches the grid after {grid.max_expansions} expansions; "
            "supply an explicit larger GridSpec")
    out = {}
    for p, T in temps.items():
        if not (T >= t_melt).any():
            out[p] = None
            continue
        out[p] = _bracket(T, xs, np.linspace(0.0, box[p], n), t_melt)
    return out, box


def _peak_surface_temperature(model, inp, x_lo, x_hi):
    xs = np.linspace(x_lo, x_hi, 257)
    ts = np.array([0.0, 1e-3 * model.laser.beam_radius])
    return float(_plane_temperatures(model, inp, xs, ts, "depth").max())


def _model_for(model, mat, laser, nodes, powder):
    key = str(model).lower()
    if key == "lf":
        return LfModel(mat, laser, nodes)
    if key == "hf":
        return HfModel(mat, laser, powder or PowderStream(), nodes)
    raise ValueError(f"model must be 'lf' or 'hf', got {model!r}")


def melt_pool_geometry(model, inp, mat: MaterialProperties | None = None,
                       laser: LaserParams | None = None, grid: GridSpec | None = None,
                       nodes: int = 64, powder: PowderStream | None = None) -> MeltPoolGeometry:
    """Depth and width of the liquidus isotherm.

    ``model`` is ``"lf"``/``"hf"`` (then ``mat`` and ``laser`` are required) or
    a bound :class:`LfModel`/:class:`HfModel`.  Depth is the deepest point of
    the pool on the y = 0 plane and width twice its largest lateral extent on
    the z = 0 plane, both interpolated linearly between grid samples.
    """
    if not isinstance(model, (LfModel, HfModel)):
        if mat is None or laser is None:
            raise ValueError("mat and laser are required with a model name")
        model = _model_for(model, mat, laser, nodes, powder)
    if isinstance(model, LfModel) and not isinstance(inp, LfInput):
        inp = inp.to_lf()
    grid = grid or GridSpec()
    t_melt = model.material.liquidus_temperature
    n = grid.samples

    if grid.explicit:
        xs = np.linspace(*grid.x_range, n)
        extents = {}
        for p, t_max in (("depth", grid.depth_max), ("width", grid.half_width_max)):
            ts = np.linspace(0.0, t_max, n)
            ext, touch = _extent(_plane_temperatures(model, inp, xs, ts, p), ts, t_melt)
            if any(touch.values()):
                raise PoolTruncatedError(
                    f"melt pool touches the {p}-plane grid boundary; enlarge the grid")
            extents[p] = ext
        return _geometry(extents)

    brackets, box = _auto_box(model, inp, grid, t_melt)
    if brackets["depth"] is None or brackets["width"] is None:
        peak = _peak_surface_temperature(model, inp, box["x_lo"], box["x_hi"])
        if peak < t_melt:
            return MeltPoolGeometry(0.0, 0.0)
        # pool smaller than the coarse spacing: bracket around the beam
        r = model.laser.beam_radius
        brackets = {p: (-2.0 * r, r, r) for p in ("depth", "width")}

    extents = {}
    for p, (x_lo, x_hi, t_hi) in brackets.items():
        for _ in range(grid.max_expansions):
            xs = np.linspace(x_lo, x_hi, n)
            ts = np.linspace(0.0, t_hi, n)
            ext, touch = _extent(_plane_temperatures(model, inp, xs, ts, p), ts, t_melt)
            if not any(touch.values()):
                break
            span = x_hi - x_lo
            x_lo -= 0.25 * span if touch["x_lo"] else 0.0
            x_hi += 0.25 * span if touch["x_hi"] else 0.0
            t_hi *= 1.25 if touch["far"] else 1.0
        else:
            raise PoolTruncatedError(f"melt pool touches the {p}-plane grid boundary")
        extents[p] = ext
    return _geometry(extents)


def _geometry(extents) -> MeltPoolGeometry:
    depth, half = extents["depth"], extents["width"]
    if (depth == 0) != (half == 0):
        warnings.warn("melt pool visible on only one cross-section; reporting no pool",
                      stacklevel=3)
        return MeltPoolGeometry(0.0, 0.0)
    return MeltPoolGeometry(depth, 2.0 * half)


# --------------------------------------------------------------------------
# LF calibration

@dataclass(frozen=True)
class CalibrationResult:
    sigma_factor: float
    absorptivity: float
    r2_depth: float
    r2_width: float
    sse: float
    n_evaluations: int
    at_bound: bool

    def laser(self, base: LaserParams) -> LaserParams:
        return LaserParams(base.beam_radius, self.absorptivity, self.sigma_factor)


def _r2(y, yhat):
    y = np.asarray(y, dtype=float)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return 1.0 - np.sum((y - np.asarray(yhat)) ** 2) / ss_tot


def calibrate_lf(inputs, depth, width, mat: MaterialProperties, laser: LaserParams,
                 phi_bounds=(0.2, 2.0), alpha_bounds=(0.05, 1.0), nodes: int = 64,
                 grid: GridSpec | None = None, start_levels: int = 5) -> CalibrationResult:
    """Fit (phi, alpha_L) of the LF model to target pool depths and widths.

    ``inputs`` are LfInput/HfInput rows (only P and v are used); ``laser``
    supplies the shared beam radius.  The squared error of (depth, width) in
    millimetres is minimized by a bounded simplex search started from the
    best cell of a ``start_levels`` x ``start_levels`` scan of the bounds.
    """
    lf_inputs = [i.to_lf() if isinstance(i, HfInput) else i for i in inputs]
    depth = np.asarray(depth, dtype=float)
    width = np.asarray(width, dtype=float)
    if len(lf_inputs) != depth.size or depth.size != width.size:
        raise ValueError("inputs, depth and width must have equal length")
    lo = np.array([phi_bounds[0], alpha_bounds[0]])
    hi = np.array([phi_bounds[1], alpha_bounds[1]])
    n_evals = 0
    cache = {}

    def predict(params):
        nonlocal n_evals
        key = tuple(np.round(params, 12))
        if key not in cache:
            n_evals += 1
            model = LfModel(mat, LaserParams(laser.beam_radius, params[1], params[0]), nodes)
            geo = [melt_pool_geometry(model, i, grid=grid) for i in lf_inputs]
            cache[key] = (np.array([g.depth for g in geo]), np.array([g.width for g in geo]))
        return cache[key]

    def sse(params):
        params = np.clip(params, lo, hi)
        d, w = predict(params)
        return 1e6 * (np.sum((d - depth) ** 2) + np.sum((w - width) ** 2))

    levels = [np.linspace(lo[k], hi[k], start_levels + 2)[1:-1] for k in range(2)]
    starts = [np.array([p, a]) for p in levels[0] for a in levels[1]]
    x0 = min(starts, key=sse)
    res = minimize(sse, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                   options={"xatol": 1e-4, "fatol": 1e-10, "maxiter": 400})
    best = np.clip(res.x, lo, hi)
    d, w = predict(best)
    if not (d.any() or w.any()):
        raise CalibrationError("LF model produced no melt pool anywhere on the design")
    span = hi - lo
    at_bound = bool(np.any((best - lo) < 1e-3 * span) or np.any((hi - best) < 1e-3 * span))
    if at_bound:
        warnings.warn(f"calibrated parameters {best} sit on the bounds", stacklevel=2)
    return CalibrationResult(
        sigma_factor=float(best[0]), absorptivity=float(best[1]),
        r2_depth=float(_r2(depth, d)), r2_width=float(_r2(width, w)),
        sse=float(res.fun), n_evaluations=n_evals, at_bound=at_bound)
