"""Compare the compiled and numpy quadrature kernels.

    python benchmarks/bench_kernels.py [--repeats N]

Times the two inner sums on a melt-pool-sized workload (one 64 x 64
cross-section) and one full HF melt-pool extraction per backend, and checks
that both backends agree.
"""
import argparse
import time

import numpy as np

from hetmfgp import _core_py, kernels
from hetmfgp.thermal import HfInput, HfModel, LaserParams, LfModel, MaterialProperties


def _best(fn, repeats):
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def _workload():
    mat = MaterialProperties.in625()
    xs = np.linspace(-4e-3, 1e-3, 64)
    zs = np.linspace(-1.5e-3, -1e-5, 64)
    pts = np.ascontiguousarray(np.array([(x, 0.0, z) for x in xs for z in zs]))
    inp = HfInput.from_table_units(850, 7.5, 5, 3.5, 5)
    lf = LfModel(mat, LaserParams(0.75e-3, 0.35, 0.45))
    u, w = np.polynomial.legendre.leggauss(64)
    t = lf.horizon(inp.to_lf())
    u = 0.5 * (u + 1) * np.sqrt(t)
    lf_args = (pts, u * u, w * np.sqrt(t), mat.diffusivity, lf.laser.sigma ** 2, inp.scan_velocity)
    hf = HfModel(mat, LaserParams(0.75e-3, 0.35))
    xi, eta, radius, wd = hf._disk_rule()
    qw = np.ascontiguousarray(wd * hf.source_intensity(radius, inp))
    hf_args = (pts, xi, eta, qw, inp.scan_velocity, mat.diffusivity)
    return lf_args, hf_args, hf, inp


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    lf_args, hf_args, hf, inp = _workload()
    print(f"compiled backend available: {kernels.BACKEND == 'cython'}")
    print(f"{'kernel':<10}{'numpy (s)':>12}{'compiled (s)':>14}{'speed-up':>10}{'max rel diff':>14}")
    for name, args_ in (("lf_sum", lf_args), ("hf_sum", hf_args)):
        t_py, (out_py, _) = _best(lambda: getattr(_core_py, name)(*args_), args.repeats)
        if kernels.BACKEND == "cython":
            t_c, (out_c, _) = _best(lambda: getattr(kernels, name)(*args_), args.repeats)
            diff = float(np.max(np.abs(out_c - out_py) / np.abs(out_py)))
            print(f"{name:<10}{t_py:>12.4f}{t_c:>14.4f}{t_py / t_c:>10.1f}{diff:>14.1e}")
        else:
            print(f"{name:<10}{t_py:>12.4f}{'n/a':>14}")
    if kernels.BACKEND == "cython":
        from hetmfgp import thermal
        t_c, g_c = _best(lambda: thermal.melt_pool_geometry(hf, inp), 1)
        saved = thermal.kernels.hf_sum
        thermal.kernels.hf_sum = _core_py.hf_sum
        try:
            t_py, g_py = _best(lambda: thermal.melt_pool_geometry(hf, inp), 1)
        finally:
            thermal.kernels.hf_sum = saved
        print(f"HF melt pool: numpy {t_py:.2f} s, compiled {t_c:.2f} s "
              f"(depth {g_c.depth * 1e3:.4f} vs {g_py.depth * 1e3:.4f} mm)")


if __name__ == "__main__":
    main()
