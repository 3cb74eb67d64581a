"""Pure-numpy versions of the compiled kernels in ``_core.pyx``.

Same signatures and return convention; used when the extension is not built
or when ``HETMFGP_PURE_PYTHON`` is set.
"""
import numpy as np

# points per block; bounds the (block x nodes) temporaries to ~32 MB
_BLOCK_ELEMS = 4_000_000


def _blocks(n, m):
    step = max(1, _BLOCK_ELEMS // max(m, 1))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def _first_bad(out):
    bad = np.flatnonzero(~np.isfinite(out))
    return int(bad[0]) if bad.size else -1


def lf_sum(pts, tau, wq, a, sigma2, v):
    pts = np.asarray(pts, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    wq = np.asarray(wq, dtype=np.float64)
    out = np.empty(pts.shape[0])
    d = 2.0 * a * tau + sigma2
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for sl in _blocks(pts.shape[0], tau.size):
            x, y, z = (pts[sl, k:k + 1] for k in range(3))
            xs = x + v * tau
            arg = -(xs * xs + y * y) / (2.0 * d) - z * z / (4.0 * a * tau)
            out[sl] = (wq / d * np.exp(arg)).sum(axis=1)
    return out, _first_bad(out)


def hf_sum(pts, xi, eta, qw, v, a):
    pts = np.asarray(pts, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    qw = np.asarray(qw, dtype=np.float64)
    c = v / (2.0 * a)
    out = np.empty(pts.shape[0])
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for sl in _blocks(pts.shape[0], xi.size):
            x, y, z = (pts[sl, k:k + 1] for k in range(3))
            dx = x - xi
            dy = y - eta
            r = np.sqrt(dx * dx + dy * dy + z * z)
            out[sl] = (qw * np.exp(-c * (dx + r)) / r).sum(axis=1)
    return out, _first_bad(out)
