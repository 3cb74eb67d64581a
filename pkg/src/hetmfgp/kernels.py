"""Backend selection for the thermal quadrature kernels.

The compiled extension is used when importable; set ``HETMFGP_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _core_py

if os.environ.get("HETMFGP_PURE_PYTHON", "") not in ("", "0"):
    _compiled = None
else:
    try:
        from . import _core as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"

_impl = _compiled if _compiled is not None else _core_py
lf_sum = _impl.lf_sum
hf_sum = _impl.hf_sum

__all__ = ["BACKEND", "lf_sum", "hf_sum"]
