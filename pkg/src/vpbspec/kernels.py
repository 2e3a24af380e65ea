"""Backend selection for the Hermite evaluation kernels.

The compiled extension is used when it was built; otherwise the numpy
implementation is used. Setting ``VPBSPEC_PURE_PYTHON=1`` forces the
fallback.
"""
import os

from . import _hermite_py

BACKEND = "python"

if os.environ.get("VPBSPEC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _hermite_c as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _hermite_py
else:
    _impl = _hermite_py

hermite_1d = _impl.hermite_1d
tensor_hermite = _impl.tensor_hermite
tensor_hermite_even = _impl.tensor_hermite_even

__all__ = ["BACKEND", "hermite_1d", "tensor_hermite", "tensor_hermite_even"]
