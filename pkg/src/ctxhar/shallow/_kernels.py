"""Pick the compiled forest kernels when built, else the pure-Python ones.

Set ``CTXHAR_PURE=1`` to force the fallback.
"""
import os

from . import _forest_py as python_kernels

if os.environ.get("CTXHAR_PURE") == "1":
    kernels = python_kernels
else:
    try:
        from . import _forest_ext as kernels
    except ImportError:  # extension not built
        kernels = python_kernels

BACKEND = kernels.BACKEND


def get_kernels(backend: str | None = None):
    if backend is None:
        return kernels
    if backend == "python":
        return python_kernels
    if backend == "cython":
        from . import _forest_ext

        return _forest_ext
    raise ValueError(f"unknown forest backend {backend!r}")
