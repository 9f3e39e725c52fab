"""Kernel backend selection.

The compiled ``_kernels`` extension is preferred; the NumPy module
``_kernels_py`` is used when the extension is not built or when the
environment variable ``RANKNORM_PURE_PYTHON`` is set to a non-empty value
other than ``0``.
"""
import importlib
import os

from . import _kernels_py


def _select():
    if os.environ.get("RANKNORM_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py
    try:
        return importlib.import_module("ranknorm._kernels")
    except ImportError:
        return _kernels_py


def load(name: str):
    """Return a specific backend module (``"cython"`` or ``"numpy"``)."""
    if name == "numpy":
        return _kernels_py
    if name == "cython":
        return importlib.import_module("ranknorm._kernels")
    raise ValueError(f"unknown backend {name!r}")


_impl = _select()

BACKEND = _impl.NAME
logistic = _impl.logistic
qnorm_map = _impl.qnorm_map
softsort_column = _impl.softsort_column
sinkhorn_column = _impl.sinkhorn_column
