"""Kernel backend selection.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``SPECVAE_PURE_PYTHON`` is set to a non-empty value other
than ``0``) the numpy fallback is used. ``BACKEND`` names the active one.
"""
import os

from . import _kernels_py

_force_py = os.environ.get("SPECVAE_PURE_PYTHON", "") not in ("", "0")

if _force_py:
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

nearest_sqdist = _impl.nearest_sqdist
tridiagonalize = _impl.tridiagonalize
tql_eigenvalues = _impl.tql_eigenvalues

__all__ = ["BACKEND", "nearest_sqdist", "tridiagonalize", "tql_eigenvalues"]
