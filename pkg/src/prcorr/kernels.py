"""Backend selection for the hot kernels.

The compiled ``_kernels`` extension is used when it imports cleanly; otherwise
the pure-Python twin in ``_kernels_py`` is used.  Set ``PRCORR_PURE_PYTHON=1``
to force the fallback (the benchmark and the backend-agreement tests do).
"""
import os

from . import _kernels_py

if os.environ.get("PRCORR_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

vincenty_inverse = _impl.vincenty_inverse
vincenty_many = _impl.vincenty_many
ecef_to_geodetic = _impl.ecef_to_geodetic
ecef_to_geodetic_many = _impl.ecef_to_geodetic_many
gauss_newton_wls = _impl.gauss_newton_wls

GN_OK = _kernels_py.GN_OK
GN_MAXITER = _kernels_py.GN_MAXITER
GN_SINGULAR = _kernels_py.GN_SINGULAR
GN_COINCIDENT = _kernels_py.GN_COINCIDENT


def compiled_available():
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True
