"""Backend selection for the channel moment kernel.

The compiled Cython kernel is preferred when present. Set NETENT_BACKEND=py
in the environment before import to force the pure numpy fallback, or
NETENT_BACKEND=cython to require the compiled one (ImportError if missing).
Both implementations share a single contract, mid_moments(), and are held
to agreement at the 1e-13 level by the test suite.
"""

import os

from . import _kernels_py

_requested = os.environ.get("NETENT_BACKEND", "").strip().lower()

if _requested in ("py", "python", "numpy"):
    _impl = _kernels_py
elif _requested in ("cython", "c", "compiled"):
    from . import _kernels as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

mid_moments = _impl.mid_moments
backend_name = _impl.backend_name

KIND_LINEAR = _kernels_py.KIND_LINEAR
KIND_RELU = _kernels_py.KIND_RELU
KIND_HARDTANH = _kernels_py.KIND_HARDTANH

__all__ = ["mid_moments", "backend_name", "KIND_LINEAR", "KIND_RELU",
           "KIND_HARDTANH"]
