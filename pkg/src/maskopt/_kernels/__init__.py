"""Hot-loop kernels: compiled extension when available, NumPy fallback otherwise.

Set MASKOPT_BACKEND=numpy to force the fallback, or MASKOPT_BACKEND=ext to
require the compiled extension (raises if it was not built).  Both backends
implement identical semantics; mask placement consumes the same random draw
stream either way, so generated masks are bit-identical across backends.
"""

import os

from . import backend_numpy

_requested = os.environ.get("MASKOPT_BACKEND", "auto").lower()
if _requested not in ("auto", "numpy", "ext"):
    raise ValueError(f"MASKOPT_BACKEND must be auto, numpy, or ext; got {_requested!r}")

_impl = backend_numpy
BACKEND_NAME = "numpy"
if _requested in ("auto", "ext"):
    try:
        from . import _fast
    except ImportError:
        if _requested == "ext":
            raise ImportError(
                "MASKOPT_BACKEND=ext but the compiled extension is not built; "
                "run `pip install -e . --no-build-isolation`"
            )
    else:
        _impl = _fast
        BACKEND_NAME = "ext"

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
place_points = _impl.place_points
