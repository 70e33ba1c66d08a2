"""Chain-kernel backend selection.

The compiled extension is preferred when importable; otherwise the
pure-Python module with identical semantics takes over.  Set
METROLANGEVIN_BACKEND=python (or =cython) to force a choice; forcing
cython raises if the extension is missing.
"""

import os

from . import pykernels

_requested = os.environ.get("METROLANGEVIN_BACKEND", "").strip().lower()

if _requested == "python":
    _impl = pykernels
    BACKEND = "python"
elif _requested in ("", "cython"):
    try:
        from . import _speedups as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = pykernels
        BACKEND = "python"
else:
    raise ValueError(
        f"METROLANGEVIN_BACKEND={_requested!r} not understood; use 'python' or 'cython'"
    )

overdamped_chain = _impl.overdamped_chain
overdamped_terminal = _impl.overdamped_terminal
inertial_chain = _impl.inertial_chain
inertial_terminal = _impl.inertial_terminal


def backend_name() -> str:
    """Name of the kernel backend selected at import time."""
    return BACKEND
