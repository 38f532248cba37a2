"""Backend selection for the hot sampling/scoring kernels.

The compiled extension (ceassoc._kernels, Cython) is used when importable;
otherwise the NumPy implementation takes over. Both draw the same
counter-based uniforms, so sampled assignments are identical across
backends and scores agree to floating-point reassociation.

Set CEASSOC_BACKEND=python to force the fallback, or CEASSOC_BACKEND=compiled
to fail loudly when the extension is missing.
"""

import os

from . import _kernels_py

_requested = os.environ.get("CEASSOC_BACKEND", "auto").strip().lower()

if _requested in ("auto", ""):
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py
elif _requested in ("compiled", "c"):
    from . import _kernels as _impl
elif _requested in ("python", "py", "pure"):
    _impl = _kernels_py
else:
    raise ImportError(
        f"CEASSOC_BACKEND={_requested!r} not recognized "
        "(use 'auto', 'compiled', or 'python')")

BACKEND = _impl.BACKEND_NAME

sample_assignments = _impl.sample_assignments
score_assignments = _impl.score_assignments
repair_capacity = _impl.repair_capacity
batch_loads = _impl.batch_loads


def available_backends():
    """Names of the importable backends (the fallback is always present)."""
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
        names.insert(0, "compiled")
    except ImportError:
        pass
    return names
