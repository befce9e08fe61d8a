"""Kernel backend chosen at import.

The compiled ``_core`` extension is used when it is importable; set
``BOSD_PURE_PYTHON=1`` to force the numpy fallback.  ``BACKEND`` names the
active one.
"""
import os

from . import _kernels_py as python_backend

compiled_backend = None
if not os.environ.get("BOSD_PURE_PYTHON"):
    try:
        from . import _core as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

bocpd_recursion = _active.bocpd_recursion
bosd_recursion = _active.bosd_recursion
bosd_recursion_shared = _active.bosd_recursion_shared
niw_logpdf = _active.niw_logpdf
niw_update = _active.niw_update
NiwRunLength = _active.NiwRunLength


def get_backend(name: str | None = None):
    """Module implementing the kernels: ``"compiled"``, ``"python"`` or the active one."""
    if name is None:
        return _active
    if name == "python":
        return python_backend
    if name == "compiled":
        if compiled_backend is None:
            raise ImportError("compiled kernels are not available; build with "
                              "`pip install -e . --no-build-isolation`")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
