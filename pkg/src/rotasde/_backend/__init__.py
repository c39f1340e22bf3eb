"""Backend selection: compiled kernels when available, pure numpy otherwise.

Set ROTASDE_BACKEND=python or ROTASDE_BACKEND=cython to force a choice;
forcing cython when the extension is missing is an import error.
"""
import os

from . import _pykernels

_choice = os.environ.get("ROTASDE_BACKEND", "").strip().lower()

if _choice == "python":
    kernels = _pykernels
elif _choice == "cython":
    from . import _cykernels as kernels
else:
    try:
        from . import _cykernels as kernels
    except ImportError:
        kernels = _pykernels


def backend_name():
    return kernels.BACKEND


def get_kernels(name=None):
    """Return a specific kernel module by name (for parity tests and benchmarks)."""
    if name in (None, ""):
        return kernels
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _cykernels
        return _cykernels
    raise ValueError(f"unknown backend {name!r}")
