"""Select the kernel implementation at import time.

The compiled Cython core is preferred; the pure-Python module is the
fallback when the extension is missing. ``CQHJ_BACKEND=python`` forces the
fallback (``compiled`` makes a missing extension an error).
"""

import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)


def _load(name):
    if name == "python":
        return _kernels_py
    from . import _kernels

    return _kernels


def _select():
    requested = os.environ.get("CQHJ_BACKEND", "").strip().lower()
    if requested not in ("", "python", "compiled"):
        raise ValueError(f"CQHJ_BACKEND must be 'python' or 'compiled', got {requested!r}")
    if requested:
        return _load(requested)
    try:
        return _load("compiled")
    except ImportError:
        log.info("compiled core unavailable; using the pure-Python kernels")
        return _kernels_py


kernels = _select()


def available():
    """Names of the backends importable in this environment."""
    names = ["python"]
    try:
        _load("compiled")
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


def get(name):
    """Return the kernel module called ``name`` ('python' or 'compiled')."""
    return _load(name)


def use(name):
    """Switch the active backend for subsequent library calls."""
    global kernels
    kernels = _load(name)
    return kernels
