"""Kernel backend selection.

The compiled extension is used when it imports; set
``CRASHSHAP_PURE_PYTHON=1`` to force the numpy fallback.
"""
import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)


def _load():
    if os.environ.get("CRASHSHAP_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py
    try:
        from . import _kernels
    except ImportError:
        log.debug("compiled kernels unavailable; using numpy fallback")
        return _kernels_py
    return _kernels


backend = _load()
BACKEND = backend.NAME


def available_backends():
    mods = [_kernels_py]
    try:
        from . import _kernels
        mods.insert(0, _kernels)
    except ImportError:
        pass
    return mods


def use(name):
    """Switch the active backend ("cython" or "python"); returns the previous name."""
    global backend, BACKEND
    prev = BACKEND
    for mod in available_backends():
        if mod.NAME == name:
            backend, BACKEND = mod, mod.NAME
            return prev
    raise ValueError(f"kernel backend {name!r} not available")
