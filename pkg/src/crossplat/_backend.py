"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
kernels. ``CROSSPLAT_BACKEND=python`` forces the fallback.
"""

from __future__ import annotations

import logging
import os
from types import ModuleType

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

AVAILABLE: dict[str, ModuleType] = {"python": _pykernels}
if _compiled is not None:
    AVAILABLE["cython"] = _compiled

_requested = os.environ.get("CROSSPLAT_BACKEND", "").strip().lower()
if _requested and _requested not in AVAILABLE:
    log.warning("backend %r unavailable, using default", _requested)
    _requested = ""
NAME = _requested or ("cython" if _compiled is not None else "python")


def get(name: str | None = None) -> ModuleType:
    """Kernel module by name; ``None`` gives the import-time default."""
    key = NAME if name is None else name
    try:
        return AVAILABLE[key]
    except KeyError:
        raise ValueError(f"kernel backend {key!r} not available (have {sorted(AVAILABLE)})") from None
