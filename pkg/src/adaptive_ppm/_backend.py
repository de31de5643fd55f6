"""Select the stage kernel implementation at import time.

The compiled extension is preferred; set ``ADAPTIVE_PPM_BACKEND=python`` to
force the numpy fallback.
"""

import os

from . import _fallback

BACKEND_ENV = "ADAPTIVE_PPM_BACKEND"

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def available() -> dict:
    """Backends importable in this environment, by name."""
    out = {"python": _fallback}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out


def get(name=None):
    """Return the kernel module for ``name`` (default: env var, else best available)."""
    name = name or os.environ.get(BACKEND_ENV)
    backends = available()
    if name is None:
        return backends.get("compiled", _fallback)
    if name not in backends:
        raise RuntimeError(f"kernel backend {name!r} unavailable; have {sorted(backends)}")
    return backends[name]


def active_name() -> str:
    return "compiled" if get() is _compiled and _compiled is not None else "python"
