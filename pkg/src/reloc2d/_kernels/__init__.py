"""Kernel backend selection.

The compiled extension (``_core``) is preferred when it built successfully;
otherwise the pure-Python fallback (``_pycore``) is used. Both expose the
same API and produce bit-identical results. Override with the environment
variable ``RELOC2D_BACKEND=compiled|python``.
"""

from __future__ import annotations

import os

from . import _pycore

_choice = os.environ.get("RELOC2D_BACKEND", "").lower()

_compiled = None
if _choice in ("", "auto", "c", "compiled"):
    try:
        from . import _core as _compiled
    except ImportError:
        if _choice in ("c", "compiled"):
            raise

if _choice in ("py", "python"):
    impl = _pycore
else:
    impl = _compiled if _compiled is not None else _pycore

backend_name = impl.BACKEND_NAME


def available_backends():
    names = ["python"]
    try:
        from . import _core  # noqa: F401
        names.insert(0, "compiled")
    except ImportError:
        pass
    return names


def get_backend(name=None):
    """Return a kernel module by name (default: the selected one)."""
    if name is None:
        return impl
    name = name.lower()
    if name in ("py", "python"):
        return _pycore
    if name in ("c", "compiled"):
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
