"""Kernel backend selection.

The compiled extension (``embir._ckernels``) is preferred when it
imported cleanly; otherwise the numpy fallback is used. Set
``EMBIR_KERNELS=c`` or ``EMBIR_KERNELS=py`` to force a backend
(``c`` raises if the extension is unavailable).
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

_BACKENDS = {"py": _pykernels}
if _ckernels is not None:
    _BACKENDS["c"] = _ckernels


def available_backends():
    return tuple(sorted(_BACKENDS))


def get_backend(name=None):
    """Resolve a kernel backend module by name (default: env or best)."""
    if name is None:
        name = os.environ.get("EMBIR_KERNELS")
    if name is None:
        return _ckernels if _ckernels is not None else _pykernels
    if name not in _BACKENDS:
        raise RuntimeError(
            f"kernel backend {name!r} is not available; "
            f"choices: {available_backends()}")
    return _BACKENDS[name]


_active = get_backend()

BACKEND = _active.BACKEND
bm25_accumulate = _active.bm25_accumulate
ql_accumulate = _active.ql_accumulate
