"""Hot-loop kernels: compiled extension when built, pure Python otherwise.

Set ``CHRONOCACHE_PURE=1`` to force the fallback.
"""

import os

from . import _lru_py

if os.environ.get("CHRONOCACHE_PURE"):
    _compiled = None
else:
    try:
        from . import _lru as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
LruReplay = _compiled.LruReplay if _compiled is not None else _lru_py.LruReplay
PyLruReplay = _lru_py.LruReplay
