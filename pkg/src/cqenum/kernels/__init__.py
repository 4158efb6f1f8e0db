"""Hot kernels with a numba path and a pure-numpy fallback.

The backend is picked once at import time from ``CQENUM_BACKEND``
(``numba`` or ``numpy``); ``numba`` is the default when it imports.
``use_backend`` switches at runtime, which the benchmark relies on.
"""

import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

try:
    from . import _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

BACKENDS = ("numba", "numpy")

expand_join = None
horn_propagate = None
ranges = _numpy.ranges
backend = None


def use_backend(name):
    global expand_join, horn_propagate, backend
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choose from {BACKENDS}")
    if name == "numba" and _numba is None:
        log.warning("numba unavailable, falling back to numpy kernels")
        name = "numpy"
    mod = _numba if name == "numba" else _numpy
    expand_join = mod.expand_join
    horn_propagate = mod.horn_propagate
    backend = name
    return name


use_backend(os.environ.get("CQENUM_BACKEND", "numba").strip().lower() or "numba")
