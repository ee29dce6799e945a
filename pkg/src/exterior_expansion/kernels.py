"""Selects the compiled branch-inversion kernel, falling back to numpy.

Set ``EXTERIOR_EXPANSION_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("EXTERIOR_EXPANSION_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    COMPILED = False
else:
    try:
        from . import _kernels as _impl

        COMPILED = True
    except ImportError:  # extension not built
        _impl = _kernels_py
        COMPILED = False

evaluate = _impl.evaluate
invert_branch = _impl.invert_branch

MA, SMALL, INVERSE, INVERSE_ZERO, LARGE_RIGHT, LARGE_LEFT, SPL = range(7)
