"""Backend selection for the hot kernels.

The compiled extension is used when it imports; ``SPONGEDIM_BACKEND=python``
forces the numpy fallback (both share identical semantics).
"""

from __future__ import annotations

import os

from . import _lattice, _tree

BACKEND = "python"
expand = _tree.expand
lattice_argmax = _lattice.lattice_argmax

if os.environ.get("SPONGEDIM_BACKEND", "").lower() != "python":
    try:
        from . import _kernels
    except ImportError:  # extension not built
        _kernels = None
    if _kernels is not None:
        BACKEND = "cython"
        expand = _kernels.expand
        lattice_argmax = _kernels.lattice_argmax


def threads() -> int:
    """Worker cap from ``SPONGEDIM_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("SPONGEDIM_THREADS", "1")))
    except ValueError:
        return 1
