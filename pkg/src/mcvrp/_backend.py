"""Kernel backend selection.

The compiled extension is preferred when importable; set ``MCVRP_PURE_KERNELS=1``
to force the pure-Python fallback (used by the benchmark and the equivalence
tests).
"""

from __future__ import annotations

import os

if os.environ.get("MCVRP_PURE_KERNELS") == "1":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND_NAME

held_karp_cycle = _impl.held_karp_cycle
matching_min_cost = _impl.matching_min_cost
cover_partition = _impl.cover_partition
