"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise (or when
``REPLICALOAD_PURE=1``) the pure-Python ``_pykernels`` takes over. Both give
identical results.
"""

import os

from . import _pykernels

if os.environ.get("REPLICALOAD_PURE") == "1":
    kernels = _pykernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        kernels = _pykernels

BACKEND = "cython" if kernels is not _pykernels else "python"

max_flow = kernels.max_flow
feasible_batch = kernels.feasible_batch
feasible_batch_regular = kernels.feasible_batch_regular
first_violating_subset = kernels.first_violating_subset
approx_block = kernels.approx_block
tolerance = _pykernels.tolerance
MAX_SUBSET_OBJECTS = _pykernels.MAX_SUBSET_OBJECTS
