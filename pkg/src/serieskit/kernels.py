"""Dispatch layer over the numba and numpy kernel backends."""

from .backend import BACKEND

if BACKEND == "numba":
    from ._kernels_numba import (  # noqa: F401
        dtw_block_bounded,
        l2_block_bounded,
        lb_keogh_block,
    )
else:
    from ._kernels_numpy import (  # noqa: F401
        dtw_block_bounded,
        l2_block_bounded,
        lb_keogh_block,
    )
