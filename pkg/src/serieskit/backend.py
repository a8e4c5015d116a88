"""Kernel backend selection.

The hot numeric loops (distance blocks, DTW, envelopes) exist twice:
a numba-jitted version and a pure-numpy version.  The numba path is the
default; set ``SERIESKIT_NO_NUMBA=1`` to force the numpy fallback (or it
is selected automatically when numba is not importable).
"""

import os

_FLAG = "SERIESKIT_NO_NUMBA"


def _pick_backend() -> str:
    if os.environ.get(_FLAG, "").strip() in ("1", "true", "yes"):
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


BACKEND = _pick_backend()
