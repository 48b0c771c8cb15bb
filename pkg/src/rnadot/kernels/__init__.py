"""Backend dispatch for the numeric hot kernels.

Two interchangeable implementations exist: numba-compiled loops
(default when numba is importable) and pure numpy. Select explicitly
with the environment variable ``RNADOT_BACKEND=numba|numpy``; the
numpy path is the fallback when numba is unavailable.

``benchmarks/bench_kernels.py`` compares the two.
"""

import os

_requested = os.environ.get("RNADOT_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"RNADOT_BACKEND={_requested!r} not recognized (use 'numba' or 'numpy')"
    )

if _requested == "numpy":
    BACKEND = "numpy"
else:
    try:
        import numba  # noqa: F401

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        BACKEND = "numpy"

if BACKEND == "numba":
    from .numba_impl import (  # noqa: F401
        conv3x3_bwd,
        conv3x3_fwd,
        inside_log,
        maxpool2_bwd,
        maxpool2_fwd,
        outside_log,
    )
else:
    from .numpy_impl import (  # noqa: F401
        conv3x3_bwd,
        conv3x3_fwd,
        inside_log,
        maxpool2_bwd,
        maxpool2_fwd,
        outside_log,
    )
