"""Backend selection for the series kernel.

Prefers the compiled Cython extension; falls back to the numpy implementation
when the extension is unavailable.  Set ASKOPT_PURE_PYTHON=1 to force the
fallback (used for benchmarking and backend-equivalence tests).
"""

from __future__ import annotations

import os


def _force_python() -> bool:
    return os.environ.get("ASKOPT_PURE_PYTHON", "").strip().lower() not in ("", "0", "false")


if _force_python():
    from askopt import _series_py as _impl
else:
    try:
        from askopt import _series_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        from askopt import _series_py as _impl  # type: ignore[no-redef]

backend_name: str = _impl.backend_name
series_sum = _impl.series_sum
series_sum_grad = _impl.series_sum_grad
SeriesOverflowError = _impl.SeriesOverflowError
