"""Accumulation helpers that keep prefix identities at machine precision.

Cumulative sums of thousands of O(1) terms lose ~n*eps absolute accuracy
when run naively in float64, which is too coarse for the 1e-12 identity
certificates this package asserts along whole trajectories. Sums are
therefore accumulated in extended precision (80-bit long double where the
platform has it, Kahan compensation otherwise) and rounded once at the
end, so every stored prefix value is correct to ~1 ulp of itself.
"""
from __future__ import annotations

import numpy as np

_HAS_LONGDOUBLE = np.finfo(np.longdouble).eps < 1e-18


def exact_cumsum(x: np.ndarray) -> np.ndarray:
    """Cumulative sum with ~1 ulp per-entry accuracy, returned as float64."""
    x = np.asarray(x, dtype=float)
    if _HAS_LONGDOUBLE:
        return np.cumsum(x.astype(np.longdouble)).astype(float)
    out = np.empty_like(x)
    total = 0.0
    comp = 0.0
    for i, value in enumerate(x):
        y = value - comp
        t = total + y
        comp = (t - total) - y
        total = t
        out[i] = total
    return out
