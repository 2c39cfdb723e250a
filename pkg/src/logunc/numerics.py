"""Base-2 logarithms with the small-argument convention log q = 1 for q < 2."""
from __future__ import annotations

import math

import numpy as np


def lg(x: float) -> float:
    return math.log2(x) if x >= 2 else 1.0


def loglog(q: float) -> float:
    # applied at both nesting levels, so loglog(q) >= 1 everywhere
    return lg(lg(q))


def lg_array(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 2, np.log2(np.maximum(x, 2.0)), 1.0)


def loglog_array(q: np.ndarray) -> np.ndarray:
    return lg_array(lg_array(q))
