from functools import lru_cache
from math import comb
from typing import Iterator

import numpy as np

from game.errors import InputError
from game.models import MixtureWeights

STEP_TOL = 1e-9


def grid_divisions(step: float) -> int:
    """Number of divisions n = 1/step; rejects steps that do not divide 1."""
    try:
        step = float(step)
    except (TypeError, ValueError):
        raise InputError(f"grid step must be a number, got {step!r}", field='grid_step')
    if not 0 < step <= 1:
        raise InputError(f"grid step must lie in (0, 1], got {step}", field='grid_step')
    n = round(1.0 / step)
    if abs(1.0 / step - n) > STEP_TOL * max(1, n):
        raise InputError(f"1/step must be an integer, got 1/{step} = {1.0 / step}", field='grid_step')
    return int(n)


@lru_cache(maxsize=64)
def _compositions(n: int, k: int) -> np.ndarray:
    """All k-part compositions of n, first part ascending"""
    if k == 1:
        return np.array([[n]], dtype=np.int64)
    blocks = []
    for first in range(n + 1):
        rest = _compositions(n - first, k - 1)
        blocks.append(np.column_stack([np.full(rest.shape[0], first, dtype=np.int64), rest]))
    out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def simplex_grid_array(num_sources: int, step: float) -> np.ndarray:
    """G x K array of every simplex point whose coordinates are multiples of step"""
    if int(num_sources) < 1:
        raise InputError(f"need at least one source, got {num_sources}", field='K')
    n = grid_divisions(step)
    return _compositions(n, int(num_sources)) / float(n)


def simplex_grid(num_sources: int, step: float) -> Iterator[MixtureWeights]:
    for row in simplex_grid_array(num_sources, step):
        yield MixtureWeights(row)


def grid_size(num_sources: int, step: float) -> int:
    n = grid_divisions(step)
    return comb(n + num_sources - 1, num_sources - 1)
