"""Regularity checks the equilibrium constructions rely on."""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from config import config
from game.core import loss_table, weighted_minimizer_batch
from game.models import GameSpec

logger = logging.getLogger(__name__)

COLLAPSE_TOL = 1e-8


@dataclass(frozen=True)
class InjectivityResult:
    """Exact when decided by affine independence, heuristic when sampled"""
    kind: str
    value: bool

    @property
    def exact(self) -> bool:
        return self.kind == 'exact'

    def __bool__(self) -> bool:
        return self.value

    def to_dict(self) -> dict:
        return {'kind': self.kind, 'value': self.value}


def distance_table(game: GameSpec) -> np.ndarray:
    """Entry (i, k) = d_M(theta_i, theta_k; Sigma_k^-1)"""
    return np.sqrt(loss_table(game.thetas, game))


def check_distinct_distances(game: GameSpec, tol: Optional[float] = None) -> bool:
    """No two ground truths sit at the same distance from any source."""
    tol = float(tol if tol is not None else config.get('tolerances.tie_tol', 1e-9))
    distances = distance_table(game)
    K = game.num_sources
    for k in range(K):
        column = distances[:, k]
        gaps = np.abs(column[:, None] - column[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() <= tol:
            i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
            logger.info(f"Sources {i} and {j} are equidistant from source {k}")
            return False
    return True


def check_injectivity(game: GameSpec, trials: Optional[int] = None,
                      rng_seed: Optional[int] = None) -> InjectivityResult:
    """At most one simplex point maps to each strategy."""
    if game.equal_covariances():
        differences = game.thetas[1:] - game.thetas[0]
        rank = np.linalg.matrix_rank(differences, tol=1e-10)
        return InjectivityResult('exact', bool(rank == game.num_sources - 1))

    trials = int(trials if trials is not None else config.get('injectivity.trials', 2000))
    rng_seed = int(rng_seed if rng_seed is not None else config.get('injectivity.seed', 0))
    rng = np.random.default_rng(rng_seed)
    first = rng.dirichlet(np.ones(game.num_sources), size=trials)
    second = rng.dirichlet(np.ones(game.num_sources), size=trials)
    gap = np.abs(weighted_minimizer_batch(first, game) - weighted_minimizer_batch(second, game)).max(axis=1)
    distinct = np.abs(first - second).max(axis=1) > COLLAPSE_TOL
    collapsed = bool(np.any(distinct & (gap <= COLLAPSE_TOL)))
    if collapsed:
        logger.warning(f"Sampled two distinct mixtures with the same minimizer ({trials} trials)")
    return InjectivityResult('heuristic', not collapsed)


def tail_weight(game: GameSpec, k0: int) -> float:
    """Total weight of sources k0+1..K (k0 is 1-based)"""
    return float(game.weights[k0:].sum())


def dominance_holds(game: GameSpec, k0: int) -> bool:
    """w_k0 > 3 * (w_{k0+1} + ... + w_K); vacuous at k0 = K"""
    if k0 == game.num_sources:
        return True
    return bool(game.weights[k0 - 1] > 3.0 * tail_weight(game, k0))


def dominance_levels(game: GameSpec) -> List[int]:
    """Every k0 (1-based) satisfying the dominance condition"""
    return [k0 for k0 in range(1, game.num_sources + 1) if dominance_holds(game, k0)]
