"""Equilibria under the proximity choice model."""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from choice.choice_proximity import ProximityChoice
from config import config
from game.assumptions import (check_distinct_distances, check_injectivity, distance_table,
                              dominance_holds, tail_weight)
from game.errors import AssumptionViolation, InfeasibleError, InputError
from game.models import GameSpec, StrategyProfile
from services.verification_service import EquilibriumReport, strategy_groups, verify_profile

logger = logging.getLogger(__name__)

NEAREST_TIE_TOL = 1e-9


def _integral_tol() -> float:
    return float(config.get('tolerances.integral_tol', 1e-9))


@dataclass(frozen=True)
class NRange:
    """Inclusive range of provider counts; hi is math.inf in the large-N regime"""
    lo: int
    hi: float

    def contains(self, n: int) -> bool:
        return self.lo <= n <= self.hi

    def to_dict(self) -> Dict[str, Any]:
        return {'lo': self.lo, 'hi': None if math.isinf(self.hi) else int(self.hi)}


@dataclass(frozen=True)
class ProximityConstruction:
    k0: int
    effective_weights: np.ndarray
    z_star: float
    counts: np.ndarray
    n_range: NRange
    profile: StrategyProfile

    def to_dict(self) -> Dict[str, Any]:
        return {
            'k0': self.k0,
            'effective_weights': self.effective_weights.tolist(),
            'z_star': self.z_star,
            'counts': [int(m) for m in self.counts],
            'n_range': self.n_range.to_dict(),
            'profile': self.profile.to_dict(),
        }


@dataclass(frozen=True)
class DuopolyResult:
    exists: bool
    profile: Optional[StrategyProfile] = None
    unique: bool = False

    def to_dict(self) -> Dict[str, Any]:
        if not self.exists:
            return {'status': 'NoneExists'}
        return {'status': 'Exists', 'unique': self.unique, 'profile': self.profile.to_dict()}


def _check_k0(game: GameSpec, k0: int) -> int:
    if isinstance(k0, bool) or int(k0) != k0 or not 1 <= k0 <= game.num_sources:
        raise InputError(f"k0 must be an integer in [1, {game.num_sources}], got {k0}", field='k0')
    return int(k0)


def duopoly_pne(game: GameSpec, strict: bool = False) -> DuopolyResult:
    """Two providers: an equilibrium exists iff the top source holds at least half the market."""
    injective = check_injectivity(game)
    if not injective:
        message = f"injectivity check failed ({injective.kind}); duopoly characterization may not apply"
        if strict:
            raise AssumptionViolation(message, field='sources')
        logger.warning(message)

    w1 = float(game.weights[0])
    if w1 < 0.5:
        return DuopolyResult(exists=False)
    top = game.thetas[0]
    coords = np.zeros((2, game.num_sources))
    coords[:, 0] = 1.0
    return DuopolyResult(exists=True, profile=StrategyProfile(np.stack([top, top]), coords), unique=w1 > 0.5)


def effective_weights(game: GameSpec, k0: int) -> np.ndarray:
    """Dominant weights with every tail source folded into the dominant source nearest to it."""
    k0 = _check_k0(game, k0)
    if not dominance_holds(game, k0):
        logger.warning(f"k0={k0}: w_k0={game.weights[k0 - 1]:.6g} is not above three times the tail "
                       f"weight {tail_weight(game, k0):.6g}")
    w_prime = np.array(game.weights[:k0], dtype=float)
    distances = distance_table(game)
    for j in range(k0, game.num_sources):
        # loss of each dominant ground truth on tail source j
        candidate = distances[:k0, j]
        order = np.argsort(candidate, kind='stable')
        if k0 > 1 and candidate[order[1]] - candidate[order[0]] <= NEAREST_TIE_TOL:
            raise AssumptionViolation(
                f"tail source {j + 1} is equidistant from dominant sources {order[0] + 1} and {order[1] + 1}",
                field=f'sources[{j}].theta')
        w_prime[order[0]] += game.weights[j]
    return w_prime


def _h(w_prime: np.ndarray, z: float, tol: float) -> int:
    return int(np.floor(w_prime / z + tol).sum())


def z_star(w_prime: Sequence[float], num_players: int) -> float:
    """sup{z > 0 : sum_k floor(w'_k / z) >= N}, attained on the candidates w'_k / n."""
    w_prime = np.asarray(w_prime, dtype=float)
    if num_players < len(w_prime):
        raise InputError(f"N={num_players} is smaller than the {len(w_prime)} dominant sources", field='N')
    tol = _integral_tol()
    candidates = np.unique((w_prime[:, None] / np.arange(1, num_players + 1)[None, :]).ravel())[::-1]
    for z in candidates:
        if _h(w_prime, z, tol) >= num_players:
            return float(z)
    raise InfeasibleError(f"no z satisfies h(z) >= {num_players}", field='N')


def _count_options(w_prime: np.ndarray, num_players: int):
    """(z*, floors, integral indices, excess) shared by the allocation routines"""
    z = z_star(w_prime, num_players)
    tol = _integral_tol()
    ratios = w_prime / z
    floors = np.floor(ratios + tol).astype(int)
    integral = [k for k in range(len(w_prime)) if abs(ratios[k] - np.round(ratios[k])) <= tol]
    excess = int(floors.sum()) - num_players
    if excess > len(integral):
        raise InfeasibleError(f"cannot trim {excess} providers from {len(integral)} integral sources", field='N')
    return z, floors, integral, excess


def allocate_counts(w_prime: Sequence[float], num_players: int) -> np.ndarray:
    """Providers per dominant source: floor(w'_k / z*), trimmed at the smallest integral indices."""
    w_prime = np.asarray(w_prime, dtype=float)
    _, floors, integral, excess = _count_options(w_prime, num_players)
    counts = floors.copy()
    for k in integral[:excess]:
        counts[k] -= 1
    return counts


def all_allocations(w_prime: Sequence[float], num_players: int) -> List[np.ndarray]:
    """Every trimming choice consistent with z*, canonical (smallest indices) first"""
    w_prime = np.asarray(w_prime, dtype=float)
    _, floors, integral, excess = _count_options(w_prime, num_players)
    allocations = []
    for trimmed in itertools.combinations(integral, excess):
        counts = floors.copy()
        counts[list(trimmed)] -= 1
        allocations.append(counts)
    return allocations


def n_range(game: GameSpec, k0: int) -> NRange:
    """Provider counts for which the specialization equilibrium on the top k0 sources exists."""
    k0 = _check_k0(game, k0)
    if not dominance_holds(game, k0):
        raise AssumptionViolation(
            f"dominance fails at k0={k0}: {game.weights[k0 - 1]:.6g} <= 3 x {tail_weight(game, k0):.6g}",
            field='k0')
    tol = _integral_tol()
    w_prime = effective_weights(game, k0)
    lo = int(np.floor(3.0 * w_prime / w_prime[-1] + tol).sum())
    if k0 == game.num_sources:
        return NRange(lo, math.inf)
    tail = tail_weight(game, k0)
    hi = int((np.ceil(w_prime / tail - tol) - 1).sum())
    return NRange(lo, hi)


def _check_assumptions(game: GameSpec) -> None:
    injective = check_injectivity(game)
    if not injective:
        raise AssumptionViolation(f"injectivity check failed ({injective.kind})", field='sources')
    if not check_distinct_distances(game):
        raise AssumptionViolation("two ground truths are equidistant from some source", field='sources')


def _build(game: GameSpec, num_players: int, k0: int, counts: np.ndarray, w_prime: np.ndarray,
           z: float, bounds: NRange) -> ProximityConstruction:
    rows, coords = [], []
    for k, m in enumerate(counts):
        for _ in range(int(m)):
            rows.append(game.thetas[k])
            coord = np.zeros(game.num_sources)
            coord[k] = 1.0
            coords.append(coord)
    profile = StrategyProfile(np.stack(rows), np.stack(coords))
    return ProximityConstruction(k0=k0, effective_weights=w_prime, z_star=z, counts=counts,
                                 n_range=bounds, profile=profile)


def build_construction(game: GameSpec, num_players: int, k0: Optional[int] = None,
                       check_assumptions: bool = True) -> ProximityConstruction:
    """Specialization equilibrium: m_k providers on each of the top k0 ground truths."""
    if isinstance(num_players, bool) or int(num_players) != num_players or num_players < 1:
        raise InputError(f"N must be a positive integer, got {num_players}", field='N')
    if check_assumptions:
        _check_assumptions(game)

    if k0 is None:
        return _auto_construction(game, num_players)

    k0 = _check_k0(game, k0)
    bounds = n_range(game, k0)
    if num_players < bounds.lo:
        raise InfeasibleError(f"N={num_players} is below the lower bound {bounds.lo} of the provider-count "
                              f"range for k0={k0}", field='N')
    if num_players > bounds.hi:
        raise InfeasibleError(f"N={num_players} is above the upper bound {bounds.hi} of the provider-count "
                              f"range for k0={k0}", field='N')
    w_prime = effective_weights(game, k0)
    counts = allocate_counts(w_prime, num_players)
    construction = _build(game, num_players, k0, counts, w_prime, z_star(w_prime, num_players), bounds)
    logger.info(f"Proximity construction N={num_players} k0={k0}: counts {counts.tolist()}")
    return construction


def _auto_construction(game: GameSpec, num_players: int) -> ProximityConstruction:
    candidates = [game.num_sources] + [k0 for k0 in range(game.num_sources - 1, 0, -1)
                                       if dominance_holds(game, k0)]
    for k0 in candidates:
        try:
            if n_range(game, k0).contains(num_players):
                return build_construction(game, num_players, k0, check_assumptions=False)
        except AssumptionViolation as e:
            logger.debug(f"k0={k0} skipped: {e}")
    raise InfeasibleError(f"no k0 admits a specialization equilibrium with N={num_players}", field='N')


def construct_pne_prox(game: GameSpec, num_players: int, k0: Optional[int] = None) -> StrategyProfile:
    return build_construction(game, num_players, k0).profile


def verify_pne_prox(profile: StrategyProfile, game: GameSpec, grid_step: Optional[float] = None,
                    tie_tol: Optional[float] = None) -> EquilibriumReport:
    return verify_profile(profile, game, ProximityChoice(tie_tol=tie_tol), grid_step=grid_step)


def check_heterogeneity(profile: StrategyProfile, game: GameSpec, tol: float = 1e-9) -> bool:
    """Shared strategies occur only at ground-truth parameters."""
    for group in strategy_groups(profile, tol):
        if len(group) < 2:
            continue
        strategy = profile.strategies[group[0]]
        if np.abs(game.thetas - strategy).max(axis=1).min() > tol:
            return False
    return True
