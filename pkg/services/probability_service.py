"""Equilibria under the logit (probability) choice model.

The heterogeneous search iterates a map on the N-fold simplex, starting from the
specialization equilibrium of the proximity game. Temperatures in the threshold
searches are expressed on the grid {resolution, 2 * resolution, ..., 1} x 2 * ell_max.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from choice.choice_probability import ProbabilityChoice
from config import config
from game.core import ell_max_estimate, loss_table, monopoly_strategy, weighted_minimizer_batch
from game.errors import (AssumptionViolation, HDGameError, InfeasibleError, InputError, NumericError,
                         TheoremContradiction)
from game.models import GameSpec, MixtureWeights, StrategyProfile
from game.simplex import grid_divisions
from services.proximity_service import all_allocations, allocate_counts, build_construction
from services.verification_service import HETEROGENEOUS, HOMOGENEOUS, EquilibriumReport, verify_profile

logger = logging.getLogger(__name__)

DEDUP_TOL = 1e-6
BISECTION = 'Bisection'
GRID_SCAN = 'GridScan'


@dataclass
class FixedPointState:
    coords: np.ndarray
    iteration: int
    residual: float

    def to_dict(self) -> Dict[str, Any]:
        return {'coords': self.coords.tolist(), 'iteration': self.iteration, 'residual': self.residual}


@dataclass
class HeteroCandidate:
    """Outcome of the fixed-point search; profile is set only when it converged"""
    converged: bool
    state: FixedPointState
    profile: Optional[StrategyProfile] = None
    temperature: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        payload = {'status': 'Converged' if self.converged else 'NotConverged',
                   't': self.temperature, 'state': self.state.to_dict()}
        if self.profile is not None:
            payload['profile'] = self.profile.to_dict()
        return payload


@dataclass
class ThresholdResult:
    threshold_t: float
    grid: Dict[str, Any]
    certified_by: str
    ell_max_ref: float
    evaluations: int = 0

    @property
    def fraction(self) -> float:
        """threshold_t / (2 * ell_max)"""
        return self.threshold_t / (2.0 * self.ell_max_ref)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'threshold_t': self.threshold_t,
            'fraction': self.fraction,
            'grid': self.grid,
            'certified_by': self.certified_by,
            'ell_max_ref': self.ell_max_ref,
            'evaluations': self.evaluations,
        }


@dataclass
class HeteroSearchResult:
    found: bool
    threshold: Optional[ThresholdResult] = None
    report: Optional[EquilibriumReport] = None
    scanned: int = 0

    def to_dict(self) -> Dict[str, Any]:
        if not self.found:
            return {'status': 'NoneFound', 'scanned': self.scanned}
        return {'status': 'Found', 'scanned': self.scanned, 'threshold': self.threshold.to_dict(),
                'report': self.report.to_dict()}


@dataclass
class DuopolyProbResult:
    exists: bool
    temperature: float
    report: EquilibriumReport
    profile: Optional[StrategyProfile] = field(default=None)

    def to_dict(self) -> Dict[str, Any]:
        payload = {'status': 'Exists' if self.exists else 'NoneAtThisT', 't': self.temperature,
                   'report': self.report.to_dict()}
        if self.profile is not None:
            payload['profile'] = self.profile.to_dict()
        return payload


def _coords_array(coords, num_sources: int) -> np.ndarray:
    if isinstance(coords, np.ndarray):
        rows = np.atleast_2d(np.asarray(coords, dtype=float))
    else:
        rows = np.array([c.q if isinstance(c, MixtureWeights) else c for c in coords], dtype=float)
    if rows.ndim != 2 or rows.shape[1] != num_sources:
        raise InputError(f"coords must be N x {num_sources}, got shape {rows.shape}", field='coords')
    return rows


def map_M(coords, game: GameSpec, t: float) -> np.ndarray:
    """One step of the fixed-point map: q_n,k proportional to w_k p_n,k (1 - p_n,k)"""
    model = ProbabilityChoice(t)
    rows = _coords_array(coords, game.num_sources)
    strategies = weighted_minimizer_batch(rows, game)
    shares, complements = model.logit_terms(loss_table(strategies, game))
    raw = game.weights[None, :] * shares * complements
    totals = raw.sum(axis=1)
    dead = np.flatnonzero(~(totals > 0))
    if dead.size:
        raise NumericError(f"every w_k p (1 - p) underflowed to zero for player {dead[0]} at t={t}",
                           field=f'coords[{dead[0]}]')
    return raw / totals[:, None]


def homo_candidate(game: GameSpec, num_players: int) -> StrategyProfile:
    """N copies of the monopoly optimum, with coordinates w"""
    if isinstance(num_players, bool) or int(num_players) != num_players or num_players < 1:
        raise InputError(f"N must be a positive integer, got {num_players}", field='N')
    theta_m = monopoly_strategy(game)
    w = game.weights / game.weights.sum()
    return StrategyProfile(np.tile(theta_m, (num_players, 1)), np.tile(w, (num_players, 1)))


def _one_hot(counts: Sequence[int], num_sources: int) -> np.ndarray:
    rows = []
    for k, m in enumerate(counts):
        rows.extend([k] * int(m))
    return np.eye(num_sources)[rows]


def _lower_regime_bound(game: GameSpec) -> int:
    return int(np.floor(3.0 * game.weights / game.weights[-1] + 1e-9).sum())


def _initial_coords(game: GameSpec, num_players: int, allow_fallback: bool) -> np.ndarray:
    """One-hot rows at the source each player holds in the proximity specialization equilibrium"""
    try:
        construction = build_construction(game, num_players)
        return _one_hot(construction.counts, game.num_sources)
    except (InfeasibleError, AssumptionViolation) as e:
        if not allow_fallback:
            raise
        logger.warning(f"proximity construction unavailable for N={num_players} ({e}); "
                       f"starting from a weight-proportional split")
    if num_players < game.num_sources:
        return np.eye(game.num_sources)[:num_players]
    return _one_hot(allocate_counts(game.weights, num_players), game.num_sources)


def _iterate(coords: np.ndarray, game: GameSpec, t: float, max_iter: int, tol: float) -> HeteroCandidate:
    residual = np.inf
    iteration = 0
    while iteration < max_iter:
        updated = map_M(coords, game, t)
        residual = float(np.abs(updated - coords).max())
        coords = updated
        iteration += 1
        if iteration % 100 == 0:
            logger.debug(f"fixed point t={t:.6g} iteration {iteration}: residual {residual:.3e}")
        if residual <= tol:
            break

    state = FixedPointState(coords=coords, iteration=iteration, residual=residual)
    if residual > tol:
        logger.warning(f"fixed point did not converge at t={t:.6g} after {iteration} iterations "
                       f"(residual {residual:.3e})")
        return HeteroCandidate(converged=False, state=state, temperature=t)

    logger.info(f"fixed point converged at t={t:.6g} after {iteration} iterations")
    profile = StrategyProfile(weighted_minimizer_batch(coords, game), coords)
    return HeteroCandidate(converged=True, state=state, profile=profile, temperature=t)


def _fixed_point_settings(max_iter: Optional[int], tol: Optional[float]) -> Tuple[int, float]:
    max_iter = int(max_iter if max_iter is not None else config.get('fixed_point.max_iter', 10000))
    tol = float(tol if tol is not None else config.get('fixed_point.tol', 1e-10))
    if max_iter < 1 or not tol > 0:
        raise InputError(f"need max_iter >= 1 and tol > 0, got {max_iter} and {tol}", field='fixed_point')
    return max_iter, tol


def find_hetero_candidate(game: GameSpec, num_players: int, t: float, max_iter: Optional[int] = None,
                          tol: Optional[float] = None, allow_fallback: bool = False) -> HeteroCandidate:
    """
    Iterate map_M from the proximity specialization equilibrium until the sup-norm change
    drops below tol. With allow_fallback, players whose proximity construction is unavailable
    start from a weight-proportional split of the sources instead of raising.
    """
    ProbabilityChoice(t)  # rejects t below the configured floor
    max_iter, tol = _fixed_point_settings(max_iter, tol)
    if num_players < _lower_regime_bound(game):
        logger.warning(f"N={num_players} is below {_lower_regime_bound(game)}; a heterogeneous fixed point "
                       f"is not guaranteed")
    coords = _initial_coords(game, num_players, allow_fallback)
    return _iterate(coords, game, t, max_iter, tol)


def _canonical_rows(coords: np.ndarray) -> np.ndarray:
    order = np.lexsort(coords.T[::-1])
    return coords[order]


def find_hetero_candidates(game: GameSpec, num_players: int, t: float, max_starts: int = 8,
                           max_iter: Optional[int] = None, tol: Optional[float] = None) -> List[HeteroCandidate]:
    """Converged candidates from every admissible proximity allocation, distinct up to relabelling."""
    ProbabilityChoice(t)
    max_iter, tol = _fixed_point_settings(max_iter, tol)
    construction = build_construction(game, num_players)
    allocations = all_allocations(construction.effective_weights, num_players)[:max(1, int(max_starts))]

    found: List[HeteroCandidate] = []
    seen: List[np.ndarray] = []
    for counts in allocations:
        candidate = _iterate(_one_hot(counts, game.num_sources), game, t, max_iter, tol)
        if not candidate.converged:
            continue
        rows = _canonical_rows(candidate.state.coords)
        if any(np.abs(rows - other).max() <= DEDUP_TOL for other in seen):
            continue
        seen.append(rows)
        found.append(candidate)
    logger.info(f"{len(found)} distinct fixed points from {len(allocations)} starts at t={t:.6g}")
    return found


def utility_gradient(player: int, profile: StrategyProfile, game: GameSpec, t: float) -> np.ndarray:
    """-(2/t) sum_k w_k p_n,k (1 - p_n,k) Sigma_k (theta_n - theta_k)"""
    if not 0 <= player < profile.num_players:
        raise InputError(f"player {player} out of range for {profile.num_players} players", field='player')
    model = ProbabilityChoice(t)
    shares, complements = model.logit_terms(loss_table(profile.strategies, game))
    diffs = profile.strategies[player][None, :] - game.thetas
    pulls = np.einsum('kij,kj->ki', game.sigmas, diffs)
    scale = game.weights * shares[player] * complements[player]
    return -(2.0 / model.temperature) * (scale @ pulls)


def verify_pne_prob(profile: StrategyProfile, game: GameSpec, t: float, grid_step: Optional[float] = None,
                    max_workers: int = 1) -> EquilibriumReport:
    return verify_profile(profile, game, ProbabilityChoice(t), grid_step=grid_step, max_workers=max_workers)


def _temperature_grid(game: GameSpec, resolution: Optional[float], ell_max: Optional[float]):
    resolution = float(resolution if resolution is not None else config.get('threshold.resolution', 0.001))
    divisions = grid_divisions(resolution)
    ell = float(ell_max if ell_max is not None else ell_max_estimate(game))
    if not ell > 0:
        raise NumericError(f"ell_max estimate must be positive, got {ell}", field='ell_max')
    grid = {'resolution': resolution, 'points': divisions, 'scale': 2.0 * ell}
    return divisions, ell, grid


def threshold_homo_t(game: GameSpec, num_players: int, resolution: Optional[float] = None,
                     grid_step: Optional[float] = None, ell_max: Optional[float] = None) -> ThresholdResult:
    """Smallest grid temperature at which the homogeneous profile verifies, found by bisection."""
    divisions, ell, grid = _temperature_grid(game, resolution, ell_max)
    profile = homo_candidate(game, num_players)
    evaluations = 0

    def verified_at(i: int) -> bool:
        nonlocal evaluations
        evaluations += 1
        t = i / divisions * 2.0 * ell
        ok = verify_pne_prob(profile, game, t, grid_step).verified
        logger.debug(f"homogeneous N={num_players} at t={t:.6g} ({i}/{divisions}): verified={ok}")
        return ok

    if not verified_at(divisions):
        raise TheoremContradiction(f"homogeneous profile fails verification at t = 2 ell_max = {2 * ell:.6g}; "
                                   f"the deviation grid is likely too coarse", field='grid_step')
    # lo: known (or assumed, at 0) failure; hi: known success
    lo, hi = 0, divisions
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if verified_at(mid):
            hi = mid
        else:
            lo = mid

    result = ThresholdResult(threshold_t=hi / divisions * 2.0 * ell, grid=grid, certified_by=BISECTION,
                             ell_max_ref=ell, evaluations=evaluations)
    logger.info(f"homogeneous threshold N={num_players}: t={result.threshold_t:.6g} "
                f"({result.fraction:.4f} x 2 ell_max)")
    return result


def _hetero_verified_at(game: GameSpec, num_players: int, t: float, grid_step: Optional[float],
                        max_iter: Optional[int], tol: Optional[float]) -> Optional[EquilibriumReport]:
    try:
        candidate = find_hetero_candidate(game, num_players, t, max_iter, tol, allow_fallback=True)
        if not candidate.converged:
            return None
        report = verify_pne_prob(candidate.profile, game, t, grid_step)
    except HDGameError as e:
        logger.debug(f"heterogeneous search at t={t:.6g} failed: {e}")
        return None
    if report.verified and report.classification == HETEROGENEOUS:
        return report
    return None


def max_hetero_t(game: GameSpec, num_players: int, resolution: Optional[float] = None,
                 grid_step: Optional[float] = None, ell_max: Optional[float] = None,
                 max_iter: Optional[int] = None, tol: Optional[float] = None,
                 max_workers: int = 1) -> HeteroSearchResult:
    """
    Largest grid temperature at which the fixed-point search yields a verified heterogeneous
    equilibrium. No monotonicity is assumed, so the scan walks down the whole grid; the
    result is a lower bound on the true maximum.
    """
    divisions, ell, grid = _temperature_grid(game, resolution, ell_max)
    indices = list(range(divisions, 0, -1))
    chunk = max(1, int(max_workers))
    scanned = 0

    for start in range(0, len(indices), chunk):
        block = indices[start:start + chunk]
        temps = [i / divisions * 2.0 * ell for i in block]
        if chunk > 1:
            with ThreadPoolExecutor(max_workers=chunk) as pool:
                reports = list(pool.map(lambda t: _hetero_verified_at(game, num_players, t, grid_step,
                                                                      max_iter, tol), temps))
        else:
            reports = [_hetero_verified_at(game, num_players, temps[0], grid_step, max_iter, tol)]
        for t, report in zip(temps, reports):
            scanned += 1
            if report is not None:
                threshold = ThresholdResult(threshold_t=t, grid=grid, certified_by=GRID_SCAN,
                                            ell_max_ref=ell, evaluations=scanned)
                logger.info(f"heterogeneous equilibrium N={num_players} found at t={t:.6g} "
                            f"({threshold.fraction:.4f} x 2 ell_max)")
                return HeteroSearchResult(found=True, threshold=threshold, report=report, scanned=scanned)

    logger.info(f"no heterogeneous equilibrium found for N={num_players} over {scanned} temperatures")
    return HeteroSearchResult(found=False, scanned=scanned)


def duopoly_prob_pne(game: GameSpec, t: float, grid_step: Optional[float] = None) -> DuopolyProbResult:
    """Two providers: both at the monopoly optimum is the only candidate, so verifying it decides t."""
    profile = homo_candidate(game, 2)
    report = verify_pne_prob(profile, game, t, grid_step)
    return DuopolyProbResult(exists=report.verified, temperature=float(t), report=report,
                             profile=profile if report.verified else None)


def homogeneous_uniqueness_surrogate(game: GameSpec, num_players: int, grid_step: Optional[float] = None,
                                     ell_max: Optional[float] = None) -> bool:
    """At t = 2 ell_max the heterogeneous search should fail or collapse onto the homogeneous profile."""
    ell = float(ell_max if ell_max is not None else ell_max_estimate(game))
    t = 2.0 * ell
    candidate = find_hetero_candidate(game, num_players, t, allow_fallback=True)
    if not candidate.converged:
        return True
    report = verify_pne_prob(candidate.profile, game, t, grid_step)
    return not report.verified or report.classification == HOMOGENEOUS


def hetero_distance_curve(game: GameSpec, num_players: int,
                          fractions: Sequence[float] = (0.2, 0.1, 0.05, 0.02),
                          ell_max: Optional[float] = None) -> List[Tuple[float, float]]:
    """max_n ||theta_n(hetero) - theta_n(proximity)||_2 along t = fraction x 2 ell_max; nan if unconverged"""
    ell = float(ell_max if ell_max is not None else ell_max_estimate(game))
    proximity = build_construction(game, num_players).profile.strategies
    curve = []
    for fraction in fractions:
        t = float(fraction) * 2.0 * ell
        candidate = find_hetero_candidate(game, num_players, t)
        if candidate.converged:
            distance = float(np.linalg.norm(candidate.profile.strategies - proximity, axis=1).max())
        else:
            distance = float('nan')
        curve.append((t, distance))
    return curve
