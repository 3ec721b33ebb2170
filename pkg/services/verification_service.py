"""Grid-certified equilibrium verification shared by both choice models.

Deviations are restricted to the image of a simplex grid under theta_bar (plus the
ground-truth vertices), so every certificate is relative to that grid: a verified
profile is an epsilon-equilibrium at grid resolution, not a proof over all of R^D.
"""
import itertools
import logging
from math import comb
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from config import config
from game.core import deviation_grid, loss_table, monopoly_strategy, utilities, validate_coords
from game.errors import InputError
from game.models import GameSpec, StrategyProfile
from interfaces.i_choice_model import IChoiceModel

logger = logging.getLogger(__name__)

HOMOGENEOUS = 'homogeneous'
HETEROGENEOUS = 'heterogeneous'
NOT_EQUILIBRIUM = 'not_equilibrium'

CERTIFICATE_NOTE = ("grid-relative certificate: no deviation on the simplex grid (plus vertices) "
                    "improves any provider's utility beyond utility_tol")


@dataclass
class EquilibriumReport:
    profile: StrategyProfile
    verified: bool
    classification: str
    utilities: np.ndarray
    grid_step: float
    best_deviation_gain: float
    model: Dict[str, Any]
    utility_tol: float = 1e-9
    grid_size: int = 0
    best_deviation: Optional[Dict[str, Any]] = None
    note: str = CERTIFICATE_NOTE
    player_gains: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'verified': self.verified,
            'classification': self.classification,
            'utilities': [float(u) for u in self.utilities],
            'grid_step': self.grid_step,
            'grid_size': self.grid_size,
            'best_deviation_gain': float(self.best_deviation_gain),
            'best_deviation': self.best_deviation,
            'player_gains': [float(g) for g in self.player_gains],
            'utility_tol': self.utility_tol,
            'model': self.model,
            'note': self.note,
            'profile': self.profile.to_dict(),
        }


def strategy_groups(profile: StrategyProfile, tol: float) -> List[List[int]]:
    """Players bucketed by strategy (infinity-norm within tol), in first-seen order"""
    groups: List[List[int]] = []
    for n, strategy in enumerate(profile.strategies):
        for group in groups:
            if np.abs(profile.strategies[group[0]] - strategy).max() <= tol:
                group.append(n)
                break
        else:
            groups.append([n])
    return groups


def classify(profile: StrategyProfile, game: GameSpec, model: IChoiceModel,
             verified: bool, tol: Optional[float] = None) -> str:
    if not verified:
        return NOT_EQUILIBRIUM
    tol = float(tol if tol is not None else config.get('tolerances.strategy_eq_tol', 1e-8))
    if len(strategy_groups(profile, tol)) > 1:
        return HETEROGENEOUS
    if profile.num_players == 1:
        return HOMOGENEOUS
    # under proximity a shared strategy is a specialization unless it is the monopoly optimum
    if model.kind == 'proximity':
        at_monopoly = np.abs(profile.strategies[0] - monopoly_strategy(game)).max() <= tol
        return HOMOGENEOUS if at_monopoly else HETEROGENEOUS
    return HOMOGENEOUS


def best_response_grid(player: int, profile: StrategyProfile, game: GameSpec, model: IChoiceModel,
                       grid_step: float):
    """
    Utility `player` would earn at every grid deviation, others fixed.
    Returns (deviation utilities of length G, the G x K simplex points).
    """
    if not 0 <= player < profile.num_players:
        raise InputError(f"player {player} out of range for {profile.num_players} players", field='player')
    q_rows, _, grid_losses = deviation_grid(game, grid_step)
    losses = loss_table(profile.strategies, game)
    others = np.delete(losses, player, axis=0)
    shares = model.deviation_shares(grid_losses, others)
    return shares @ game.weights, q_rows


def verify_profile(profile: StrategyProfile, game: GameSpec, model: IChoiceModel,
                   grid_step: Optional[float] = None, utility_tol: Optional[float] = None,
                   max_workers: int = 1) -> EquilibriumReport:
    """Scan every provider's grid deviations and report the largest gain found."""
    if profile.dimension != game.dimension:
        raise InputError(f"profile dimension {profile.dimension} does not match game dimension "
                         f"{game.dimension}", field='strategies')
    validate_coords(profile, game)
    grid_step = float(grid_step if grid_step is not None else config.grid_step_for(game.num_sources))
    utility_tol = float(utility_tol if utility_tol is not None else config.get('tolerances.utility_tol', 1e-9))

    current = utilities(profile, game, model)
    # identical strategies face identical opponents, so one scan serves the group
    groups = strategy_groups(profile, 0.0)

    def scan(group):
        player = group[0]
        values, q_rows = best_response_grid(player, profile, game, model, grid_step)
        best = int(np.argmax(values))
        return float(values[best] - current[player]), q_rows[best], q_rows.shape[0]

    if max_workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            scans = list(pool.map(scan, groups))
    else:
        scans = [scan(group) for group in groups]

    player_gains = np.empty(profile.num_players)
    for group, (gain, _, _) in zip(groups, scans):
        player_gains[group] = gain
    # ties resolve to the lowest group index, independent of evaluation order
    top = int(np.argmax([gain for gain, _, _ in scans]))
    best_gain, best_q, grid_size = scans[top]
    verified = bool(best_gain <= utility_tol)

    report = EquilibriumReport(
        profile=profile,
        verified=verified,
        classification=classify(profile, game, model, verified),
        utilities=current,
        grid_step=grid_step,
        best_deviation_gain=best_gain,
        model=model.to_dict(),
        utility_tol=utility_tol,
        grid_size=grid_size,
        best_deviation={'player': groups[top][0], 'q': [float(x) for x in best_q]},
        player_gains=player_gains.tolist(),
    )
    logger.info(f"Verified={verified} under {model!r}: best gain {best_gain:.3e} "
                f"on {grid_size} grid points")
    return report


def _pairwise_deviation_utilities(grid_losses: np.ndarray, game: GameSpec, model: IChoiceModel) -> np.ndarray:
    """V[g, b]: utility of a provider at g facing a single opponent at b"""
    G = grid_losses.shape[0]
    values = np.empty((G, G))
    for b in range(G):
        values[:, b] = model.deviation_shares(grid_losses, grid_losses[b:b + 1]) @ game.weights
    return values


def brute_force_grid_pne(game: GameSpec, num_players: int, model: IChoiceModel, grid_step: float,
                         utility_tol: Optional[float] = None, max_profiles: int = 200_000) -> List[StrategyProfile]:
    """
    Every grid-epsilon equilibrium among profiles built from grid points. Providers are
    interchangeable, so multisets of grid points cover every profile.
    """
    utility_tol = float(utility_tol if utility_tol is not None else config.get('tolerances.utility_tol', 1e-9))
    q_rows, points, grid_losses = deviation_grid(game, grid_step)
    G = q_rows.shape[0]

    if num_players == 2:
        values = _pairwise_deviation_utilities(grid_losses, game, model)
        best = values.max(axis=0)
        stable = values >= best[None, :] - utility_tol
        a_idx, b_idx = np.nonzero(np.triu(stable & stable.T))
        return [StrategyProfile(points[[a, b]], q_rows[[a, b]]) for a, b in zip(a_idx, b_idx)]

    total = comb(G + num_players - 1, num_players)
    if total > max_profiles:
        raise InputError(f"{total} candidate profiles exceed the brute-force budget of {max_profiles}",
                         field='grid_step')

    found = []
    for combo in itertools.combinations_with_replacement(range(G), num_players):
        indices = list(combo)
        losses = grid_losses[indices]
        current = model.share_matrix(losses) @ game.weights
        stable = True
        for n in range(num_players):
            if n > 0 and indices[n] == indices[n - 1]:
                continue
            gains = model.deviation_shares(grid_losses, np.delete(losses, n, axis=0)) @ game.weights
            if gains.max() - current[n] > utility_tol:
                stable = False
                break
        if stable:
            found.append(StrategyProfile(points[indices], q_rows[indices]))
    logger.info(f"Brute force over {total} profiles found {len(found)} grid equilibria")
    return found
