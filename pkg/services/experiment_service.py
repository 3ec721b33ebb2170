"""Synthetic study: random games, critical-temperature sweeps and deviation curves."""
import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from scipy.stats import ortho_group

from choice.choice_probability import ProbabilityChoice
from config import config
from game.assumptions import check_distinct_distances, check_injectivity
from game.core import ell_max_estimate, loss_table, weighted_minimizer_batch
from game.errors import HDGameError, InfeasibleError, InputError
from game.models import DataSource, GameSpec, StrategyProfile
from game.simplex import grid_divisions
from interfaces.i_choice_model import IChoiceModel
from services.probability_service import max_hetero_t, threshold_homo_t

logger = logging.getLogger(__name__)

SWEEP_HEADER = ['game_id', 'N', 'ell_max', 'homo_threshold_frac', 'hetero_max_frac', 'hetero_found', 'error']
CURVE_HEADER = ['alpha', 'utility']
FRACTION_SLACK = 1e-9


def fmt(value: Optional[float]) -> str:
    """Nine significant digits; empty for missing values"""
    if value is None:
        return ''
    return f"{float(value):.9g}"


def _random_covariance(rng: np.random.Generator, dimension: int, eig_floor: float) -> np.ndarray:
    # eigenvalues in (eig_floor, 1]
    eigenvalues = 1.0 - rng.uniform(0.0, 1.0 - eig_floor, size=dimension)
    if dimension == 1:
        return eigenvalues.reshape(1, 1)
    basis = ortho_group.rvs(dim=dimension, random_state=rng)
    sigma = basis @ np.diag(eigenvalues) @ basis.T
    return (sigma + sigma.T) / 2.0


def _random_thetas(rng: np.random.Generator, num_sources: int, dimension: int, low: float, high: float,
                   min_separation: float) -> Optional[np.ndarray]:
    thetas = rng.uniform(low, high, size=(num_sources, dimension))
    gaps = np.linalg.norm(thetas[:, None, :] - thetas[None, :, :], axis=2)
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() < min_separation:
        return None
    return thetas


def _random_weights(rng: np.random.Generator, num_sources: int, min_tail_weight: float) -> Optional[np.ndarray]:
    weights = np.sort(rng.dirichlet(np.ones(num_sources)))[::-1]
    weights = weights / weights.sum()
    if np.any(np.diff(weights) >= 0):
        return None
    if num_sources == 2 and weights[1] < min_tail_weight:
        return None
    return weights


def gen_random_game(num_sources: int, dimension: int, seed: int, attempts: Optional[int] = None) -> GameSpec:
    """
    Random game with covariances Q diag(lambda) Q^T (lambda uniform in (floor, 1]), ground truths
    uniform in a box with a separation floor, and strictly decreasing weights. Draws that fail the
    distinct-distance or injectivity checks are discarded. Deterministic in seed.
    """
    if int(num_sources) < 2 or int(dimension) < 1:
        raise InputError(f"need K >= 2 and D >= 1, got K={num_sources}, D={dimension}", field='K')
    attempts = int(attempts if attempts is not None else config.get('generator.attempts', 1000))
    eig_floor = float(config.get('generator.eig_floor', 0.1))
    low = float(config.get('generator.theta_low', -1.0))
    high = float(config.get('generator.theta_high', 1.0))
    min_separation = float(config.get('generator.min_separation', 0.1))
    min_tail_weight = float(config.get('generator.min_tail_weight', 0.1))

    rng = np.random.default_rng(seed)
    for attempt in range(1, attempts + 1):
        sigmas = [_random_covariance(rng, dimension, eig_floor) for _ in range(num_sources)]
        thetas = _random_thetas(rng, num_sources, dimension, low, high, min_separation)
        weights = _random_weights(rng, num_sources, min_tail_weight)
        if thetas is None or weights is None:
            continue
        try:
            game = GameSpec(dimension=int(dimension), seed=int(seed), sources=[
                DataSource(theta=theta, sigma=sigma, weight=w) for theta, sigma, w in zip(thetas, sigmas, weights)
            ])
        except InputError as e:
            logger.debug(f"attempt {attempt} rejected: {e}")
            continue
        if check_distinct_distances(game) and check_injectivity(game):
            logger.info(f"Generated game K={num_sources} D={dimension} seed={seed} after {attempt} attempts")
            return game
    raise InfeasibleError(f"no admissible game after {attempts} attempts", field='seed')


def gen_random_games(count: int, num_sources: int, dimension: int, seed: int) -> List[GameSpec]:
    """`count` games, each seeded from an independent child of seed"""
    children = np.random.SeedSequence(seed).spawn(int(count))
    return [gen_random_game(num_sources, dimension, int(child.generate_state(1)[0])) for child in children]


@dataclass(frozen=True)
class SweepRow:
    game_id: int
    N: int
    ell_max: Optional[float] = None
    homo_threshold_frac: Optional[float] = None
    hetero_max_frac: Optional[float] = None
    hetero_found: bool = False
    error: Optional[str] = None

    def to_csv_row(self) -> List[str]:
        return [str(self.game_id), str(self.N), fmt(self.ell_max), fmt(self.homo_threshold_frac),
                fmt(self.hetero_max_frac), 'true' if self.hetero_found else 'false', self.error or '']

    def to_dict(self) -> Dict[str, Any]:
        return {'game_id': self.game_id, 'N': self.N, 'ell_max': self.ell_max,
                'homo_threshold_frac': self.homo_threshold_frac, 'hetero_max_frac': self.hetero_max_frac,
                'hetero_found': self.hetero_found, 'error': self.error}


def _sweep_cell(game_id: int, game: GameSpec, num_players: int, resolution: float,
                grid_step: Optional[float]) -> SweepRow:
    try:
        ell = ell_max_estimate(game)
    except HDGameError as e:
        return SweepRow(game_id, num_players, error=str(e))

    homo_frac, hetero_frac, found, errors = None, None, False, []
    try:
        homo = threshold_homo_t(game, num_players, resolution, grid_step, ell_max=ell)
        homo_frac = homo.fraction
        if homo_frac > 1.0 + FRACTION_SLACK:
            errors.append(f"homogeneous threshold {homo_frac:.6g} x 2 ell_max exceeds 1; grid too coarse")
    except HDGameError as e:
        errors.append(str(e))
    try:
        hetero = max_hetero_t(game, num_players, resolution, grid_step, ell_max=ell)
        if hetero.found:
            found, hetero_frac = True, hetero.threshold.fraction
    except HDGameError as e:
        errors.append(str(e))

    logger.info(f"sweep cell game={game_id} N={num_players}: homo={homo_frac} hetero={hetero_frac}")
    return SweepRow(game_id, num_players, ell, homo_frac, hetero_frac, found, '; '.join(errors) or None)


def sweep_critical_temperatures(games: Sequence[GameSpec], n_values: Iterable[int],
                                resolution: Optional[float] = None, grid_step: Optional[float] = None,
                                max_workers: Optional[int] = None) -> List[SweepRow]:
    """
    Homogeneous threshold and largest heterogeneous temperature for every (game, N) cell.
    Cell failures are recorded on the row. Rows come back sorted by (game_id, N).
    """
    resolution = float(resolution if resolution is not None else config.get('sweep.resolution', 0.001))
    grid_divisions(resolution)
    n_values = sorted({int(n) for n in n_values})
    if not n_values or n_values[0] < 1:
        raise InputError(f"N values must be positive integers, got {n_values}", field='N')
    workers = config.threads(max_workers)
    cells = [(game_id, game, n) for game_id, game in enumerate(games) for n in n_values]
    logger.info(f"Sweeping {len(cells)} cells at resolution {resolution} with {workers} workers")

    if workers > 1 and len(cells) > 1:
        rows = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_sweep_cell, game_id, game, n, resolution, grid_step)
                       for game_id, game, n in cells]
            for future in as_completed(futures):
                rows.append(future.result())
    else:
        rows = [_sweep_cell(game_id, game, n, resolution, grid_step) for game_id, game, n in cells]
    return sorted(rows, key=lambda row: (row.game_id, row.N))


def _write_rows(header: List[str], rows: Iterable[List[str]], out: Union[str, Path, TextIO, None]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    text = buffer.getvalue()
    if isinstance(out, (str, Path)):
        Path(out).write_text(text)
    elif out is not None:
        out.write(text)
    return text


def write_sweep_csv(rows: Sequence[SweepRow], out: Union[str, Path, TextIO, None] = None) -> str:
    return _write_rows(SWEEP_HEADER, (row.to_csv_row() for row in rows), out)


def deviation_curve(game: GameSpec, profile: StrategyProfile, player: int, t: Optional[float] = None,
                    alpha_step: float = 0.002, model: Optional[IChoiceModel] = None) -> List[Tuple[float, float]]:
    """Utility of `player` after moving to theta_bar((alpha, 1 - alpha)), everyone else fixed."""
    if game.num_sources != 2:
        raise InputError(f"deviation curves need K = 2, got K = {game.num_sources}", field='K')
    if not 0 <= player < profile.num_players:
        raise InputError(f"player {player} out of range for {profile.num_players} players", field='player')
    if model is None:
        if t is None:
            raise InputError("a temperature is required for the probability model", field='t')
        model = ProbabilityChoice(t)

    divisions = grid_divisions(alpha_step)
    alphas = np.arange(divisions + 1) / divisions
    q_rows = np.column_stack([alphas, 1.0 - alphas])
    losses = loss_table(weighted_minimizer_batch(q_rows, game), game)
    others = np.delete(loss_table(profile.strategies, game), player, axis=0)
    values = model.deviation_shares(losses, others) @ game.weights
    return [(float(a), float(u)) for a, u in zip(alphas, values)]


def curve_argmax(curve: Sequence[Tuple[float, float]]) -> float:
    """alpha of the highest point on a deviation curve; ties go to the smallest alpha"""
    best = max(range(len(curve)), key=lambda i: (curve[i][1], -i))
    return curve[best][0]


def write_curve_csv(curve: Sequence[Tuple[float, float]], out: Union[str, Path, TextIO, None] = None) -> str:
    return _write_rows(CURVE_HEADER, ([fmt(a), fmt(u)] for a, u in curve), out)