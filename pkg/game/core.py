"""Primitive formulas of the game: losses, utilities and the weighted minimizer."""
import logging
import threading
from typing import Optional, Tuple

import numpy as np
from cachetools import LRUCache, cached
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from config import config
from game.errors import InputError, NumericError
from game.models import DataSource, GameSpec, LossMatrix, MixtureWeights, StrategyProfile
from game.simplex import simplex_grid_array
from interfaces.i_choice_model import IChoiceModel

logger = logging.getLogger(__name__)

COORD_TOL = 1e-8


def _max_condition() -> float:
    return float(config.get('tolerances.max_condition', 1e12))


def mahalanobis_sq(theta, source: DataSource) -> float:
    """(theta - theta_k)^T Sigma_k (theta - theta_k)"""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != source.theta.shape:
        raise InputError(f"strategy has shape {theta.shape}, source expects {source.theta.shape}",
                         field='theta')
    diff = theta - source.theta
    return float(max(diff @ source.sigma @ diff, 0.0))


def loss_table(points: np.ndarray, game: GameSpec) -> np.ndarray:
    """G x K losses of every point in a G x D array on every source"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != game.dimension:
        raise InputError(f"strategies have dimension {points.shape[1]}, game has {game.dimension}",
                         field='strategies')
    diffs = points[:, None, :] - game.thetas[None, :, :]
    losses = np.einsum('gki,kij,gkj->gk', diffs, game.sigmas, diffs)
    return np.maximum(losses, 0.0)


def loss_matrix(profile: StrategyProfile, game: GameSpec) -> LossMatrix:
    return LossMatrix(loss_table(profile.strategies, game))


def utilities(profile: StrategyProfile, game: GameSpec, model: IChoiceModel) -> np.ndarray:
    """u_n = sum_k w_k g_n(column k)"""
    shares = model.share_matrix(loss_matrix(profile, game).values)
    return shares @ game.weights


def _check_simplex_rows(q: np.ndarray, num_sources: int) -> np.ndarray:
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if q.shape[1] != num_sources:
        raise InputError(f"mixture has {q.shape[1]} entries, game has {num_sources} sources", field='q')
    if np.any(q < -1e-15) or np.any(np.abs(q.sum(axis=1) - 1.0) > 1e-9):
        raise InputError("mixture weights must lie in the simplex", field='q')
    return q


def weighted_minimizer(q, game: GameSpec) -> np.ndarray:
    """
    theta_bar(q) = (sum_k q_k Sigma_k)^-1 (sum_k q_k Sigma_k theta_k), solved through a
    Cholesky factorization of the mixed covariance.
    """
    weights = q.q if isinstance(q, MixtureWeights) else q
    q_row = _check_simplex_rows(weights, game.num_sources)[0]

    vertex = np.flatnonzero(q_row == 1.0)
    if vertex.size == 1:
        return game.thetas[vertex[0]].copy()

    mixed = np.einsum('k,kij->ij', q_row, game.sigmas)
    rhs = np.einsum('k,kij,kj->i', q_row, game.sigmas, game.thetas)
    condition = np.linalg.cond(mixed)
    if not condition <= _max_condition():
        raise NumericError(f"mixed covariance is ill-conditioned (cond={condition:.3e})", field='q')
    try:
        factor = cho_factor(mixed)
    except LinAlgError as e:
        raise NumericError(f"mixed covariance is not positive definite ({e})", field='q')
    theta_bar = cho_solve(factor, rhs)

    residual = np.abs(mixed @ theta_bar - rhs).max()
    if residual > float(config.get('tolerances.stationarity_tol', 1e-8)):
        raise NumericError(f"stationarity residual {residual:.3e} exceeds tolerance", field='q')
    return theta_bar


def weighted_minimizer_batch(q_rows: np.ndarray, game: GameSpec) -> np.ndarray:
    """Row-wise theta_bar for a G x K array of simplex points"""
    q_rows = _check_simplex_rows(q_rows, game.num_sources)
    mixed = np.einsum('gk,kij->gij', q_rows, game.sigmas)
    rhs = np.einsum('gk,kij,kj->gi', q_rows, game.sigmas, game.thetas)

    conditions = np.linalg.cond(mixed)
    if not np.all(conditions <= _max_condition()):
        worst = int(np.argmax(conditions))
        raise NumericError(f"mixed covariance for row {worst} is ill-conditioned "
                           f"(cond={conditions[worst]:.3e})", field='q')
    try:
        np.linalg.cholesky(mixed)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"mixed covariance is not positive definite ({e})", field='q')
    theta_bar = np.linalg.solve(mixed, rhs[..., None])[..., 0]

    # vertices reproduce the ground truth exactly
    rows, cols = np.nonzero(q_rows == 1.0)
    theta_bar[rows] = game.thetas[cols]
    return theta_bar


def monopoly_strategy(game: GameSpec) -> np.ndarray:
    """The single-provider optimum theta_bar(w)"""
    return weighted_minimizer(game.weights, game)


def _coord_gaps(profile: StrategyProfile, game: GameSpec) -> np.ndarray:
    if profile.coords.shape[1] != game.num_sources:
        raise InputError(f"coords have {profile.coords.shape[1]} entries, game has {game.num_sources} sources",
                         field='coords')
    if profile.dimension != game.dimension:
        raise InputError(f"profile dimension {profile.dimension} does not match game dimension "
                         f"{game.dimension}", field='strategies')
    images = weighted_minimizer_batch(profile.coords, game)
    return np.abs(images - profile.strategies).max(axis=1)


def check_coords(profile: StrategyProfile, game: GameSpec, tol: float = COORD_TOL) -> bool:
    """True when every attached simplex coordinate maps onto its strategy"""
    if profile.coords is None:
        return True
    return bool(_coord_gaps(profile, game).max() <= tol)


def validate_coords(profile: StrategyProfile, game: GameSpec, tol: float = COORD_TOL) -> None:
    """Raise InputError naming the first player whose coords do not map onto its strategy."""
    if profile.coords is None:
        return
    gaps = _coord_gaps(profile, game)
    bad = np.flatnonzero(gaps > tol)
    if bad.size:
        n = int(bad[0])
        raise InputError(f"theta_bar(coords) is {gaps[n]:.3e} away from the strategy (tolerance {tol:g})",
                         field=f'coords[{n}]')


def _grid_key(game: GameSpec, step: float):
    return game.fingerprint(), round(float(step), 12)


@cached(cache=LRUCache(maxsize=16), key=_grid_key, lock=threading.RLock())
def deviation_grid(game: GameSpec, step: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Grid of candidate deviations over the Pareto set: simplex points Q, their images
    theta_bar(Q) and the G x K loss table. Vertices are always included.
    """
    q_rows = simplex_grid_array(game.num_sources, step)
    eye = np.eye(game.num_sources)
    missing = [row for row in eye if not np.any(np.all(q_rows == row, axis=1))]
    if missing:
        q_rows = np.vstack([q_rows, np.array(missing)])
    points = weighted_minimizer_batch(q_rows, game)
    losses = loss_table(points, game)
    for array in (q_rows, points, losses):
        array.setflags(write=False)
    logger.debug(f"Built deviation grid: {q_rows.shape[0]} points at step {step}")
    return q_rows, points, losses


def ell_max_estimate(game: GameSpec, grid_step: Optional[float] = None) -> float:
    """Largest loss any Pareto-set strategy suffers on any source, estimated on a grid."""
    if grid_step is None:
        grid_step = config.ell_max_step_for(game.num_sources)
    _, _, losses = deviation_grid(game, grid_step)
    estimate = float(losses.max())
    if game.equal_covariances():
        # convex loss over the hull peaks at a vertex
        estimate = max(estimate, float(loss_table(game.thetas, game).max()))
    return estimate
