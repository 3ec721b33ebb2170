"""Data model of the heterogeneous data game.

Arrays stored on these objects are copied and frozen (``writeable=False``) so
instances can be shared freely between threads and worker processes.
"""
import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from game.errors import InputError

SYMMETRY_TOL = 1e-9
WEIGHT_SUM_TOL = 1e-9
DISTINCT_TOL = 1e-9
SIMPLEX_SUM_TOL = 1e-12


def _frozen(values, ndim: int, name: str) -> np.ndarray:
    try:
        array = np.array(values, dtype=float)
    except (TypeError, ValueError) as e:
        raise InputError(f"not a numeric array ({e})", field=name)
    if array.ndim != ndim:
        raise InputError(f"expected a {ndim}-d array, got shape {array.shape}", field=name)
    if not np.all(np.isfinite(array)):
        raise InputError("contains non-finite values", field=name)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class DataSource:
    """One market segment: ground truth theta, covariance sigma, market weight."""
    theta: np.ndarray
    sigma: np.ndarray
    weight: float

    def __post_init__(self):
        theta = _frozen(self.theta, 1, 'theta')
        sigma = _frozen(self.sigma, 2, 'sigma')
        d = theta.shape[0]
        if sigma.shape != (d, d):
            raise InputError(f"sigma must be {d}x{d}, got {sigma.shape}", field='sigma')
        if not np.allclose(sigma, sigma.T, atol=SYMMETRY_TOL, rtol=0.0):
            raise InputError("sigma is not symmetric", field='sigma')
        if np.linalg.eigvalsh(sigma).min() <= 0:
            raise InputError("sigma is not positive definite", field='sigma')
        weight = float(self.weight)
        if not weight > 0 or weight > 1:
            raise InputError(f"weight must lie in (0, 1], got {weight}", field='weight')
        object.__setattr__(self, 'theta', theta)
        object.__setattr__(self, 'sigma', sigma)
        object.__setattr__(self, 'weight', weight)

    @property
    def dimension(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class GameSpec:
    dimension: int
    sources: Sequence[DataSource]
    seed: Optional[int] = None

    def __post_init__(self):
        sources = tuple(self.sources)
        object.__setattr__(self, 'sources', sources)
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise InputError(f"dimension must be a positive integer, got {self.dimension}", field='dimension')
        if len(sources) < 2:
            raise InputError(f"a game needs at least 2 sources, got {len(sources)}", field='sources')
        for k, source in enumerate(sources):
            if source.dimension != self.dimension:
                raise InputError(
                    f"theta has length {source.dimension}, game dimension is {self.dimension}",
                    field=f'sources[{k}].theta')

        weights = np.array([s.weight for s in sources])
        for k in range(1, len(sources)):
            if not weights[k] < weights[k - 1]:
                raise InputError(
                    f"weights must be strictly decreasing ({weights[k - 1]} then {weights[k]})",
                    field=f'sources[{k}].weight')
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise InputError(f"weights sum to {weights.sum()!r}, expected 1", field='sources')

        thetas = np.stack([s.theta for s in sources])
        diffs = thetas[:, None, :] - thetas[None, :, :]
        dists = np.linalg.norm(diffs, axis=-1)
        np.fill_diagonal(dists, np.inf)
        if dists.min() <= DISTINCT_TOL:
            i, j = np.unravel_index(np.argmin(dists), dists.shape)
            raise InputError(f"sources {i} and {j} share the same theta", field=f'sources[{j}].theta')

        weights.setflags(write=False)
        thetas.setflags(write=False)
        sigmas = np.stack([s.sigma for s in sources])
        sigmas.setflags(write=False)
        object.__setattr__(self, '_weights', weights)
        object.__setattr__(self, '_thetas', thetas)
        object.__setattr__(self, '_sigmas', sigmas)

    @property
    def num_sources(self) -> int:
        return len(self.sources)

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def thetas(self) -> np.ndarray:
        """K x D ground-truth parameters"""
        return self._thetas

    @property
    def sigmas(self) -> np.ndarray:
        """K x D x D covariances"""
        return self._sigmas

    def equal_covariances(self) -> bool:
        return bool(np.allclose(self.sigmas, self.sigmas[0], atol=SYMMETRY_TOL, rtol=0.0))

    def to_dict(self) -> dict:
        return {
            'dimension': int(self.dimension),
            'seed': self.seed,
            'sources': [
                {'theta': s.theta.tolist(), 'sigma': s.sigma.tolist(), 'weight': s.weight}
                for s in self.sources
            ],
        }

    def fingerprint(self) -> str:
        """sha256 of the canonical JSON encoding"""
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()

    def __hash__(self) -> int:
        return hash(self.fingerprint())

    def __eq__(self, other) -> bool:
        if not isinstance(other, GameSpec):
            return NotImplemented
        return self.fingerprint() == other.fingerprint()


@dataclass(frozen=True, eq=False)
class MixtureWeights:
    """A point q of the simplex"""
    q: np.ndarray

    def __post_init__(self):
        q = _frozen(self.q, 1, 'q')
        if np.any(q < 0):
            raise InputError(f"mixture weights must be nonnegative, got {q.tolist()}", field='q')
        if abs(q.sum() - 1.0) > SIMPLEX_SUM_TOL:
            raise InputError(f"mixture weights sum to {q.sum()!r}, expected 1", field='q')
        object.__setattr__(self, 'q', q)

    @classmethod
    def vertex(cls, k: int, num_sources: int) -> 'MixtureWeights':
        q = np.zeros(num_sources)
        q[k] = 1.0
        return cls(q)

    def __len__(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True, eq=False)
class StrategyProfile:
    strategies: np.ndarray
    coords: Optional[np.ndarray] = None

    def __post_init__(self):
        strategies = _frozen(self.strategies, 2, 'strategies')
        if strategies.shape[0] < 1:
            raise InputError("a profile needs at least one strategy", field='strategies')
        object.__setattr__(self, 'strategies', strategies)
        if self.coords is not None:
            coords = _frozen(self.coords, 2, 'coords')
            if coords.shape[0] != strategies.shape[0]:
                raise InputError(
                    f"{coords.shape[0]} coords for {strategies.shape[0]} strategies", field='coords')
            for row in coords:
                MixtureWeights(row)
            object.__setattr__(self, 'coords', coords)

    @property
    def num_players(self) -> int:
        return self.strategies.shape[0]

    @property
    def dimension(self) -> int:
        return self.strategies.shape[1]

    def to_dict(self) -> dict:
        return {
            'strategies': self.strategies.tolist(),
            'coords': None if self.coords is None else self.coords.tolist(),
        }


@dataclass(frozen=True, eq=False)
class LossMatrix:
    """N x K losses; entry (n, k) is player n's loss on source k"""
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = _frozen(self.values, 2, 'losses')
        if np.any(values < 0):
            raise InputError("losses must be nonnegative", field='losses')
        object.__setattr__(self, 'values', values)

    def column(self, k: int) -> np.ndarray:
        return self.values[:, k]
