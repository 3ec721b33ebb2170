"""Hand-built games used as worked examples and in the test suites."""
from typing import Callable, Dict

import numpy as np

from game.errors import InputError
from game.models import DataSource, GameSpec


def _identity_game(thetas, weights) -> GameSpec:
    thetas = np.asarray(thetas, dtype=float)
    dimension = thetas.shape[1]
    sources = [DataSource(theta=theta, sigma=np.eye(dimension), weight=w) for theta, w in zip(thetas, weights)]
    return GameSpec(dimension=dimension, sources=sources)


def four_source_dominant() -> GameSpec:
    """Two heavy sources, each with a light neighbour: the specialization example"""
    return _identity_game(
        [[1, 0, 0], [-1, 0, 0], [1, 0.1, 0], [-1, 0, 0.1]],
        [0.6, 0.35, 0.03, 0.02],
    )


def two_source_coexistence() -> GameSpec:
    """Homogeneous and heterogeneous equilibria coexist here at N=8, t=0.4"""
    return _identity_game([[1, 1], [0, 1]], [0.53, 0.47])


def three_source_interior() -> GameSpec:
    """Equilibrium with one provider strictly inside the Pareto set"""
    return _identity_game([[0, 0, 1], [2, 0, 1], [0, 1, 1]], [0.6, 0.25, 0.15])


PRESETS: Dict[str, Callable[[], GameSpec]] = {
    'four-source-dominant': four_source_dominant,
    'two-source-coexistence': two_source_coexistence,
    'three-source-interior': three_source_interior,
}


def preset_game(name: str) -> GameSpec:
    if name not in PRESETS:
        raise InputError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}", field='preset')
    return PRESETS[name]()
