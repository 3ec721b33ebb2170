"""JSON codec for games and strategy profiles, with field-level diagnostics."""
import json
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from game.core import validate_coords
from game.errors import InputError
from game.models import DataSource, GameSpec, StrategyProfile

PathLike = Union[str, Path]


def _loads(text: str, what: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}", field=what)


def _require(payload: dict, key: str, where: str) -> Any:
    if not isinstance(payload, dict) or key not in payload:
        raise InputError("missing field", field=f"{where}{key}")
    return payload[key]


def game_from_dict(payload: dict) -> GameSpec:
    dimension = _require(payload, 'dimension', '')
    if isinstance(dimension, bool) or not isinstance(dimension, int):
        raise InputError(f"must be an integer, got {dimension!r}", field='dimension')
    seed = payload.get('seed')
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise InputError(f"must be an integer or null, got {seed!r}", field='seed')
    raw_sources = _require(payload, 'sources', '')
    if not isinstance(raw_sources, list):
        raise InputError("must be a list", field='sources')

    sources = []
    for k, raw in enumerate(raw_sources):
        where = f"sources[{k}]."
        try:
            sources.append(DataSource(
                theta=_require(raw, 'theta', where),
                sigma=_require(raw, 'sigma', where),
                weight=_require(raw, 'weight', where),
            ))
        except InputError as e:
            if e.field and not e.field.startswith('sources'):
                raise InputError(str(e.args[0]), field=f"{where}{e.field}")
            raise
    return GameSpec(dimension=dimension, sources=sources, seed=seed)


def game_to_json(game: GameSpec) -> str:
    return json.dumps(game.to_dict(), indent=2)


def load_game(path: PathLike) -> GameSpec:
    text = Path(path).read_text()
    return game_from_dict(_loads(text, 'game'))


def save_game(game: GameSpec, path: PathLike) -> None:
    Path(path).write_text(game_to_json(game) + '\n')


def profile_from_dict(payload: dict) -> StrategyProfile:
    strategies = _require(payload, 'strategies', '')
    coords = payload.get('coords')
    return StrategyProfile(np.asarray(strategies, dtype=float),
                           None if coords is None else np.asarray(coords, dtype=float))


def profile_to_json(profile: StrategyProfile) -> str:
    return json.dumps(profile.to_dict(), indent=2)


def load_profile(path: PathLike, game: Optional[GameSpec] = None) -> StrategyProfile:
    """Read a profile, or the profile nested in a report. With a game, coords must map onto the strategies."""
    text = Path(path).read_text()
    payload = _loads(text, 'profile')
    # reports and construction outputs nest the profile
    if isinstance(payload, dict) and 'strategies' not in payload and isinstance(payload.get('profile'), dict):
        payload = payload['profile']
    profile = profile_from_dict(payload)
    if game is not None:
        validate_coords(profile, game)
    return profile
