import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional

from app.guard import handle_errors
from choice.choice_factory import create_choice_model
from config import config
from game.assumptions import check_distinct_distances, check_injectivity, dominance_levels
from game.core import ell_max_estimate, monopoly_strategy
from game.errors import InputError
from game.models import GameSpec, StrategyProfile
from game.presets import PRESETS, preset_game
from game.serialization import game_to_json, load_game, load_profile
from services.experiment_service import (deviation_curve, gen_random_game, gen_random_games,
                                         sweep_critical_temperatures, write_curve_csv, write_sweep_csv)
from services.linear_model_service import linear_mc_validate, linear_source_from_game
from services.probability_service import (find_hetero_candidate, find_hetero_candidates, max_hetero_t,
                                          threshold_homo_t)
from services.proximity_service import build_construction, duopoly_pne
from services.verification_service import verify_profile

logger = logging.getLogger(__name__)


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text if text.endswith('\n') else text + '\n')
    else:
        sys.stdout.write(text if text.endswith('\n') else text + '\n')


def _emit_json(payload: Any, output: Optional[str]) -> None:
    _emit(json.dumps(payload, indent=2), output)


def _load_game(args) -> GameSpec:
    if getattr(args, 'preset', None):
        return preset_game(args.preset)
    if not getattr(args, 'game', None):
        raise InputError("a game file (--game) or --preset is required", field='game')
    return load_game(args.game)


def _load_profile(args, game: GameSpec) -> StrategyProfile:
    if not args.profile:
        raise InputError("a profile file is required", field='profile')
    return load_profile(args.profile, game)


def _require(args, name: str):
    value = getattr(args, name, None)
    if value is None:
        raise InputError(f"--{name} is required for {args.command}", field=name)
    return value


def _model(args):
    return create_choice_model(args.model, args.t)


def _add_game_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--game', help='game JSON file')
    parser.add_argument('--preset', choices=sorted(PRESETS), help='use a built-in game instead of --game')
    parser.add_argument('--output', help='write the result here instead of stdout')


def register_commands(subparsers) -> None:
    """Register every CLI command with the parser."""

    gen = subparsers.add_parser('gen-game', help='generate a random game (or write a preset)')
    gen.add_argument('--K', type=int, default=2)
    gen.add_argument('--D', type=int, default=2)
    gen.add_argument('--seed', type=int)
    gen.add_argument('--preset', choices=sorted(PRESETS))
    gen.add_argument('--output')

    @handle_errors
    def gen_game(args):
        if args.preset:
            game = preset_game(args.preset)
        else:
            game = gen_random_game(args.K, args.D, _require(args, 'seed'))
        _emit(game_to_json(game), args.output)

    gen.set_defaults(handler=gen_game)

    check = subparsers.add_parser('check-assumptions', help='regularity and dominance checks')
    _add_game_flags(check)

    @handle_errors
    def check_assumptions(args):
        game = _load_game(args)
        _emit_json({
            'distinct_distances': check_distinct_distances(game),
            'injectivity': check_injectivity(game).to_dict(),
            'ell_max': ell_max_estimate(game),
            'dominance_k0': dominance_levels(game),
        }, args.output)

    check.set_defaults(handler=check_assumptions)

    prox = subparsers.add_parser('find-prox', help='specialization equilibrium under proximity choice')
    _add_game_flags(prox)
    prox.add_argument('--N', type=int)
    prox.add_argument('--k0', type=int)

    @handle_errors
    def find_prox(args):
        game = _load_game(args)
        num_players = _require(args, 'N')
        if num_players == 2 and args.k0 is None:
            _emit_json(duopoly_pne(game).to_dict(), args.output)
            return
        _emit_json(build_construction(game, num_players, args.k0).to_dict(), args.output)

    prox.set_defaults(handler=find_prox)

    hetero = subparsers.add_parser('find-hetero', help='fixed-point search for a heterogeneous logit equilibrium')
    _add_game_flags(hetero)
    hetero.add_argument('--N', type=int)
    hetero.add_argument('--t', type=float)
    hetero.add_argument('--all', action='store_true', help='start from every admissible allocation')
    hetero.add_argument('--max-starts', type=int, default=8)

    @handle_errors
    def find_hetero(args):
        game = _load_game(args)
        num_players, t = _require(args, 'N'), _require(args, 't')
        if args.all:
            candidates = find_hetero_candidates(game, num_players, t, max_starts=args.max_starts)
            _emit_json({'candidates': [c.to_dict() for c in candidates]}, args.output)
            return
        _emit_json(find_hetero_candidate(game, num_players, t).to_dict(), args.output)

    hetero.set_defaults(handler=find_hetero)

    verify = subparsers.add_parser('verify', help='grid-certify a strategy profile')
    _add_game_flags(verify)
    verify.add_argument('--profile')
    verify.add_argument('--model', choices=['prox', 'proximity', 'prob', 'probability'], default='prob')
    verify.add_argument('--t', type=float)
    verify.add_argument('--grid-step', type=float)

    @handle_errors
    def verify_command(args):
        game = _load_game(args)
        profile = _load_profile(args, game)
        report = verify_profile(profile, game, _model(args), grid_step=args.grid_step, max_workers=args.threads)
        _emit_json(report.to_dict(), args.output)

    verify.set_defaults(handler=verify_command)

    homo = subparsers.add_parser('threshold-homo', help='smallest temperature certifying the homogeneous profile')
    _add_game_flags(homo)
    homo.add_argument('--N', type=int)
    homo.add_argument('--resolution', type=float)
    homo.add_argument('--grid-step', type=float)

    @handle_errors
    def threshold_homo(args):
        game = _load_game(args)
        result = threshold_homo_t(game, _require(args, 'N'), args.resolution, args.grid_step)
        _emit_json(result.to_dict(), args.output)

    homo.set_defaults(handler=threshold_homo)

    top = subparsers.add_parser('max-hetero-t', help='largest temperature with a verified heterogeneous profile')
    _add_game_flags(top)
    top.add_argument('--N', type=int)
    top.add_argument('--resolution', type=float)
    top.add_argument('--grid-step', type=float)

    @handle_errors
    def max_hetero(args):
        game = _load_game(args)
        result = max_hetero_t(game, _require(args, 'N'), args.resolution, args.grid_step,
                              max_workers=args.threads)
        _emit_json(result.to_dict(), args.output)

    top.set_defaults(handler=max_hetero)

    sweep = subparsers.add_parser('sweep', help='critical temperatures across random games and N')
    _add_game_flags(sweep)
    sweep.add_argument('--seed', type=int)
    sweep.add_argument('--games', type=int, default=None, help='number of random games')
    sweep.add_argument('--K', type=int, default=2)
    sweep.add_argument('--D', type=int, default=2)
    sweep.add_argument('--n-min', type=int, default=None)
    sweep.add_argument('--n-max', type=int, default=None)
    sweep.add_argument('--resolution', type=float)
    sweep.add_argument('--grid-step', type=float)

    @handle_errors
    def sweep_command(args):
        if args.game or args.preset:
            games = [_load_game(args)]
        else:
            count = args.games if args.games is not None else int(config.get('sweep.games', 10))
            games = gen_random_games(count, args.K, args.D, _require(args, 'seed'))
        n_min = args.n_min if args.n_min is not None else int(config.get('sweep.n_min', 2))
        n_max = args.n_max if args.n_max is not None else int(config.get('sweep.n_max', 30))
        if n_min < 1 or n_max < n_min:
            raise InputError(f"need 1 <= n-min <= n-max, got {n_min} and {n_max}", field='n-min')
        rows = sweep_critical_temperatures(games, range(n_min, n_max + 1), args.resolution, args.grid_step,
                                           max_workers=args.threads)
        _emit(write_sweep_csv(rows), args.output)

    sweep.set_defaults(handler=sweep_command)

    curve = subparsers.add_parser('curve', help="one provider's utility along the K = 2 Pareto segment")
    _add_game_flags(curve)
    curve.add_argument('--profile')
    curve.add_argument('--player', type=int, default=0)
    curve.add_argument('--model', choices=['prox', 'proximity', 'prob', 'probability'], default='prob')
    curve.add_argument('--t', type=float)
    curve.add_argument('--alpha-step', type=float, default=0.002)

    @handle_errors
    def curve_command(args):
        game = _load_game(args)
        profile = _load_profile(args, game)
        points = deviation_curve(game, profile, args.player, alpha_step=args.alpha_step, model=_model(args))
        _emit(write_curve_csv(points), args.output)

    curve.set_defaults(handler=curve_command)

    linear = subparsers.add_parser('linear-validate', help='Monte-Carlo MSE against the Mahalanobis loss')
    _add_game_flags(linear)
    linear.add_argument('--profile', help='estimator taken from this profile (default: monopoly optimum)')
    linear.add_argument('--player', type=int, default=0)
    linear.add_argument('--noise-sd', type=float, default=0.0)
    linear.add_argument('--samples', type=int, default=100_000)
    linear.add_argument('--seed', type=int)

    @handle_errors
    def linear_validate(args):
        game = _load_game(args)
        seed = _require(args, 'seed')
        if args.profile:
            profile = _load_profile(args, game)
            if not 0 <= args.player < profile.num_players:
                raise InputError(f"player {args.player} out of range for {profile.num_players} players",
                                 field='player')
            beta_hat = profile.strategies[args.player]
        else:
            beta_hat = monopoly_strategy(game)
        rows = []
        for k in range(game.num_sources):
            source = linear_source_from_game(game, k, args.noise_sd)
            check = linear_mc_validate(source, beta_hat, args.samples, seed + k)
            rows.append({'source': k, **check.to_dict()})
        _emit_json({'beta_hat': [float(b) for b in beta_hat], 'sources': rows}, args.output)

    linear.set_defaults(handler=linear_validate)
