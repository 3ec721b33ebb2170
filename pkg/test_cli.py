#!/usr/bin/env python3
"""End-to-end tests for the command-line surface"""

import os
os.environ['ENVIRONMENT'] = 'test'

import json

import pytest

from app.create_app import run
from game.presets import preset_game
from game.serialization import load_game, profile_to_json, save_game
from services.experiment_service import gen_random_game
from services.probability_service import homo_candidate


@pytest.fixture
def coexistence_files(tmp_path):
    game = preset_game('two-source-coexistence')
    game_path = tmp_path / 'coexistence.json'
    save_game(game, game_path)
    profile_path = tmp_path / 'homo.json'
    profile_path.write_text(profile_to_json(homo_candidate(game, 8)))
    return game_path, profile_path


def test_gen_game_round_trips(tmp_path):
    out = tmp_path / 'game.json'
    assert run(['gen-game', '--seed', '5', '--output', str(out)]) == 0
    assert load_game(out) == gen_random_game(2, 2, 5)


def test_gen_game_preset(tmp_path):
    out = tmp_path / 'preset.json'
    assert run(['gen-game', '--preset', 'four-source-dominant', '--output', str(out)]) == 0
    assert load_game(out).num_sources == 4


def test_gen_game_requires_seed(capsys):
    assert run(['gen-game']) == 2
    assert 'seed' in capsys.readouterr().err


def test_check_assumptions(capsys):
    assert run(['check-assumptions', '--preset', 'four-source-dominant']) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload['distinct_distances'] is True
    assert payload['injectivity'] == {'kind': 'exact', 'value': True}
    assert payload['dominance_k0'] == [2, 4]
    assert payload['ell_max'] > 0


def test_find_prox_counts(capsys):
    assert run(['find-prox', '--preset', 'four-source-dominant', '--N', '10', '--k0', '2']) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload['counts'] == [6, 4]
    assert payload['n_range'] == {'lo': 8, 'hi': 19}


def test_find_prox_infeasible_is_domain_error(capsys):
    assert run(['find-prox', '--preset', 'four-source-dominant', '--N', '7', '--k0', '2']) == 1
    assert 'N' in capsys.readouterr().err


def test_find_prox_duopoly_reports_non_existence(tmp_path, capsys):
    eye = [[1.0, 0.0], [0.0, 1.0]]
    path = tmp_path / 'split.json'
    path.write_text(json.dumps({'dimension': 2, 'sources': [
        {'theta': [0.0, 0.0], 'sigma': eye, 'weight': 0.45},
        {'theta': [1.0, 0.0], 'sigma': eye, 'weight': 0.35},
        {'theta': [0.0, 1.0], 'sigma': eye, 'weight': 0.2},
    ]}))
    assert run(['find-prox', '--game', str(path), '--N', '2']) == 0
    assert json.loads(capsys.readouterr().out) == {'status': 'NoneExists'}
    assert run(['find-prox', '--preset', 'two-source-coexistence', '--N', '2']) == 0
    assert json.loads(capsys.readouterr().out)['unique'] is True


def test_verify_homogeneous_profile(coexistence_files, capsys):
    game_path, profile_path = coexistence_files
    args = ['verify', '--game', str(game_path), '--model', 'prob', '--t', '0.4', '--profile', str(profile_path)]
    assert run(args) == 0
    report = json.loads(capsys.readouterr().out)
    assert report['verified'] is True
    assert report['classification'] == 'homogeneous'


def test_verify_is_byte_identical(coexistence_files, tmp_path):
    game_path, profile_path = coexistence_files
    outputs = []
    for name in ('first.json', 'second.json'):
        out = tmp_path / name
        assert run(['verify', '--game', str(game_path), '--t', '0.4', '--profile', str(profile_path),
                    '--output', str(out)]) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_verify_missing_game_exits_2(tmp_path, coexistence_files):
    _, profile_path = coexistence_files
    assert run(['verify', '--game', str(tmp_path / 'missing.json'), '--t', '0.4',
                '--profile', str(profile_path)]) == 2


def test_verify_probability_without_temperature_exits_2(coexistence_files):
    game_path, profile_path = coexistence_files
    assert run(['verify', '--game', str(game_path), '--profile', str(profile_path)]) == 2


def test_malformed_game_names_field(tmp_path, coexistence_files, capsys):
    _, profile_path = coexistence_files
    path = tmp_path / 'bad.json'
    path.write_text(json.dumps({'dimension': 2, 'sources': [{'theta': [0, 0], 'sigma': [[1, 0], [0, 1]]}]}))
    assert run(['verify', '--game', str(path), '--t', '0.4', '--profile', str(profile_path)]) == 2
    assert 'sources[0].weight' in capsys.readouterr().err


def test_unknown_command_exits_2():
    assert run(['solve-everything']) == 2


def test_curve_csv(coexistence_files, capsys):
    game_path, profile_path = coexistence_files
    assert run(['curve', '--game', str(game_path), '--profile', str(profile_path), '--t', '0.4',
                '--alpha-step', '0.01']) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == 'alpha,utility'
    assert len(lines) == 102


def test_threshold_homo(capsys):
    assert run(['threshold-homo', '--preset', 'two-source-coexistence', '--N', '8']) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload['certified_by'] == 'Bisection'
    assert payload['threshold_t'] <= 0.4 + 1e-12


def test_find_hetero(capsys):
    assert run(['find-hetero', '--preset', 'two-source-coexistence', '--N', '8', '--t', '0.4']) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload['status'] == 'Converged'
    assert len(payload['profile']['strategies']) == 8


def test_linear_validate(capsys):
    assert run(['linear-validate', '--preset', 'two-source-coexistence', '--samples', '20000',
                '--seed', '1', '--noise-sd', '0.1']) == 0
    payload = json.loads(capsys.readouterr().out)
    assert len(payload['sources']) == 2
    assert payload['sources'][0]['predicted'] == pytest.approx(0.47 ** 2 + 0.01)


@pytest.mark.slow
def test_sweep_single_game(capsys):
    assert run(['sweep', '--preset', 'two-source-coexistence', '--n-min', '8', '--n-max', '8',
                '--resolution', '0.1']) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == 'game_id,N,ell_max,homo_threshold_frac,hetero_max_frac,hetero_found,error'
    assert lines[1].startswith('0,8,1,')


def test_verify_rejects_inconsistent_coords(coexistence_files, tmp_path, capsys):
    game_path, _ = coexistence_files
    path = tmp_path / 'mismatch.json'
    path.write_text(json.dumps({'strategies': [[0.53, 1.0], [0.53, 1.0]], 'coords': [[0.53, 0.47], [1.0, 0.0]]}))
    assert run(['verify', '--game', str(game_path), '--t', '0.4', '--profile', str(path)]) == 2
    assert 'coords[1]' in capsys.readouterr().err
