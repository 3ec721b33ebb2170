#!/usr/bin/env python3
"""Tests for the game data model, primitive formulas and assumption checks"""

import os
os.environ['ENVIRONMENT'] = 'test'

import json

import numpy as np
import pytest

from choice.choice_factory import create_choice_model
from choice.choice_probability import ProbabilityChoice, choose_prob
from choice.choice_proximity import ProximityChoice, choose_prox
from game.assumptions import (check_distinct_distances, check_injectivity, dominance_holds, dominance_levels,
                              tail_weight)
from game.core import (check_coords, deviation_grid, ell_max_estimate, loss_matrix, mahalanobis_sq,
                       monopoly_strategy, utilities, weighted_minimizer, weighted_minimizer_batch)
from game.errors import HDGameError, InputError, NumericError
from game.models import DataSource, GameSpec, MixtureWeights, StrategyProfile
from game.presets import preset_game
from game.serialization import game_from_dict, game_to_json, load_game, load_profile, profile_to_json
from game.simplex import grid_divisions, grid_size, simplex_grid, simplex_grid_array


def identity_game(thetas, weights):
    thetas = np.asarray(thetas, dtype=float)
    d = thetas.shape[1]
    return GameSpec(dimension=d, sources=[DataSource(theta=t, sigma=np.eye(d), weight=w)
                                          for t, w in zip(thetas, weights)])


@pytest.fixture
def coexistence():
    return preset_game('two-source-coexistence')


@pytest.fixture
def dominant():
    return preset_game('four-source-dominant')


def test_data_source_rejects_bad_covariance():
    with pytest.raises(InputError) as e:
        DataSource(theta=[0, 0], sigma=[[1, 0.5], [0, 1]], weight=0.5)
    assert e.value.field == 'sigma'
    with pytest.raises(InputError):
        DataSource(theta=[0, 0], sigma=[[1, 0], [0, -1]], weight=0.5)


def test_game_rejects_unsorted_or_unnormalized_weights():
    with pytest.raises(InputError) as e:
        identity_game([[0, 0], [1, 0]], [0.4, 0.6])
    assert e.value.field == 'sources[1].weight'
    with pytest.raises(InputError):
        identity_game([[0, 0], [1, 0]], [0.6, 0.3])
    with pytest.raises(InputError):
        identity_game([[0, 0]], [1.0])


def test_game_rejects_duplicate_thetas():
    with pytest.raises(InputError):
        identity_game([[0, 0], [0, 0]], [0.6, 0.4])
    with pytest.raises(InputError) as e:
        identity_game([[0, 0], [1, 1], [0, 0]], [0.5, 0.3, 0.2])
    assert e.value.field == 'sources[2].theta'


def test_errors_are_value_errors_with_field_prefix():
    error = InputError("bad", field='sources[0].weight')
    assert isinstance(error, ValueError)
    assert isinstance(error, HDGameError)
    assert str(error) == 'sources[0].weight: bad'


def test_mahalanobis_sq_uses_source_covariance():
    source = DataSource(theta=[1, 0], sigma=[[2, 0], [0, 1]], weight=1.0)
    assert mahalanobis_sq([0, 0], source) == pytest.approx(2.0)
    assert mahalanobis_sq([1, 3], source) == pytest.approx(9.0)
    assert mahalanobis_sq([1, 0], source) == 0.0


def test_choose_prox_splits_ties_evenly():
    assert np.allclose(choose_prox([1.0, 1.0, 2.0]), [0.5, 0.5, 0.0])
    assert np.allclose(choose_prox([3.0, 0.1, 2.0]), [0.0, 1.0, 0.0])


def test_choose_prob_is_a_softmax():
    shares = choose_prob([0.0, 1.0], 1.0)
    assert shares.sum() == pytest.approx(1.0)
    assert shares[0] == pytest.approx(1.0 / (1.0 + np.exp(-1.0)))
    assert np.allclose(choose_prob([0.0, 5.0, 9.0], 1e6), 1.0 / 3.0, atol=1e-5)


def test_probability_model_rejects_tiny_temperature():
    with pytest.raises(InputError):
        ProbabilityChoice(1e-13)
    with pytest.raises(InputError):
        ProbabilityChoice(-1.0)


def test_deviation_shares_match_share_matrix():
    losses = np.array([[0.2, 1.0], [0.5, 0.1], [0.2, 0.3]])
    for model in (ProximityChoice(), ProbabilityChoice(0.3)):
        full = model.share_matrix(losses)
        deviation = model.deviation_shares(losses[:1], losses[1:])
        assert np.allclose(deviation[0], full[0])


def test_choice_factory_aliases():
    assert create_choice_model('prox').kind == 'proximity'
    assert create_choice_model('logit', 0.5).temperature == 0.5
    with pytest.raises(InputError):
        create_choice_model('prob')
    with pytest.raises(InputError):
        create_choice_model('nearest')


def test_utilities_sum_to_one_under_both_models(coexistence):
    profile = StrategyProfile(np.array([[1.0, 1.0], [0.2, 1.0], [0.5, 1.0]]))
    for model in (ProximityChoice(), ProbabilityChoice(0.4)):
        assert utilities(profile, coexistence, model).sum() == pytest.approx(1.0)
    prox = utilities(profile, coexistence, ProximityChoice())
    assert np.allclose(prox, [0.53, 0.47, 0.0])


def test_loss_matrix_shape(dominant):
    profile = StrategyProfile(dominant.thetas[:2])
    losses = loss_matrix(profile, dominant)
    assert losses.values.shape == (2, 4)
    assert losses.column(0)[0] == 0.0


def test_weighted_minimizer_vertices_are_exact(dominant):
    for k in range(dominant.num_sources):
        assert np.array_equal(weighted_minimizer(MixtureWeights.vertex(k, 4), dominant), dominant.thetas[k])


def test_weighted_minimizer_is_weighted_mean_for_identity(coexistence):
    assert np.allclose(weighted_minimizer([0.3, 0.7], coexistence), [0.3, 1.0])
    assert np.allclose(monopoly_strategy(coexistence), [0.53, 1.0])


def test_weighted_minimizer_general_covariance():
    game = GameSpec(dimension=2, sources=[
        DataSource(theta=[0, 0], sigma=[[2, 0], [0, 1]], weight=0.6),
        DataSource(theta=[1, 1], sigma=[[1, 0], [0, 3]], weight=0.4),
    ])
    q = np.array([0.5, 0.5])
    theta = weighted_minimizer(q, game)
    mixed = 0.5 * game.sigmas[0] + 0.5 * game.sigmas[1]
    assert np.allclose(mixed @ theta, 0.5 * game.sigmas[1] @ game.thetas[1])
    assert np.allclose(weighted_minimizer_batch(q[None, :], game)[0], theta)


def test_weighted_minimizer_rejects_ill_conditioned_mix():
    game = GameSpec(dimension=2, sources=[
        DataSource(theta=[0, 0], sigma=[[1, 0], [0, 1e-14]], weight=0.6),
        DataSource(theta=[1, 1], sigma=[[1, 0], [0, 1e-14]], weight=0.4),
    ])
    with pytest.raises(NumericError):
        weighted_minimizer([0.5, 0.5], game)


def test_weighted_minimizer_rejects_off_simplex(coexistence):
    with pytest.raises(InputError):
        weighted_minimizer([0.5, 0.6], coexistence)


def test_check_coords(coexistence):
    good = StrategyProfile(np.array([[0.3, 1.0]]), np.array([[0.3, 0.7]]))
    bad = StrategyProfile(np.array([[0.3, 1.0]]), np.array([[0.6, 0.4]]))
    assert check_coords(good, coexistence)
    assert not check_coords(bad, coexistence)


def test_simplex_grid():
    assert grid_divisions(0.25) == 4
    with pytest.raises(InputError):
        grid_divisions(0.3)
    points = simplex_grid_array(3, 0.5)
    assert points.shape == (6, 3)
    assert np.allclose(points.sum(axis=1), 1.0)
    assert grid_size(3, 0.01) == 5151
    assert len(list(simplex_grid(2, 0.002))) == 501


def test_deviation_grid_is_cached_per_game(coexistence):
    first = deviation_grid(coexistence, 0.5)
    again = deviation_grid(preset_game('two-source-coexistence'), 0.5)
    assert first is again
    q_rows, points, losses = first
    assert q_rows.shape == (3, 2)
    assert losses.shape == (3, 2)
    assert not points.flags.writeable


def test_ell_max_for_identity_segment(coexistence):
    assert ell_max_estimate(coexistence) == pytest.approx(1.0)


def test_distinct_distances():
    assert check_distinct_distances(preset_game('four-source-dominant'))
    symmetric = identity_game([[0, 0], [1, 0], [-1, 0]], [0.5, 0.3, 0.2])
    assert not check_distinct_distances(symmetric)
    mirrored = identity_game([[1, 0], [-1, 0], [0, 0]], [0.5, 0.3, 0.2])
    assert not check_distinct_distances(mirrored)


def test_injectivity_exact_for_equal_covariances():
    result = check_injectivity(preset_game('three-source-interior'))
    assert result.exact and bool(result)
    collinear = identity_game([[0, 0], [1, 0], [2, 0]], [0.5, 0.3, 0.2])
    assert not check_injectivity(collinear)


def test_injectivity_heuristic_for_distinct_covariances():
    game = GameSpec(dimension=2, sources=[
        DataSource(theta=[0, 0], sigma=[[2, 0], [0, 1]], weight=0.6),
        DataSource(theta=[1, 1], sigma=[[1, 0], [0, 3]], weight=0.4),
    ])
    result = check_injectivity(game, trials=200, rng_seed=1)
    assert result.kind == 'heuristic'
    assert result.to_dict() == {'kind': 'heuristic', 'value': True}


def test_dominance(dominant):
    assert tail_weight(dominant, 2) == pytest.approx(0.05)
    assert dominance_holds(dominant, 2)
    assert not dominance_holds(dominant, 1)
    assert dominance_levels(dominant) == [2, 4]


def test_game_json_round_trip(tmp_path, dominant):
    path = tmp_path / 'game.json'
    path.write_text(game_to_json(dominant))
    assert load_game(path) == dominant
    assert load_game(path).fingerprint() == dominant.fingerprint()


def test_game_from_dict_names_missing_field():
    payload = {'dimension': 1, 'sources': [{'theta': [0.0], 'sigma': [[1.0]]}]}
    with pytest.raises(InputError) as e:
        game_from_dict(payload)
    assert e.value.field == 'sources[0].weight'


def test_invalid_json_reports_position(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"dimension": 2,\n "sources": [}')
    with pytest.raises(InputError) as e:
        load_game(path)
    assert 'line 2' in str(e.value)


def test_profile_loads_from_nested_report(tmp_path):
    profile = StrategyProfile(np.array([[0.5, 1.0], [0.2, 1.0]]))
    path = tmp_path / 'report.json'
    path.write_text(json.dumps({'verified': True, 'profile': json.loads(profile_to_json(profile))}))
    loaded = load_profile(path)
    assert np.array_equal(loaded.strategies, profile.strategies)
    assert loaded.coords is None


def test_load_profile_checks_coords_against_game(tmp_path, coexistence):
    path = tmp_path / 'profile.json'
    consistent = StrategyProfile(np.array([[0.3, 1.0]]), np.array([[0.3, 0.7]]))
    path.write_text(profile_to_json(consistent))
    assert np.array_equal(load_profile(path, coexistence).coords, consistent.coords)

    path.write_text(profile_to_json(StrategyProfile(np.array([[0.3, 1.0], [0.5, 1.0]]),
                                                    np.array([[0.3, 0.7], [0.6, 0.4]]))))
    assert load_profile(path).num_players == 2
    with pytest.raises(InputError) as e:
        load_profile(path, coexistence)
    assert e.value.field == 'coords[1]'
