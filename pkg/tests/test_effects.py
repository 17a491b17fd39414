'''
Tests for the direct / indirect / total effects decomposition.
'''
import numpy as np
import pytest

from src.core.errors import EffectsError
from src.dsdm import DsdmFit, DsdmSpec, fit_mle
from src.effects import (EffectsDecomposition, decompose, decompose_params, effects_table, effects_uncertainty,
                         multiplier, spectral_effects)
from src.effects.decomposition import _delta_draws
from src.spatial import row_normalize

NAMES = ['tau', 'rho', 'eta', 'beta', 'theta', 'sigma2']


def make_fit(rho, beta, theta, vcov=None, draws=None, weights=None):
    vcov = np.zeros((6, 6)) if vcov is None else vcov
    bounds = weights.rho_bounds() if weights is not None else (-1.0, 1.0)
    return DsdmFit(estimator='mle' if draws is None else 'bayes', outcome='ROE', param_names=list(NAMES),
                   params=np.array([0.2, rho, 0.0, beta, theta, 1.0]), vcov=vcov, loglik=0.0,
                   n_entities=6, n_periods=10, rho_bounds=bounds, draws=draws)


def three_node_weights():
    return row_normalize(np.array([[0, 1, 1], [1, 0, 3], [2, 1, 0]]))


def test_zero_rho_gives_beta_and_theta(six_node_weights):
    effects = decompose(make_fit(0.0, 0.7, 0.3), six_node_weights)
    assert effects.direct == pytest.approx(0.7, abs=1e-12)
    assert effects.indirect == pytest.approx(0.3, abs=1e-12)
    assert effects.total == pytest.approx(1.0, abs=1e-12)


def test_zero_coefficients_give_zero_effects(six_node_weights):
    effects = decompose_params(0.4, 0.0, 0.0, six_node_weights)
    assert (effects.direct, effects.indirect, effects.total) == (0.0, 0.0, 0.0)


def test_three_node_matches_explicit_inverse():
    w = three_node_weights()
    m = np.linalg.inv(np.eye(3) - 0.5 * w.matrix) @ (1.0 * np.eye(3) + 0.4 * w.matrix)
    effects = decompose_params(0.5, 1.0, 0.4, w)
    assert effects.direct == pytest.approx(np.trace(m) / 3, rel=1e-12)
    assert effects.total == pytest.approx(m.sum() / 3, rel=1e-12)
    assert effects.total == pytest.approx(1.4 / 0.5, rel=1e-12)
    np.testing.assert_allclose(multiplier(0.5, 1.0, 0.4, w), m, rtol=1e-12)


def test_spectral_path_agrees_with_dense(six_node_weights):
    rho = np.array([-0.3, 0.0, 0.45, 0.8])
    beta = np.array([0.5, -1.0, 2.0, 0.1])
    theta = np.array([0.2, 0.3, -0.4, 0.9])
    fast = spectral_effects(rho, beta, theta, six_node_weights)
    for i in range(rho.size):
        dense = decompose_params(rho[i], beta[i], theta[i], six_node_weights)
        np.testing.assert_allclose(fast[i], [dense.direct, dense.indirect, dense.total], rtol=1e-10, atol=1e-12)


def test_rho_outside_interval_rejected(six_node_weights):
    with pytest.raises(EffectsError, match='outside admissible'):
        decompose_params(1.0, 1.0, 0.0, six_node_weights)


def test_decomposition_requires_additivity():
    with pytest.raises(EffectsError):
        EffectsDecomposition(direct=1.0, indirect=1.0, total=3.0)


def test_zero_vcov_gives_zero_se(six_node_weights):
    result = effects_uncertainty(make_fit(0.3, 0.5, 0.2, weights=six_node_weights), six_node_weights, reps=200)
    assert result.method == 'delta'
    for key in ('direct', 'indirect', 'total'):
        assert result.se[key] == pytest.approx(0.0, abs=1e-10)


def test_delta_draws_are_seeded(six_node_weights):
    vcov = np.diag([0.01, 0.004, 0.01, 0.02, 0.03, 0.01])
    fit = make_fit(0.3, 0.5, 0.2, vcov=vcov, weights=six_node_weights)
    first = effects_uncertainty(fit, six_node_weights, reps=500, seed=9)
    second = effects_uncertainty(fit, six_node_weights, reps=500, seed=9)
    assert first.se == second.se
    assert first.reps == 500


def test_delta_se_tracks_analytic_variance_at_zero_rho(six_node_weights):
    # rho pinned at 0: direct = beta and total = beta + theta
    vcov = np.diag([0.0, 0.0, 0.0, 0.04, 0.09, 0.0])
    fit = make_fit(0.0, 0.5, 0.2, vcov=vcov, weights=six_node_weights)
    result = effects_uncertainty(fit, six_node_weights, reps=4000, seed=1)
    assert result.se['total'] == pytest.approx(np.sqrt(0.04 + 0.09), rel=0.05)
    assert result.se['direct'] == pytest.approx(0.2, rel=0.05)


def test_delta_se_settles_by_a_thousand_reps(dsdm_spec, dsdm_panel):
    fit = fit_mle(DsdmSpec('ROE', dsdm_spec.weights), dsdm_panel)
    short = effects_uncertainty(fit, dsdm_spec.weights, reps=1000, seed=42)
    long = effects_uncertainty(fit, dsdm_spec.weights, reps=2000, seed=42)
    for key in ('direct', 'indirect', 'total'):
        assert long.se[key] == pytest.approx(short.se[key], rel=0.05), key


def test_delta_draws_extend_with_reps(six_node_weights):
    vcov = np.diag([0.01, 0.004, 0.01, 0.02, 0.03, 0.01])
    fit = make_fit(0.3, 0.5, 0.2, vcov=vcov, weights=six_node_weights)
    np.testing.assert_array_equal(_delta_draws(fit, six_node_weights, 1200, 5)[:700],
                                  _delta_draws(fit, six_node_weights, 700, 5))


def test_posterior_sim_uses_every_draw(six_node_weights):
    rng = np.random.default_rng(3)
    draws = np.column_stack([np.full(300, 0.2), rng.uniform(0.1, 0.3, 300), np.zeros(300),
                             rng.normal(0.5, 0.1, 300), rng.normal(0.2, 0.1, 300), np.ones(300)])
    fit = make_fit(0.2, 0.5, 0.2, vcov=np.cov(draws, rowvar=False), draws=draws, weights=six_node_weights)
    result = effects_uncertainty(fit, six_node_weights)
    assert result.method == 'posterior_sim'
    assert result.reps == 300
    expected = spectral_effects(draws[:, 1], draws[:, 3], draws[:, 4], six_node_weights)[:, 2].std(ddof=1)
    assert result.se['total'] == pytest.approx(expected)


def test_posterior_sim_without_draws_rejected(six_node_weights):
    with pytest.raises(EffectsError, match='posterior draws'):
        effects_uncertainty(make_fit(0.2, 0.5, 0.2), six_node_weights, method='posterior_sim')


def test_effects_table_rows(six_node_weights):
    vcov = np.diag([0.01, 0.001, 0.01, 0.001, 0.001, 0.01])
    result = effects_uncertainty(make_fit(0.3, 0.5, 0.2, vcov=vcov, weights=six_node_weights), six_node_weights,
                                 reps=300, seed=2)
    table = effects_table(result)
    assert list(table['effect']) == ['Direct', 'Indirect', 'Total', 'Indirect/Total Ratio']
    assert table.loc[2, 'stars'] == '***'
    assert np.isnan(table.loc[3, 'p_value'])
    assert result.ratio_indirect_total == pytest.approx(result.indirect / result.total)
