'''
Tests for the synthetic DSDM and SDID panel generators.
'''
from dataclasses import replace

import numpy as np
import pytest

from src.core.errors import SimulationError
from src.simulate import (DgpSpec, derive_seed, dsdm_innovations, gen_dsdm, gen_sdid, generate_batch, ring_weights,
                          truth_table)

from conftest import random_weights

####################
##### Settings #####
####################

def test_ring_weights_rows():
    w = ring_weights(7, 2)
    np.testing.assert_allclose(w.matrix.sum(axis=1), 1.0)
    assert w.matrix[0].tolist() == [0, 0.25, 0.25, 0, 0, 0.25, 0.25]
    assert w.labels[0] == 'B001'
    with pytest.raises(SimulationError):
        ring_weights(2)
    with pytest.raises(SimulationError, match='neighbours'):
        ring_weights(6, 3)


def test_spec_defaults_and_validation():
    spec = DgpSpec(n=4, t=9)
    assert spec.t0 == 4
    assert spec.weight_matrix().n == 4
    with pytest.raises(SimulationError, match='burn_in'):
        DgpSpec(burn_in=49)
    with pytest.raises(SimulationError, match='sigma'):
        DgpSpec(sigma=-1.0)
    with pytest.raises(SimulationError, match='t0'):
        DgpSpec(t=10, t0=10)
    with pytest.raises(SimulationError, match='tau'):
        DgpSpec(tau=1.0)
    with pytest.raises(SimulationError, match='admissible'):
        DgpSpec(n=10, rho=1.0, weights=ring_weights(10))
    with pytest.raises(SimulationError, match='entities'):
        DgpSpec(n=10, weights=ring_weights(8))


def test_truth_metadata(dsdm_spec, dsdm_panel):
    truth = dsdm_panel.metadata['truth']
    assert truth['rho'] == 0.3
    assert truth['gamma'] == {'x1': 0.4}
    assert truth['sigma2'] == 1.0
    assert truth['weights_checksum'] == ring_weights(20, 2).checksum
    assert truth_table(dsdm_spec) == {'tau': 0.3, 'rho': 0.3, 'eta': -0.1, 'beta': 0.5, 'theta': 0.3,
                                      'gamma_x1': 0.4, 'sigma2': 1.0}


def test_derived_seeds_are_distinct():
    seeds = {derive_seed(42, i) for i in range(50)}
    assert len(seeds) == 50
    assert derive_seed(42, 3) == derive_seed(42, 3)

################
##### DSDM #####
################

def test_dsdm_is_deterministic(dsdm_spec):
    assert gen_dsdm(dsdm_spec).equals(gen_dsdm(dsdm_spec))
    assert not gen_dsdm(dsdm_spec).equals(gen_dsdm(dsdm_spec.with_seed(4)))


def test_dsdm_panel_satisfies_the_model_equation(dsdm_spec, dsdm_panel):
    W = dsdm_spec.weight_matrix().matrix
    draws = dsdm_innovations(dsdm_spec)
    Y = dsdm_panel.outcome('ROE')
    D = dsdm_panel.treatment
    X = dsdm_panel.controls['x1']
    for t in range(1, dsdm_spec.t):
        lhs = Y[:, t] - 0.3 * W @ Y[:, t]
        rhs = (0.3 * Y[:, t - 1] - 0.1 * W @ Y[:, t - 1] + 0.5 * D[:, t] + 0.3 * W @ D[:, t] + 0.4 * X[:, t]
               + draws.entity_effects + draws.time_effects[dsdm_spec.burn_in + t]
               + draws.shocks[:, dsdm_spec.burn_in + t])
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_dsdm_without_spatial_terms_is_an_entity_recursion(dsdm_spec):
    spec = replace(dsdm_spec, rho=0.0, eta=0.0, theta=0.0, weights=random_weights(20, 8))
    draws = dsdm_innovations(spec)
    y = np.zeros(spec.n)
    path = []
    for t in range(draws.periods):
        y = (0.3 * y + 0.5 * draws.treatment[:, t] + 0.4 * draws.controls[0, :, t] + draws.entity_effects
             + draws.time_effects[t] + draws.shocks[:, t])
        path.append(y)
    expected = np.column_stack(path)[:, spec.burn_in:]
    np.testing.assert_allclose(gen_dsdm(spec).outcome('ROE'), expected, rtol=1e-12, atol=1e-12)
    ring = gen_dsdm(replace(spec, weights=None)).outcome('ROE')
    np.testing.assert_allclose(ring, expected, rtol=1e-12, atol=1e-12)


def test_dsdm_treatment_starts_at_t0(dsdm_spec, dsdm_panel):
    treated = dsdm_panel.ever_treated
    assert treated.sum() == 10
    assert set(dsdm_panel.first_treated()[treated]) == {dsdm_spec.t0}
    assert dsdm_panel.shape == (20, 15)
    assert dsdm_panel.quarters[0] == '2015Q1'


def test_dsdm_without_inputs_stays_at_zero():
    panel = gen_dsdm(DgpSpec(n=6, t=5, rho=0.4, sigma=0.0, treatment='none'))
    np.testing.assert_array_equal(panel.outcome('ROE'), 0.0)


def test_explosive_dsdm_raises():
    with pytest.raises(SimulationError, match='Explosive'):
        gen_dsdm(DgpSpec(n=10, t=20, tau=0.9, rho=0.5, eta=0.9, seed=1))


def test_t5_shocks_keep_variance():
    spec = DgpSpec(n=200, t=200, sigma=2.0, errors='t5', treatment='none', seed=6)
    noise = gen_sdid(spec).outcome('ROE')
    assert noise.var() == pytest.approx(4.0, rel=0.1)

################
##### SDID #####
################

def test_sdid_outcome_is_untreated_plus_effect(sdid_panel):
    untreated = sdid_panel.metadata['untreated']
    np.testing.assert_allclose(sdid_panel.outcome('ROE') - untreated, 2.0 * sdid_panel.treatment)
    assert sdid_panel.metadata['truth']['att'] == 2.0
    assert sdid_panel.ever_treated.sum() == 9


def test_treatment_none_and_random_counts():
    assert gen_sdid(DgpSpec(n=10, t=4, treatment='none')).treatment.sum() == 0
    panel = gen_sdid(DgpSpec(n=40, t=6, t0=3, treat_share=0.25, seed=2))
    assert panel.ever_treated.sum() == 10


def test_selection_favours_high_fixed_effects():
    spec = DgpSpec(n=200, t=4, t0=2, treatment='selection', selection_strength=3.0, treat_share=0.2,
                   sigma=0.1, fe_scale=1.0, seed=4)
    panel = gen_sdid(spec)
    levels = panel.metadata['untreated'].mean(axis=1)
    treated = panel.ever_treated
    assert levels[treated].mean() - levels[~treated].mean() > 0.5


def test_trend_slopes_by_group():
    spec = DgpSpec(n=60, t=6, t0=3, sdid_variant='trends', trend_scale=0.4, sigma=0.0, fe_scale=0.0, seed=8)
    panel = gen_sdid(spec)
    slopes = panel.metadata['untreated'][:, 1]
    treated = panel.ever_treated
    assert np.all((slopes[treated] >= 0.2) & (slopes[treated] <= 0.4))
    assert np.all(np.abs(slopes[~treated]) <= 0.4)
    np.testing.assert_allclose(panel.metadata['untreated'], slopes[:, None] * np.arange(6)[None, :], atol=1e-12)


def test_step_variant_staggers_cohorts():
    spec = DgpSpec(n=40, t=10, t0=5, treat_share=0.3, sdid_variant='step', cohorts=3, effect=1.0, seed=10)
    first = gen_sdid(spec).first_treated()
    adopted = first[first >= 0]
    assert sorted(set(adopted)) == [5, 6, 7]
    assert [int((adopted == c).sum()) for c in (5, 6, 7)] == [4, 4, 4]


def test_generate_batch_seeds_each_replication():
    spec = DgpSpec(n=12, t=6, t0=3, effect=1.0, seed=21)
    panels = generate_batch(spec, 4)
    assert [p.metadata['truth']['seed'] for p in panels] == [derive_seed(21, i) for i in range(4)]
    again = generate_batch(spec, 4, n_jobs=2)
    assert all(a.equals(b) for a, b in zip(panels, again))
    dsdm = generate_batch(spec, 2, generator=gen_dsdm)
    assert dsdm[0].metadata['dgp'] == 'dsdm'
