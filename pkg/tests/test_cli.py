'''
End-to-end runs of the bankspill command line on small synthetic panels.
'''
import json
import os

import numpy as np
import pandas as pd
import pytest

from src.main import run
from src.main.cli import _join_negative_values, build_parser, run_config
from src.spatial import load_weights


def read(path):
    with open(path, encoding='utf-8') as handle:
        return json.load(handle)


def simulate_sdid(tmp_path):
    out = str(tmp_path / 'sim')
    code = run(['simulate', 'sdid', '--n', '30', '--t', '12', '--t0', '8', '--treat-share', '0.3', '--effect', '2',
                '--sigma', '0.5', '--fe-scale', '1', '--seed', '5', '--out', out, '-q'])
    assert code == 0
    return os.path.join(out, 'panel.csv')


def simulate_dsdm(tmp_path):
    out = str(tmp_path / 'sim')
    code = run(['simulate', 'dsdm', '--n', '20', '--t', '15', '--tau', '0.3', '--rho', '0.3', '--beta', '0.5',
                '--theta', '0.3', '--gamma', '0.4', '--fe-scale', '1', '--seed', '3', '--out', out, '-q'])
    assert code == 0
    return out

###################
##### Parsing #####
###################

def test_negative_horizons_are_joined():
    assert _join_negative_values(['sdid', '--horizons', '-4:4', '--seed', '1']) == \
        ['sdid', '--horizons=-4:4', '--seed', '1']
    args = build_parser().parse_args(_join_negative_values(['sdid', 'event-study', '--panel', 'p.csv',
                                                            '--horizons', '-2:3']))
    assert args.horizons == '-2:3'
    assert args.action == 'event-study'


def test_runtime_options_stay_out_of_config():
    args = build_parser().parse_args(['netrisk', '--panel', 'p.csv', '--out', 'x', '--workers', '4', '-v'])
    config = run_config(args)
    assert config.log_level == 'DEBUG'
    assert config.workers == 4
    assert 'out' not in config.params and 'workers' not in config.params
    assert config.params['threshold'] == 'auto'


def test_dsdm_defaults_and_bias_flag():
    args = build_parser().parse_args(['dsdm', '--panel', 'p.csv'])
    assert (args.outcome, args.weights, args.bias_correction) == ('ROE', 'auto', 'none')
    args = build_parser().parse_args(['dsdm', '--panel', 'p.csv', '--bias-correction', 'analytic'])
    assert args.bias_correction == 'analytic'


def test_usage_errors_exit_two():
    assert run([]) == 2
    assert run(['dsdm']) == 2
    assert run(['simulate', 'spatial']) == 2


def test_library_errors_exit_one(tmp_path, capsys):
    code = run(['simulate', 'dsdm', '--n', '10', '--rho', '1.5', '--out', str(tmp_path), '-q'])
    assert code == 1
    assert 'error[simulate]: rho=1.5 outside' in capsys.readouterr().err
    code = run(['sdid', '--panel', str(tmp_path / 'missing.csv'), '--out', str(tmp_path), '-q'])
    assert code == 1
    assert 'error[panel.ingest]' in capsys.readouterr().err

##########################
##### Ingest/weights #####
##########################

def test_ingest_then_network_weights(tmp_path):
    rng = np.random.default_rng(0)
    rows = []
    for e, entity in enumerate(['C', 'A', 'B', 'D', 'E']):
        for q in ['2022Q1', '2022Q2', '2022Q3', '2022Q4']:
            rows.append({'entity': entity, 'quarter': q, 'ROA': rng.normal(1, 0.1), 'ROE': rng.normal(10, 1),
                         'mentions': 3 if entity == 'A' and q >= '2022Q3' else 0, 'log_assets': 10.0 + e})
    raw = tmp_path / 'raw.csv'
    pd.DataFrame(rows).to_csv(raw, index=False)

    out = str(tmp_path / 'ingest')
    assert run(['ingest', '--input', str(raw), '--winsorize', '--out', out, '-q']) == 0
    summary = read(os.path.join(out, 'ingest.json'))
    assert (summary['n_entities'], summary['n_quarters']) == (5, 4)
    panel = pd.read_csv(os.path.join(out, 'panel.csv'))
    assert list(panel['entity'].unique()) == ['A', 'B', 'C', 'D', 'E']
    assert panel.loc[panel['entity'] == 'A', 'treatment'].tolist() == [0, 0, 1, 1]
    assert os.path.exists(os.path.join(out, 'summary_statistics.csv'))

    wout = str(tmp_path / 'weights')
    assert run(['weights', '--kind', 'network', '--panel', os.path.join(out, 'panel.csv'), '--out', wout, '-q']) == 0
    report = read(os.path.join(wout, 'weights.json'))
    assert report['kind'] == 'network'
    assert report['n'] == 5
    assert report['rho_bounds'][1] == pytest.approx(1.0)

##############################
##### DSDM and effects #####
##############################

def test_dsdm_fit_then_effects(tmp_path):
    sim = simulate_dsdm(tmp_path)
    assert read(os.path.join(sim, 'truth.json'))['rho'] == 0.3
    fit_dir = str(tmp_path / 'fit')
    assert run(['dsdm', '--panel', os.path.join(sim, 'panel.csv'), '--outcome', 'ROE', '--controls', 'x1',
                '--weights', os.path.join(sim, 'weights.csv'), '--out', fit_dir, '-q']) == 0
    fit = read(os.path.join(fit_dir, 'fit.json'))
    assert fit['estimator'] == 'mle'
    assert 'gamma_x1' in fit['param_names']

    eff_dir = str(tmp_path / 'effects')
    assert run(['effects', '--fit', os.path.join(fit_dir, 'fit.json'), '--reps', '200', '--out', eff_dir, '-q']) == 0
    effects = read(os.path.join(eff_dir, 'effects.json'))
    assert effects['method'] == 'delta'
    assert effects['total'] == pytest.approx(effects['direct'] + effects['indirect'])
    table = pd.read_csv(os.path.join(eff_dir, 'effects_table.csv'))
    assert len(table) == 4


def test_bayes_fit_feeds_posterior_effects(tmp_path):
    sim = simulate_dsdm(tmp_path)
    fit_dir = str(tmp_path / 'bayes')
    assert run(['dsdm', '--panel', os.path.join(sim, 'panel.csv'), '--outcome', 'ROE', '--weights', 'ring',
                '--estimator', 'bayes', '--iterations', '400', '--burn-in', '200', '--draws',
                '--out', fit_dir, '-q']) == 0
    assert len(pd.read_csv(os.path.join(fit_dir, 'draws.csv'))) == 200
    eff_dir = str(tmp_path / 'effects')
    assert run(['effects', '--fit', os.path.join(fit_dir, 'fit.json'), '--out', eff_dir, '-q']) == 0
    assert read(os.path.join(eff_dir, 'effects.json'))['method'] == 'posterior_sim'


def test_default_dsdm_run_reads_simulated_output(tmp_path):
    sim = simulate_dsdm(tmp_path)
    fit_dir = str(tmp_path / 'default')
    assert run(['dsdm', '--panel', os.path.join(sim, 'panel.csv'), '--out', fit_dir, '-q']) == 0
    fit = read(os.path.join(fit_dir, 'fit.json'))
    assert fit['outcome'] == 'ROE'
    assert fit['weights_checksum'] == load_weights(os.path.join(sim, 'weights.csv')).checksum
    assert 'weights.csv' in read(os.path.join(fit_dir, 'manifest.json'))['inputs']


def test_manifest_records_inputs_and_stable_hash(tmp_path):
    sim = simulate_dsdm(tmp_path)
    panel = os.path.join(sim, 'panel.csv')
    manifests = []
    for name in ('first', 'second'):
        out = str(tmp_path / name)
        assert run(['dsdm', '--panel', panel, '--outcome', 'ROE', '--weights', 'ring', '--out', out, '-q']) == 0
        manifests.append(read(os.path.join(out, 'manifest.json')))
    first, second = manifests
    assert first['config_hash'] == second['config_hash']
    assert 'panel.csv' in first['inputs']
    assert {'fit.json', 'fit_table.csv', 'weights.csv'} <= set(first['outputs'])
    assert first['config']['warnings'] == []
    assert 'out' not in first['config']
    assert 'numpy' in first['versions']

################
##### SDID #####
################

def test_sdid_fit_writes_weights_and_att(tmp_path):
    panel = simulate_sdid(tmp_path)
    out = str(tmp_path / 'sdid')
    assert run(['sdid', '--panel', panel, '--t0', '2017Q1', '--bootstrap', '20', '--out', out, '-q']) == 0
    result = read(os.path.join(out, 'sdid.json'))
    assert result['att'] == pytest.approx(2.0, abs=0.6)
    units = pd.read_csv(os.path.join(out, 'unit_weights.csv'))
    assert units.iloc[:, -1].sum() == pytest.approx(1.0)
    table = pd.read_csv(os.path.join(out, 'att_table.csv'))
    assert table['group'].tolist() == ['Full Sample']


def test_sdid_rerun_writes_identical_files(tmp_path):
    panel = simulate_sdid(tmp_path)
    for name in ('first', 'second'):
        out = str(tmp_path / name)
        assert run(['sdid', '--panel', panel, '--t0', '2017Q1', '--bootstrap', '20', '--seed', '3',
                    '--out', out, '-q']) == 0
    for filename in ('sdid.json', 'unit_weights.csv'):
        first, second = ((tmp_path / name / filename).read_bytes() for name in ('first', 'second'))
        assert first == second, filename


def test_sdid_event_study_and_placebos(tmp_path):
    panel = simulate_sdid(tmp_path)
    out = str(tmp_path / 'es')
    assert run(['sdid', 'event-study', '--panel', panel, '--horizons', '-2:2', '--bootstrap', '10',
                '--out', out, '-q']) == 0
    series = pd.read_csv(os.path.join(out, 'event_study.csv'))
    assert len(series) == 5

    shift = str(tmp_path / 'shift')
    assert run(['placebo', '--panel', panel, '--t0', '2017Q1', '--shift', '2016Q3', '--bootstrap', '10',
                '--out', shift, '-q']) == 0
    assert abs(read(os.path.join(shift, 'placebo_shift.json'))['att']) < 1.0

    assert run(['placebo', '--panel', panel, '--t0', '2017Q1', '--out', shift, '-q']) == 1


def test_netrisk_with_coupling(tmp_path):
    panel = simulate_sdid(tmp_path)
    out = str(tmp_path / 'net')
    assert run(['netrisk', '--panel', panel, '--weights', 'ring', '--coupling-base', '0.3',
                '--coupling-delta', '0.2', '--overlap', '0.5', '--out', out, '-q']) == 0
    stats = read(os.path.join(out, 'graph_stats.json'))
    assert stats['nodes'] == 30
    assert stats['adopters'] == 9
    coupling = read(os.path.join(out, 'coupling.json'))
    assert coupling['adopter_pair_mean'] == pytest.approx(0.4)
    matrix = pd.read_csv(os.path.join(out, 'coupling_matrix.csv'), index_col=0)
    assert matrix.shape == (30, 30)
