'''
Tests for panel ingestion, keyword counting, treatment and sample construction.
'''
import numpy as np
import pytest

from src.core.errors import IngestError, PanelError
from src.panel import (KeywordDictionary, PanelDataset, PanelSchema, SampleFilter, apply_filter,
                       build_treatment, build_treatment_for_quarters, canonical_schema, compute_returns,
                       complete_entities, count_by_category, count_mentions, default_keywords,
                       impute_within_entity, infer_schema, ingest_panel, load_keywords, mentions_from_corpus,
                       parse_keywords, quarter_range, size_split, summary_statistics, treatment_groups, winsorize,
                       winsorize_panel, write_panel)

from conftest import write_text

HEADER = 'entity,quarter,ROA,ROE,treatment,log_assets\n'

#################
##### Panel #####
#################

def test_quarter_range_inclusive():
    assert quarter_range('2018Q3', '2019Q2') == ['2018Q3', '2018Q4', '2019Q1', '2019Q2']
    with pytest.raises(PanelError):
        quarter_range('2019Q1', '2018Q4')


def test_ingest_minimal_rectangle(tmp_path):
    rows = ''.join(f'{e},2018Q{q},1.0,10.0,0,{5 + q}\n' for e in ('B1', 'B2') for q in (1, 2, 3))
    panel = ingest_panel(write_text(tmp_path / 'panel.csv', HEADER + rows))
    assert panel.shape == (2, 3)
    assert panel.quarters == ('2018Q1', '2018Q2', '2018Q3')
    assert not np.isnan(panel.outcome('roe')).any()


def test_ingest_inserts_gap_quarter(tmp_path):
    text = HEADER + 'B1,2018Q1,1.0,10.0,0,5\nB1,2018Q3,1.2,11.0,0,5\n'
    panel = ingest_panel(write_text(tmp_path / 'panel.csv', text))
    assert panel.quarters == ('2018Q1', '2018Q2', '2018Q3')
    assert panel.missing_mask('ROA')[0].tolist() == [False, True, False]
    assert panel.treatment[0, 1] == 0


def test_ingest_sorts_entities(tmp_path):
    text = HEADER + 'B2,2018Q1,1,1,0,1\nB10,2018Q1,1,1,0,1\nB1,2018Q1,1,1,0,1\n'
    panel = ingest_panel(write_text(tmp_path / 'panel.csv', text))
    assert panel.entity_ids == ('B1', 'B10', 'B2')


def test_ingest_duplicate_names_both_rows(tmp_path):
    text = HEADER + 'B1,2018Q1,1,1,0,1\nB2,2018Q1,1,1,0,1\nB1,2018Q1,2,2,0,1\n'
    with pytest.raises(IngestError, match='rows 2 and 4'):
        ingest_panel(write_text(tmp_path / 'panel.csv', text))


def test_ingest_unparseable_numeric_names_cell(tmp_path):
    text = HEADER + 'B1,2018Q1,1,1,0,1\nB1,2018Q2,abc,1,0,1\n'
    with pytest.raises(IngestError, match="'abc' in column 'ROA' at row 3"):
        ingest_panel(write_text(tmp_path / 'panel.csv', text))


def test_ingest_missing_tokens_become_nan(tmp_path):
    text = HEADER + 'B1,2018Q1,NA,1,0,1\nB1,2018Q2,.,1,,1\n'
    panel = ingest_panel(write_text(tmp_path / 'panel.csv', text))
    assert np.isnan(panel.outcomes['ROA']).all()
    assert panel.treatment.tolist() == [[0.0, 0.0]]


def test_ingest_builds_treatment_from_mentions(tmp_path):
    text = ('bank,period,ROA,ROE,mentions\n'
            'B1,2020Q1,1,1,0\nB1,2020Q2,1,1,3\nB1,2020Q3,1,1,0\n'
            'B2,2020Q1,1,1,0\nB2,2020Q2,1,1,0\nB2,2020Q3,1,1,0\n')
    schema = PanelSchema(entity='bank', quarter='period', treatment=None)
    panel = ingest_panel(write_text(tmp_path / 'panel.csv', text), schema)
    assert panel.treatment.tolist() == [[0, 1, 1], [0, 0, 0]]


def test_ingest_derives_returns_from_levels(tmp_path):
    text = 'entity,quarter,ni,assets,equity\nB1,2018Q1,2,200,20\nB1,2018Q2,1,0,10\n'
    schema = PanelSchema(roa=None, roe=None, net_income='ni', total_assets='assets', total_equity='equity')
    panel = ingest_panel(write_text(tmp_path / 'panel.csv', text), schema)
    assert panel.outcomes['ROA'][0, 0] == pytest.approx(1.0)
    assert panel.outcomes['ROE'][0, 0] == pytest.approx(10.0)
    assert np.isnan(panel.outcomes['ROA'][0, 1])


def test_schema_rejects_unknown_keys():
    with pytest.raises(IngestError, match='Unknown schema keys'):
        PanelSchema.from_dict({'entity': 'id', 'bogus': 'x'})


def test_compute_returns_nonpositive_denominator():
    roa, roe = compute_returns([1.0], [-5.0], [4.0])
    assert np.isnan(roa[0])
    assert roe[0] == pytest.approx(25.0)


def test_write_then_ingest_identical(tmp_path, small_panel):
    path = str(tmp_path / 'panel.csv')
    _, sidecar = write_panel(small_panel, path)
    back = ingest_panel(path, canonical_schema(small_panel))
    assert back.equals(small_panel)
    assert sidecar.endswith('panel_missing.csv')


def test_infer_schema_reads_simulated_controls(tmp_path, small_panel):
    path = str(tmp_path / 'panel.csv')
    write_panel(small_panel, path)
    schema = infer_schema(path)
    assert set(schema.controls) == {'log_assets', 'tier1_ratio'}


def test_panel_rejects_non_binary_treatment():
    with pytest.raises(PanelError, match='binary'):
        PanelDataset(entity_ids=['a', 'b'], quarters=['2018Q1'], outcomes={'ROE': [[1.0], [2.0]]},
                     treatment=[[0.5], [0.0]])


def test_panel_rejects_duplicate_entities():
    with pytest.raises(PanelError, match='unique'):
        PanelDataset(entity_ids=['a', 'a'], quarters=['2018Q1'], outcomes={'ROE': [[1.0], [2.0]]},
                     treatment=[[0.0], [0.0]])


def test_avg_log_assets_is_time_mean(small_panel):
    np.testing.assert_allclose(small_panel.avg_log_assets, np.arange(1.0, 9.0))

####################
##### Keywords #####
####################

def test_count_mentions_direct():
    dictionary = KeywordDictionary({'core': ('generative AI', 'ChatGPT')})
    assert count_mentions('we deployed generative AI and ChatGPT', dictionary) == 2
    assert count_mentions('', dictionary) == 0


def test_count_mentions_whole_phrase_case_insensitive():
    dictionary = KeywordDictionary({'core': ('LLM',)})
    assert count_mentions('An llm, two LLMs and one LLM.', dictionary) == 2


def test_count_mentions_spans_whitespace():
    dictionary = KeywordDictionary({'core': ('generative AI',)})
    assert count_mentions('Generative\n   AI', dictionary) == 1


def test_count_by_category():
    dictionary = parse_keywords('[core]\nChatGPT\n[strategic]\nAI strategy\n')
    counts = count_by_category('ChatGPT drives our AI strategy; ChatGPT again', dictionary)
    assert counts == {'core': 2, 'strategic': 1}


def test_keyword_phrase_in_two_categories_rejected():
    with pytest.raises(PanelError, match='both'):
        parse_keywords('[a]\nChatGPT\n[b]\nchatgpt\n')


def test_keyword_line_before_header_rejected():
    with pytest.raises(PanelError, match='before any'):
        parse_keywords('ChatGPT\n[core]\n')


def test_default_keywords_has_three_categories():
    dictionary = default_keywords()
    assert set(dictionary.categories) == {'core', 'application', 'strategic'}
    assert count_mentions('We use ChatGPT.', dictionary) == 1


def test_load_keywords_from_file(tmp_path):
    text = '# vendors\n[core]\nChatGPT\nlarge language model  # LLM\n\n[strategic]\nAI strategy\n'
    path = write_text(tmp_path / 'dict.txt', text)
    dictionary = load_keywords(path)
    assert dictionary.categories['core'] == ('ChatGPT', 'large language model')
    assert count_mentions('Our AI strategy uses a large language model.', dictionary) == 2


def test_corpus_counts_and_indicator(tmp_path):
    dictionary = KeywordDictionary({'core': ('generative AI', 'ChatGPT')})
    write_text(tmp_path / 'B1_2023Q1.txt', 'nothing relevant here')
    write_text(tmp_path / 'B2_2023Q1.txt', 'a ChatGPT pilot')
    write_text(tmp_path / 'B3_2023Q1.txt', 'ChatGPT, generative AI, ChatGPT and Generative AI')
    counts = mentions_from_corpus(str(tmp_path), dictionary, ['B1', 'B2', 'B3'], ['2023Q1'])
    assert counts[:, 0].tolist() == [0, 1, 4]
    assignment = build_treatment(counts, mode='raw')
    assert assignment.indicator[:, 0].tolist() == [0, 1, 1]

#####################
##### Treatment #####
#####################

def test_absorbing_carry_forward():
    assignment = build_treatment(np.array([[0, 0, 3, 0]]), mode='absorbing')
    assert assignment.indicator.tolist() == [[0, 0, 1, 1]]
    assert assignment.first_treated.tolist() == [2]


def test_raw_mode_follows_mentions():
    assignment = build_treatment(np.array([[0, 0, 3, 0]]), mode='raw')
    assert assignment.indicator.tolist() == [[0, 0, 1, 0]]


def test_zero_mentions_is_control():
    assignment = build_treatment(np.zeros((1, 4)))
    assert assignment.indicator.sum() == 0
    assert assignment.controls.tolist() == [True]


def test_mention_before_earliest_is_excluded():
    assignment = build_treatment(np.array([[2, 0, 0, 0], [0, 0, 1, 0]]), earliest=2)
    assert assignment.excluded.tolist() == [True, False]
    assert assignment.adopters.tolist() == [False, True]


def test_treatment_by_quarter_label():
    quarters = ['2022Q3', '2022Q4', '2023Q1']
    assignment = build_treatment_for_quarters(np.array([[1, 0, 1]]), quarters, earliest_quarter='2023Q1')
    assert assignment.excluded.tolist() == [True]
    with pytest.raises(PanelError, match='outside'):
        build_treatment_for_quarters(np.array([[1, 0, 1]]), quarters, earliest_quarter='2024Q1')


def test_negative_mentions_rejected():
    with pytest.raises(PanelError):
        build_treatment(np.array([[0, -1]]))

######################
##### Transforms #####
######################

def test_winsorize_one_to_hundred():
    values = np.arange(1.0, 101.0)
    out = winsorize(values, 1, 99)
    assert out[0] == 2.0
    assert out[-1] == 99.0
    np.testing.assert_array_equal(out[1:-1], values[1:-1])


def test_winsorize_constant_and_idempotent():
    np.testing.assert_array_equal(winsorize(np.full(10, 3.0)), np.full(10, 3.0))
    rng = np.random.default_rng(0)
    once = winsorize(rng.standard_t(2, size=(20, 10)))
    np.testing.assert_array_equal(winsorize(once), once)


def test_winsorize_keeps_missing():
    out = winsorize(np.array([1.0, np.nan, 3.0]))
    assert np.isnan(out[1])
    with pytest.raises(PanelError, match='all-missing'):
        winsorize(np.array([np.nan, np.nan]))


def test_winsorize_panel_outcomes(small_panel):
    out = winsorize_panel(small_panel, lower_pct=10, upper_pct=90)
    roe = small_panel.outcomes['ROE']
    assert out.outcomes['ROE'].max() <= roe.max()
    np.testing.assert_array_equal(out.controls['tier1_ratio'], small_panel.controls['tier1_ratio'])


def test_apply_filter_drops_short_entities():
    roa = np.ones((10, 6))
    roa[:4, :3] = np.nan
    panel = PanelDataset(entity_ids=[f'E{i}' for i in range(10)], quarters=quarter_range('2020Q1', '2021Q2'),
                         outcomes={'ROA': roa, 'ROE': np.ones((10, 6))}, treatment=np.zeros((10, 6)))
    filtered = apply_filter(panel, SampleFilter(min_quarters=4))
    assert filtered.n_entities == 6
    assert filtered.metadata['filter_report']['dropped'] == 4
    assert apply_filter(panel, SampleFilter(min_quarters=3)).n_entities == 10


def test_apply_filter_empty_result_rejected(small_panel):
    with pytest.raises(PanelError):
        apply_filter(small_panel, SampleFilter(min_quarters=7))


def test_size_split_quartile(small_panel):
    large, small = size_split(small_panel)
    assert large.n_entities == 2
    assert small.n_entities == 6
    assert large.metadata['group'] == 'Large (Top 25%)'
    assert small.metadata['group'] == 'Small (Bottom 75%)'


def test_size_split_ties_go_large():
    sizes = np.array([1.0, 1.0, 2.0, 2.0, 2.0])
    panel = PanelDataset(entity_ids=list('abcde'), quarters=['2020Q1'], outcomes={'ROE': np.zeros((5, 1))},
                         treatment=np.zeros((5, 1)), avg_log_assets=sizes)
    large, small = size_split(panel, quantile=0.5)
    assert large.entity_ids == ('c', 'd', 'e')
    assert small.entity_ids == ('a', 'b')


def test_size_split_needs_four_entities(small_panel):
    with pytest.raises(PanelError, match='at least 4'):
        size_split(small_panel.select_entities([0, 1, 2]))


def test_impute_within_entity_flags_cells(small_panel):
    roa = np.array(small_panel.outcomes['ROA'])
    roa[0, 2] = np.nan
    panel = small_panel.replace(outcomes={**small_panel.outcomes, 'ROA': roa})
    out = impute_within_entity(panel, ['ROA'])
    assert out.outcomes['ROA'][0, 2] == pytest.approx(np.nanmean(roa[0]))
    assert out.imputed['ROA'].sum() == 1


def test_complete_entities_drops_gappy_rows(small_panel):
    roe = np.array(small_panel.outcomes['ROE'])
    roe[3, 1] = np.nan
    panel = small_panel.replace(outcomes={**small_panel.outcomes, 'ROE': roe})
    kept = complete_entities(panel)
    assert kept.n_entities == 7
    assert 'B004' not in kept.entity_ids
    assert complete_entities(panel, ['ROA']).n_entities == 8


def test_treatment_groups_split(small_panel):
    excluded = np.zeros(8, dtype=bool)
    excluded[7] = True
    adopters, controls, dropped = treatment_groups(small_panel.replace(excluded=excluded))
    assert adopters.tolist() == [0, 1]
    assert controls.tolist() == [2, 3, 4, 5, 6]
    assert dropped.tolist() == [7]


def test_summary_statistics_columns(small_panel):
    table = summary_statistics(small_panel)
    assert list(table.columns) == ['N', 'Mean', 'SD', 'P25', 'Median', 'P75']
    assert table.loc['log_assets', 'N'] == 48
    assert table.loc['log_assets', 'Mean'] == pytest.approx(4.5)


def test_ingest_reads_17_digit_values_exactly(tmp_path, small_panel):
    awkward = np.array(small_panel.outcomes['ROE'])
    awkward[0, :] = [0.1 + 0.2, 1 / 3, 2 / 3, 9.999999999999998, 1e-300 * 7, 123456.78901234567]
    panel = small_panel.replace(outcomes={'ROA': small_panel.outcomes['ROA'], 'ROE': awkward})
    path = str(tmp_path / 'panel.csv')
    write_panel(panel, path)
    back = ingest_panel(path, canonical_schema(panel))
    assert back.outcomes['ROE'].tobytes() == awkward.tobytes()
    assert back.outcomes['ROA'].tobytes() == np.asarray(panel.outcomes['ROA']).tobytes()
