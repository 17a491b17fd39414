'''
Tests for the bank graph, its topology statistics and coupling correlations.
'''
import math

import networkx as nx
import numpy as np
import pytest

from src.core.errors import EstimationWarning, NetRiskError
from src.netrisk import (BankGraph, binarize, clustering_coefficients, coupling_matrix, default_threshold,
                         distance_matrix, edge_list, graph_summary, hubs, path_lengths, systemic_core)
from src.spatial import row_normalize

from conftest import random_weights


def graph_from_edges(n, edges, adopters=()):
    adjacency = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        adjacency[i, j] = adjacency[j, i] = True
    adoption = np.zeros(n, dtype=bool)
    adoption[list(adopters)] = True
    return BankGraph(adjacency, 1.0, adoption, labels=[f'B{i}' for i in range(n)])


def path_weights():
    return row_normalize(np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]), labels=['a', 'b', 'c'])

#################
##### Graph #####
#################

def test_binarize_path_graph():
    g = binarize(path_weights(), threshold=0.5)
    assert g.edge_count == 2
    assert g.adjacency.tolist() == [[False, True, False], [True, False, True], [False, True, False]]
    assert g.labels == ('a', 'b', 'c')


def test_binarize_symmetrizes_by_max():
    w = row_normalize(np.array([[0, 9, 1], [1, 0, 1], [1, 1, 0]]))
    g = binarize(w, threshold=0.6)
    assert g.adjacency[0, 1] and g.adjacency[1, 0]
    assert g.edge_count == 1


def test_default_threshold_is_median_positive_entry(six_node_weights):
    positive = six_node_weights.matrix[six_node_weights.matrix > 0]
    assert default_threshold(six_node_weights) == pytest.approx(np.median(positive))
    g = binarize(six_node_weights)
    assert g.threshold == pytest.approx(np.median(positive))
    assert g.edge_count >= 8


def test_nonpositive_threshold_rejected(six_node_weights):
    with pytest.raises(NetRiskError, match='positive'):
        binarize(six_node_weights, threshold=0.0)


def test_empty_graph_warns(six_node_weights):
    with pytest.warns(EstimationWarning, match='without edges'):
        g = binarize(six_node_weights, threshold=2.0)
    assert g.edge_count == 0
    assert g.density == 0.0


def test_bank_graph_validation():
    with pytest.raises(NetRiskError, match='symmetric'):
        BankGraph(np.array([[0, 1], [0, 0]]), 1.0, [0, 0])
    with pytest.raises(NetRiskError, match='adoption'):
        BankGraph(np.zeros((2, 2)), 1.0, [0, 0, 1])


def test_networkx_view_carries_attributes():
    g = graph_from_edges(3, [(0, 1)], adopters=[1])
    assert g.graph.nodes[1]['adopter'] is True
    assert g.graph.nodes[2]['label'] == 'B2'
    assert g.graph.number_of_edges() == 1


def test_hubs_top_decile_stable_ties():
    # star on 12 nodes plus one extra edge: ceil(12 / 10) = 2 hubs
    edges = [(0, i) for i in range(1, 12)] + [(5, 6)]
    g = graph_from_edges(12, edges)
    assert hubs(g) == [0, 5]
    assert len(hubs(graph_from_edges(5, [(0, 1)]))) == math.ceil(5 / 10)


def test_systemic_core_is_adopters_and_neighbours():
    g = graph_from_edges(5, [(0, 1), (1, 2), (3, 4)], adopters=[0, 3])
    assert systemic_core(g) == [0, 1, 3, 4]
    assert systemic_core(graph_from_edges(3, [(0, 1)])) == []


def test_edge_list_rows(six_node_weights):
    adoption = [1, 1, 0, 0, 0, 0]
    g = binarize(six_node_weights, adoption=adoption)
    edges = edge_list(g, six_node_weights)
    assert list(edges.columns) == ['source', 'target', 'weight', 'both_adopters']
    assert len(edges) == g.edge_count
    assert (edges['weight'] >= g.threshold).all()
    both = edges[(edges['source'] == 'B001') & (edges['target'] == 'B002')]
    assert both.empty or both['both_adopters'].iloc[0] == 1

######################
##### Statistics #####
######################

def test_path_graph_mean_length():
    summary = path_lengths(binarize(path_weights(), threshold=0.5))
    assert summary.mean == pytest.approx(4.0 / 3.0)
    assert summary.connected_pairs == 3
    assert summary.disconnected_pairs == 0


def test_group_paths_use_full_graph():
    g = graph_from_edges(3, [(0, 1), (1, 2)], adopters=[0, 2])
    summary = path_lengths(g)
    assert summary.adopter_mean == 2.0
    assert np.isnan(summary.non_adopter_mean)


def test_disconnected_pairs_counted():
    g = graph_from_edges(4, [(0, 1), (2, 3)])
    summary = path_lengths(g)
    assert summary.connected_pairs == 2
    assert summary.disconnected_pairs == 4
    assert summary.mean == 1.0
    assert np.isinf(distance_matrix(g)[0, 3])


def test_clustering_triangle_and_star():
    triangle = clustering_coefficients(graph_from_edges(3, [(0, 1), (1, 2), (0, 2)]))
    np.testing.assert_allclose(triangle.per_node, 1.0)
    star = clustering_coefficients(graph_from_edges(4, [(0, 1), (0, 2), (0, 3)], adopters=[0]))
    np.testing.assert_allclose(star.per_node, 0.0)
    assert star.adopter_mean == 0.0


def test_clustering_matches_networkx_average():
    rng = np.random.default_rng(8)
    upper = np.triu(rng.uniform(size=(15, 15)) < 0.3, 1)
    adjacency = upper | upper.T
    g = BankGraph(adjacency, 1.0, rng.uniform(size=15) < 0.4)
    reference = nx.from_numpy_array(adjacency.astype(int))
    assert clustering_coefficients(g).mean == pytest.approx(nx.average_clustering(reference))


def test_statistics_follow_entity_relabelling():
    weights = random_weights(12, 5)
    adoption = np.array([1, 0, 0, 1, 0, 1, 0, 0, 0, 1, 0, 0], dtype=bool)
    order = np.random.default_rng(6).permutation(12)
    g = binarize(weights, adoption=adoption)
    shuffled = binarize(weights.permuted(order), threshold=g.threshold, adoption=adoption[order])
    np.testing.assert_array_equal(distance_matrix(shuffled), distance_matrix(g)[np.ix_(order, order)])
    np.testing.assert_allclose(clustering_coefficients(shuffled).per_node, clustering_coefficients(g).per_node[order])
    for field in ('mean', 'adopter_mean', 'non_adopter_mean'):
        assert getattr(path_lengths(shuffled), field) == pytest.approx(getattr(path_lengths(g), field), nan_ok=True)
        assert getattr(clustering_coefficients(shuffled), field) == pytest.approx(
            getattr(clustering_coefficients(g), field), nan_ok=True)
    assert set(graph_summary(shuffled)['systemic_core']) == set(graph_summary(g)['systemic_core'])


def test_adding_an_edge_never_lengthens_a_path():
    rng = np.random.default_rng(14)
    upper = np.triu(rng.uniform(size=(10, 10)) < 0.2, 1)
    adjacency = upper | upper.T
    before = distance_matrix(BankGraph(adjacency, 1.0, np.zeros(10)))
    for i, j in zip(*np.nonzero(np.triu(~adjacency, 1))):
        grown = adjacency.copy()
        grown[i, j] = grown[j, i] = True
        after = distance_matrix(BankGraph(grown, 1.0, np.zeros(10)))
        assert np.all(after <= before)
        assert after[i, j] == 1


def test_graph_summary_labels(six_node_weights):
    g = binarize(six_node_weights, adoption=[1, 0, 0, 1, 0, 0])
    summary = graph_summary(g)
    assert summary['nodes'] == 6
    assert summary['adopters'] == 2
    assert all(label.startswith('B') for label in summary['hubs'])
    assert set(summary) >= {'clustering', 'path_lengths', 'systemic_core', 'density'}

####################
##### Coupling #####
####################

def test_coupling_matrix_entries():
    matrix, summary = coupling_matrix(0.3, 0.2, [1, 1, 0], 0.5)
    assert matrix[0, 1] == pytest.approx(0.4)
    assert matrix[0, 2] == pytest.approx(0.3)
    np.testing.assert_array_equal(np.diag(matrix), 1.0)
    assert summary['adopter_pairs'] == 1
    assert summary['adopter_pair_mean'] == pytest.approx(0.4)
    assert summary['other_pair_mean'] == pytest.approx(0.3)


def test_coupling_matrix_overlap_matrix_and_clamp():
    overlap = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.warns(EstimationWarning, match='clamped'):
        matrix, summary = coupling_matrix(0.9, 0.5, [1, 1], overlap)
    assert matrix[0, 1] == 1.0
    assert summary['clamped'] == 2


def test_coupling_matrix_validation():
    with pytest.raises(NetRiskError, match='0/1'):
        coupling_matrix(0.3, 0.2, [1, 2], 0.5)
    with pytest.raises(NetRiskError, match='overlap'):
        coupling_matrix(0.3, 0.2, [1, 0], 1.5)
