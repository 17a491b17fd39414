# Network topology of the bank graph
from .graph import BankGraph, binarize, default_threshold, hubs, systemic_core, edge_list
from .statistics import (ClusteringSummary, PathLengthSummary, clustering_coefficients, path_lengths,
                         distance_matrix, graph_summary)
from .coupling import coupling_matrix
