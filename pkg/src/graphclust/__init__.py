"""Supervised graph clustering via vertex confidence and edge
connectivity estimation.

Build a KNN affinity graph over feature vectors, regress per-vertex
confidence and per-edge connectivity with small graph convolutional
networks, link each vertex to higher-confidence neighbors, and score
the resulting clusters with pairwise and BCubed F-measures.
"""

from .confidence import ConfidenceVector, confidence_variant, \
    ground_truth_confidence, predict_confidence, read_confidence, \
    train_gcnv, write_confidence, write_confidence_text
from .connectivity import CandidateSet, ConnectivityPrediction, Subgraph, \
    build_subgraph, candidate_set, ground_truth_connectivity, \
    predict_connectivity, read_connectivity_text, select_top_rho, \
    train_gcne, write_connectivity_text
from .data import generate_synthetic, read_features, read_labels, \
    write_features, write_labels
from .gcn import ForwardCache, GcnGradients, GcnModel, TrainConfig, \
    gcn_backward, gcn_forward, load_model, mse_loss, mse_loss_grad, \
    save_model, sgd_step
from .graph import KnnGraph, add_self_loops_and_normalize, build_knn_graph, \
    normalized_adjacency, read_graph, rebuild_graph, write_graph
from .metrics import ScoreReport, bcubed_fscore, pairwise_fscore, \
    score_clustering
from .partition import ClusterAssignment, LinkChoice, UnionFind, \
    choose_links, extract_clusters, write_clusters
from .pipeline import PipelineConfig, PipelineStageError, \
    config_from_mapping, parse_config_file, run_pipeline, stage_seed
from .tensor import SparseAdjacency, concat_cols, dense_matmul, \
    l2_normalize_rows, relu, spmm

__version__ = "0.1.0"
