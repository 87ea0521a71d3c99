"""Adversarial edge dropping for graph neural networks.

Trains an edge predictor on the line graph of the input, perturbs its
output adversarially within an l-infinity ball, and drops the edges the
perturbed predictor rejects while a downstream GCN learns on the corrupted
graph. The package ships the full training loop, uniform-dropping and plain
baselines, synthetic benchmark generation, structural attack evaluation,
and a deterministic experiment harness.
"""

from .adversary import (CorruptedAdjacency, EdgeMask, Perturbation,
                        compute_mask, corrupt_adjacency, init_edge_predictor,
                        init_perturbation, keep_probabilities,
                        line_graph_loss, pgd_step, predict_edges)
from .backbone import (GcnParams, accuracy, classification_loss, gcn_forward,
                       init_gcn_params)
from .errors import ContractError, ParseError, ShapeError
from .experiments import (AttackComparison, RetrainComparison, attack_eval,
                          best_epoch_stats, execute_baseline_run,
                          execute_run, report, retrain_on_learned_graph,
                          run_baseline, sweep_mu)
from .graphs import (Graph, LabelSplit, graph_from_edges, load_features,
                     load_graph, load_labels, load_splits,
                     normalize_adjacency, save_edges)
from .kernels import BACKEND
from .linegraph import (LineGraph, LineGraphFeatures, build_line_graph,
                        init_features, truncated_svd_embed, update_features)
from .sparse import CsrMatrix, csr_from_coo, identity_csr
from .supervision import (EdgeSimilarity, PreDropMask, SupervisionSignal,
                          build_supervision, gaussian_similarity, pre_drop)
from .synthetic import SbmSpec, attack_graph, gen_sbm
from .trainer import (MetricsRecord, TrainConfig, TrainState, evaluate,
                      export_learned_graph, train, write_metrics)

__version__ = "0.1.0"

__all__ = [
    "AttackComparison", "BACKEND", "ContractError", "CorruptedAdjacency",
    "CsrMatrix", "EdgeMask", "EdgeSimilarity", "GcnParams", "Graph",
    "LabelSplit", "LineGraph", "LineGraphFeatures", "MetricsRecord",
    "ParseError", "Perturbation", "PreDropMask", "RetrainComparison",
    "SbmSpec", "ShapeError", "SupervisionSignal", "TrainConfig",
    "TrainState", "accuracy", "attack_eval", "attack_graph",
    "best_epoch_stats", "build_line_graph", "build_supervision",
    "classification_loss", "compute_mask", "corrupt_adjacency",
    "csr_from_coo", "evaluate", "execute_baseline_run", "execute_run",
    "export_learned_graph", "gaussian_similarity", "gcn_forward", "gen_sbm",
    "graph_from_edges", "identity_csr", "init_edge_predictor",
    "init_features", "init_gcn_params", "init_perturbation",
    "keep_probabilities", "line_graph_loss", "load_features", "load_graph",
    "load_labels", "load_splits", "normalize_adjacency", "pgd_step",
    "pre_drop", "predict_edges", "report", "retrain_on_learned_graph",
    "run_baseline", "save_edges", "sweep_mu", "train",
    "truncated_svd_embed", "update_features", "write_metrics",
]
