"""End-to-end clustering pipeline and its configuration record.

Stages: build the KNN graph, train the confidence regressor on the
labeled split, predict confidence on the unlabeled split (optionally
rebuilding the graph from the learned embeddings), train/apply the
connectivity regressor on the most confident fraction, then link
vertices upward in confidence and read off connected components.

Training and test label spaces are expected to be disjoint (open-set
protocol); nothing in the pipeline ever matches class ids across the
two splits.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .confidence import ConfidenceVector, GROUND_TRUTH, confidence_variant, \
    ground_truth_confidence, predict_confidence, train_gcnv
from .connectivity import candidate_set, build_subgraph, \
    ground_truth_connectivity, predict_connectivity, select_top_rho, train_gcne
from .gcn import GcnModel, TrainConfig
from .graph import build_knn_graph, normalized_adjacency, rebuild_graph
from .metrics import score_clustering
from .partition import choose_links, extract_clusters
from .tensor import l2_normalize_rows

PIPELINE_CONFIDENCE_KINDS = ("u_num", "u_weight", "s_avg", "s_center",
                             "s_nbr", "s_nbr_f")


@dataclass(frozen=True)
class PipelineConfig:
    """All knobs of one clustering run, validated on construction."""

    k: int = 10
    tau: float = 0.8
    rho: float = 0.0
    m: int = 1
    gcnv_layers: int = 1
    gcne_layers: int = 4
    train: TrainConfig = field(default_factory=TrainConfig)
    gcne_epochs: int = 80
    confidence_kind: str = "s_nbr"
    confidence_radius: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not -1.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [-1, 1], got {self.tau}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.gcnv_layers < 1 or self.gcne_layers < 1:
            raise ValueError("layer counts must be at least 1")
        if self.gcne_epochs < 1:
            raise ValueError("gcne_epochs must be at least 1")
        if self.confidence_kind not in PIPELINE_CONFIDENCE_KINDS:
            raise ValueError(
                f"unknown confidence kind {self.confidence_kind!r}")
        if self.confidence_kind.startswith("u_") and \
                self.confidence_radius is None:
            raise ValueError(f"{self.confidence_kind} needs confidence_radius")


def stage_seed(seed, name):
    """Stable per-stage sub-seed derived from the master seed."""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class PipelineStageError(RuntimeError):
    """Raised when a pipeline stage fails; carries the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"pipeline stage '{stage}' failed: {cause}")
        self.stage = stage


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineStageError):
            raise PipelineStageError(self.name, exc) from exc
        return False


def run_pipeline(cfg, features_train, labels_train, features_test,
                 labels_test=None):
    """Cluster the test split using supervision from the train split.

    Returns (ClusterAssignment, ScoreReport or None). ``rho == 0`` skips
    the connectivity model entirely (confidence-only mode).
    """
    kind = cfg.confidence_kind
    supervised = kind.startswith("s_")
    with _Stage("normalize-features"):
        feats_test = l2_normalize_rows(features_test)
        feats_train = l2_normalize_rows(features_train) if supervised \
            or cfg.rho > 0 else None
        if feats_train is not None and labels_train is None:
            raise ValueError("training labels are required")

    with _Stage("build-test-graph"):
        g_test = build_knn_graph(feats_test, cfg.k)

    g_train = None
    if feats_train is not None:
        with _Stage("build-train-graph"):
            g_train = build_knn_graph(feats_train, cfg.k)

    model_v = None
    if supervised:
        with _Stage("confidence-targets"):
            target_kind = "s_nbr" if kind == "s_nbr_f" else kind
            targets = confidence_variant(g_train, labels=labels_train,
                                         features=feats_train,
                                         kind=target_kind)
        with _Stage("train-gcnv"):
            d = feats_train.shape[1]
            model_v = GcnModel.init(d, [d] * cfg.gcnv_layers,
                                    seed=stage_seed(cfg.seed, "gcnv-init"))
            train_gcnv(model_v, normalized_adjacency(g_train), feats_train,
                       targets, cfg.train)
        with _Stage("predict-confidence"):
            conf_test, emb_test = predict_confidence(
                model_v, normalized_adjacency(g_test), feats_test)
    else:
        with _Stage("compute-confidence"):
            conf_test = confidence_variant(g_test, features=feats_test,
                                           kind=kind,
                                           radius=cfg.confidence_radius)
            conf_test = ConfidenceVector(conf_test.values, "predicted")

    if kind == "s_nbr_f":
        with _Stage("rebuild-graphs"):
            g_test = rebuild_graph(emb_test, cfg.k)
            if cfg.rho > 0:
                _, emb_train = predict_confidence(
                    model_v, normalized_adjacency(g_train), feats_train)
                g_train = rebuild_graph(emb_train, cfg.k)

    preds = None
    rho_ids = None
    if cfg.rho > 0:
        with _Stage("gcne-training-data"):
            conf_train = ground_truth_confidence(g_train, labels_train)
            dataset = []
            for i in range(g_train.n):
                cand = candidate_set(i, g_train, conf_train)
                if len(cand) == 0:
                    continue
                sub = build_subgraph(cand, g_train, feats_train)
                dataset.append((sub, ground_truth_connectivity(
                    cand, labels_train)))
        with _Stage("train-gcne"):
            d = feats_train.shape[1]
            model_e = GcnModel.init(d, [d] * cfg.gcne_layers,
                                    seed=stage_seed(cfg.seed, "gcne-init"))
            cfg_e = replace(cfg.train, epochs=cfg.gcne_epochs,
                            seed=stage_seed(cfg.seed, "gcne-batches"))
            train_gcne(model_e, dataset, cfg_e)
        with _Stage("predict-connectivity"):
            rho_ids = select_top_rho(conf_test, cfg.rho)
            preds = {}
            for i in rho_ids:
                cand = candidate_set(int(i), g_test, conf_test)
                if len(cand) == 0:
                    continue
                preds[int(i)] = predict_connectivity(model_e, cand, g_test,
                                                     feats_test)

    with _Stage("choose-links"):
        links = choose_links(g_test, conf_test, preds=preds, rho_set=rho_ids,
                             m=cfg.m, tau=cfg.tau)
    with _Stage("extract-clusters"):
        assignment = extract_clusters(links, g_test.n)

    report = None
    if labels_test is not None:
        with _Stage("score"):
            report = score_clustering(assignment, labels_test)
    return assignment, report


_INT_KEYS = ("k", "m", "gcnv_layers", "gcne_layers", "gcne_epochs",
             "gcnv_epochs", "seed")
_FLOAT_KEYS = ("tau", "rho", "confidence_radius", "learning_rate",
               "momentum", "weight_decay")
_STR_KEYS = ("confidence_kind",)


def parse_config_file(path):
    """Read `key=value` lines (# starts a comment) into a dict."""
    mapping = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(
                    f"{path}: line {lineno}: expected key=value, got {raw!r}")
            key, value = line.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping


def config_from_mapping(mapping):
    """Build a PipelineConfig from string or typed values."""
    values = {}
    train_kwargs = {}
    for key, raw in mapping.items():
        if raw is None:
            continue
        if key in _INT_KEYS:
            value = int(raw)
        elif key in _FLOAT_KEYS:
            value = float(raw)
        elif key in _STR_KEYS:
            value = str(raw)
        else:
            raise ValueError(f"unknown config key {key!r}")
        if key == "gcnv_epochs":
            train_kwargs["epochs"] = value
        elif key in ("learning_rate", "momentum", "weight_decay"):
            train_kwargs[key] = value
        else:
            values[key] = value
    cfg = PipelineConfig(train=TrainConfig(**train_kwargs), **values)
    return cfg
