"""Command-line interface exposing every pipeline stage.

Each stage reads/writes the package's file formats, so runs can be
scripted, resumed and inspected step by step:

    synth -> build-graph -> train-v -> infer-v -> [train-e -> infer-e]
          -> partition -> evaluate

or end to end with `run`. All stages are deterministic for a fixed
seed.
"""

from __future__ import annotations

import argparse
import sys

from . import confidence as conf_mod
from . import connectivity as conn_mod
from . import data as data_mod
from . import gcn as gcn_mod
from . import graph as graph_mod
from . import metrics as metrics_mod
from . import partition as part_mod
from . import pipeline as pipe_mod
from .tensor import l2_normalize_rows


def _add_train_flags(p, default_epochs):
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=1e-5)
    p.add_argument("--epochs", type=int, default=default_epochs)
    p.add_argument("--seed", type=int, default=0)


def _train_config(args):
    return gcn_mod.TrainConfig(learning_rate=args.learning_rate,
                               momentum=args.momentum,
                               weight_decay=args.weight_decay,
                               epochs=args.epochs, seed=args.seed)


def _load_features(path):
    return l2_normalize_rows(data_mod.read_features(path))


def cmd_synth(args):
    feats, labels = data_mod.generate_synthetic(
        args.classes, args.points_per_class, args.dim, args.noise_sigma,
        seed=args.seed)
    data_mod.write_features(feats, args.features_out)
    data_mod.write_labels(labels, args.labels_out)
    print(f"wrote {feats.shape[0]}x{feats.shape[1]} features and "
          f"{args.classes} classes")
    return 0


def cmd_build_graph(args):
    feats = _load_features(args.features)
    g = graph_mod.build_knn_graph(feats, args.k)
    graph_mod.write_graph(g, args.graph_out)
    print(f"wrote graph: n={g.n} k={g.k} nnz={g.adjacency.nnz}")
    return 0


def cmd_train_v(args):
    feats = _load_features(args.features)
    labels = data_mod.read_labels(args.labels)
    g = graph_mod.read_graph(args.graph)
    targets = conf_mod.confidence_variant(
        g, labels=labels, features=feats, kind=args.confidence_kind,
        radius=args.confidence_radius)
    d = feats.shape[1]
    model = gcn_mod.GcnModel.init(d, [d] * args.layers, seed=args.seed)
    _, history = conf_mod.train_gcnv(model, graph_mod.normalized_adjacency(g),
                                     feats, targets, _train_config(args))
    gcn_mod.save_model(model, args.model_out)
    print(f"trained confidence model: first-epoch loss {history[0]:.6f}, "
          f"last-epoch loss {history[-1]:.6f}")
    return 0


def cmd_infer_v(args):
    feats = _load_features(args.features)
    g = graph_mod.read_graph(args.graph)
    model = gcn_mod.load_model(args.model)
    conf, emb = conf_mod.predict_confidence(
        model, graph_mod.normalized_adjacency(g), feats)
    conf_mod.write_confidence(conf, args.confidence_out)
    if args.embeddings_out:
        data_mod.write_features(emb, args.embeddings_out)
    print(f"wrote {len(conf)} confidence values")
    return 0


def cmd_train_e(args):
    feats = _load_features(args.features)
    labels = data_mod.read_labels(args.labels)
    g = graph_mod.read_graph(args.graph)
    conf = conf_mod.ground_truth_confidence(g, labels)
    dataset = []
    for i in range(g.n):
        cand = conn_mod.candidate_set(i, g, conf)
        if len(cand) == 0:
            continue
        sub = conn_mod.build_subgraph(cand, g, feats)
        dataset.append((sub, conn_mod.ground_truth_connectivity(cand, labels)))
    d = feats.shape[1]
    model = gcn_mod.GcnModel.init(d, [d] * args.layers, seed=args.seed)
    _, history = conn_mod.train_gcne(model, dataset, _train_config(args))
    gcn_mod.save_model(model, args.model_out)
    print(f"trained connectivity model on {len(dataset)} subgraphs: "
          f"first-epoch loss {history[0]:.6f}, last-epoch loss "
          f"{history[-1]:.6f}")
    return 0


def cmd_infer_e(args):
    feats = _load_features(args.features)
    g = graph_mod.read_graph(args.graph)
    model = gcn_mod.load_model(args.model)
    conf = conf_mod.read_confidence(args.confidence)
    rho_ids = conn_mod.select_top_rho(conf, args.rho)
    preds = []
    for i in rho_ids:
        cand = conn_mod.candidate_set(int(i), g, conf)
        if len(cand) == 0:
            continue
        preds.append(conn_mod.predict_connectivity(model, cand, g, feats))
    conn_mod.write_connectivity_text(preds, args.predictions_out)
    print(f"wrote connectivity for {len(preds)} centers")
    return 0


def cmd_partition(args):
    g = graph_mod.read_graph(args.graph)
    conf = conf_mod.read_confidence(args.confidence)
    preds = None
    rho_ids = None
    if args.predictions:
        preds = conn_mod.read_connectivity_text(args.predictions)
        rho_ids = sorted(preds)
    links = part_mod.choose_links(g, conf, preds=preds, rho_set=rho_ids,
                                  m=args.m, tau=args.tau)
    assignment = part_mod.extract_clusters(links, g.n)
    part_mod.write_clusters(assignment, args.clusters_out)
    print(f"wrote {assignment.num_clusters} clusters over {g.n} vertices")
    return 0


def cmd_evaluate(args):
    pred = data_mod.read_labels(args.pred)
    gt = data_mod.read_labels(args.gt)
    report = metrics_mod.score_clustering(pred, gt)
    print(report.to_table())
    print(report.to_record())
    if args.report_out:
        with open(args.report_out, "w") as fh:
            fh.write(report.to_record() + "\n")
    return 0


def cmd_run(args):
    mapping = {}
    if args.config:
        mapping.update(pipe_mod.parse_config_file(args.config))
    for key in ("k", "tau", "rho", "m", "gcnv_layers", "gcne_layers",
                "confidence_kind", "confidence_radius", "seed",
                "learning_rate", "momentum", "weight_decay", "gcnv_epochs",
                "gcne_epochs"):
        value = getattr(args, key)
        if value is not None:
            mapping[key] = value
    cfg = pipe_mod.config_from_mapping(mapping)
    feats_train = data_mod.read_features(args.train_features)
    labels_train = data_mod.read_labels(args.train_labels)
    feats_test = data_mod.read_features(args.test_features)
    labels_test = data_mod.read_labels(args.test_labels) \
        if args.test_labels else None
    assignment, report = pipe_mod.run_pipeline(
        cfg, feats_train, labels_train, feats_test, labels_test)
    part_mod.write_clusters(assignment, args.clusters_out)
    print(f"wrote {assignment.num_clusters} clusters over "
          f"{assignment.labels.size} vertices")
    if report is not None:
        print(report.to_table())
        print(report.to_record())
        if args.report_out:
            with open(args.report_out, "w") as fh:
                fh.write(report.to_record() + "\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="graphclust",
        description="Supervised graph clustering via vertex confidence "
                    "and edge connectivity.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic sphere blobs")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--points-per-class", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--noise-sigma", type=float, default=0.08)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--features-out", required=True)
    p.add_argument("--labels-out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build-graph", help="build the KNN affinity graph")
    p.add_argument("--features", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--graph-out", required=True)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("train-v", help="train the confidence regressor")
    p.add_argument("--graph", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--confidence-kind", default="s_nbr",
                   choices=["s_nbr", "s_avg", "s_center"])
    p.add_argument("--confidence-radius", type=float, default=None)
    p.add_argument("--layers", type=int, default=1)
    _add_train_flags(p, default_epochs=200)
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=cmd_train_v)

    p = sub.add_parser("infer-v", help="predict vertex confidence")
    p.add_argument("--graph", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--confidence-out", required=True)
    p.add_argument("--embeddings-out", default=None,
                   help="also write final-layer embeddings as a feature file")
    p.set_defaults(func=cmd_infer_v)

    p = sub.add_parser("train-e", help="train the connectivity regressor")
    p.add_argument("--graph", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--layers", type=int, default=4)
    _add_train_flags(p, default_epochs=80)
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=cmd_train_e)

    p = sub.add_parser("infer-e", help="predict edge connectivity for the "
                                       "most confident vertices")
    p.add_argument("--graph", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--confidence", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--predictions-out", required=True)
    p.set_defaults(func=cmd_infer_e)

    p = sub.add_parser("partition", help="link vertices and extract clusters")
    p.add_argument("--graph", required=True)
    p.add_argument("--confidence", required=True)
    p.add_argument("--predictions", default=None,
                   help="connectivity triples from infer-e")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--tau", type=float, default=0.8)
    p.add_argument("--clusters-out", required=True)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("evaluate", help="score clusters against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report-out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="run the whole pipeline")
    p.add_argument("--train-features", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--test-features", required=True)
    p.add_argument("--test-labels", default=None)
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--gcnv-layers", type=int, default=None)
    p.add_argument("--gcne-layers", type=int, default=None)
    p.add_argument("--confidence-kind", default=None,
                   choices=list(pipe_mod.PIPELINE_CONFIDENCE_KINDS))
    p.add_argument("--confidence-radius", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--gcnv-epochs", type=int, default=None)
    p.add_argument("--gcne-epochs", type=int, default=None)
    p.add_argument("--clusters-out", required=True)
    p.add_argument("--report-out", default=None)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, pipe_mod.PipelineStageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
