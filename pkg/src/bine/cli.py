"""Command-line front end for reproducible embedding and evaluation runs.

Every run writes its artifacts plus a manifest recording the effective
configuration, the seed, and a checksum of the input, so a second
invocation with the same flags reproduces the outputs byte for byte.

Exit codes: 0 success, 2 usage or invalid configuration, 3 unreadable or
malformed input, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .centrality import compute_centrality
from .estimators import BipartiteEmbedding, BipartiteMFEmbedding
from .evaluation import (
    EvalReport,
    SplitSpec,
    binary_auc,
    build_lp_instances,
    fit_logistic,
    pair_features,
    split_edges,
)
from .graph import BipartiteGraph, GraphFormatError, load_edge_list, project_second_order
from .trainer import DivergenceError, init_embeddings, write_embeddings
from .walks import WalkConfig, generate_corpus, power_law_slope

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_DIVERGED = 4


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--edges", required=True, help="bipartite edge-list file")
    parser.add_argument("--output", required=True, help="directory for artifacts")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dim", type=int, default=128)


def _add_walk_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-walks", type=int, default=32)
    parser.add_argument("--min-walks", type=int, default=1)
    parser.add_argument("--stop-prob", type=float, default=0.15)
    parser.add_argument("--max-len", type=int, default=100)
    parser.add_argument(
        "--centrality", choices=["hits", "degree"], default="hits"
    )


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    _add_walk_flags(parser)
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--lr", type=float, default=0.025)
    parser.add_argument("--alpha", type=float, default=0.01)
    parser.add_argument("--beta", type=float, default=0.01)
    parser.add_argument(
        "--gamma",
        type=float,
        default=None,
        help="explicit-term weight; defaults to 0.1, or 1 with --task link-prediction",
    )
    parser.add_argument(
        "--task",
        choices=["recommendation", "link-prediction"],
        default="recommendation",
    )
    parser.add_argument("--ns", type=int, default=4)
    parser.add_argument("--ws", type=int, default=5)
    parser.add_argument("--bs", type=int, default=4)
    parser.add_argument("--strategy", choices=["lsh", "freq"], default="lsh")
    parser.add_argument("--lsh-rows", type=int, default=2)
    parser.add_argument("--lsh-bands", type=int, default=8)
    parser.add_argument(
        "--two-step",
        action="store_true",
        help="sample same-side transitions as two bipartite hops (skips the projection)",
    )


def _add_mf_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ws", type=int, default=5)
    parser.add_argument("--ns", type=int, default=4)
    parser.add_argument("--alpha-scale", type=float, default=0.01)
    parser.add_argument("--beta-scale", type=float, default=0.01)
    parser.add_argument("--mode", choices=["svd", "sgd"], default="svd")
    parser.add_argument("--mf-lr", type=float, default=0.005)
    parser.add_argument("--mf-reg", type=float, default=0.01)
    parser.add_argument("--mf-epochs", type=int, default=100)
    parser.add_argument("--lsh-rows", type=int, default=2)
    parser.add_argument("--lsh-bands", type=int, default=8)


def _add_eval_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--folds", type=int, default=10)
    parser.add_argument("--train-fraction", type=float, default=0.6)
    parser.add_argument(
        "--method", choices=["online", "mf", "random"], default="online"
    )
    parser.add_argument("--l2", type=float, default=0.01)
    parser.add_argument("--lp-lr", type=float, default=0.5)
    parser.add_argument("--lp-epochs", type=int, default=500)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument(
        "--candidates", choices=["non-train", "test-pool"], default="non-train"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bine",
        description="Bipartite network embedding: online training, closed-form "
        "factorization, and evaluation harnesses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="learn embeddings by online joint updates")
    _add_common(p)
    _add_train_flags(p)

    p = sub.add_parser("train-mf", help="learn embeddings by block factorization")
    _add_common(p)
    _add_mf_flags(p)

    p = sub.add_parser("eval-lp", help="link-prediction protocol over folds")
    _add_common(p)
    _add_train_flags(p)
    _add_mf_flags_prefixless_guard(p)
    _add_eval_flags(p)

    p = sub.add_parser("eval-rec", help="top-K recommendation protocol over folds")
    _add_common(p)
    _add_train_flags(p)
    _add_mf_flags_prefixless_guard(p)
    _add_eval_flags(p)

    p = sub.add_parser(
        "walk-stats", help="compare degree and corpus frequency power-law slopes"
    )
    _add_common(p)
    _add_walk_flags(p)
    p.add_argument("--ws", type=int, default=5)
    return parser


def _add_mf_flags_prefixless_guard(parser: argparse.ArgumentParser) -> None:
    # eval commands can run either training path; the mf knobs that do not
    # clash with the online ones are added here.
    parser.add_argument("--alpha-scale", type=float, default=0.01)
    parser.add_argument("--beta-scale", type=float, default=0.01)
    parser.add_argument("--mode", choices=["svd", "sgd"], default="svd")
    parser.add_argument("--mf-lr", type=float, default=0.005)
    parser.add_argument("--mf-reg", type=float, default=0.01)
    parser.add_argument("--mf-epochs", type=int, default=100)


def _load_graph(path: str) -> BipartiteGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return load_edge_list(fh)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolved_gamma(args: argparse.Namespace) -> float:
    if args.gamma is not None:
        return args.gamma
    return 1.0 if args.task == "link-prediction" else 0.1


def _write_manifest(args: argparse.Namespace, outdir: Path) -> None:
    config = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("edges", "output")
    }
    manifest = {
        "command": args.command,
        "config": config,
        "edges_file": str(args.edges),
        "input_sha256": _sha256(args.edges),
        "version": __version__,
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _online_estimator(args: argparse.Namespace) -> BipartiteEmbedding:
    return BipartiteEmbedding(
        dim=args.dim,
        epochs=args.epochs,
        learning_rate=args.lr,
        alpha=args.alpha,
        beta=args.beta,
        gamma=_resolved_gamma(args),
        ns=args.ns,
        window=args.ws,
        batch=args.bs,
        strategy=args.strategy,
        max_walks=args.max_walks,
        min_walks=args.min_walks,
        stop_prob=args.stop_prob,
        max_len=args.max_len,
        centrality=args.centrality,
        lsh_rows=args.lsh_rows,
        lsh_bands=args.lsh_bands,
        two_step=args.two_step,
        seed=args.seed,
    )


def _mf_estimator(args: argparse.Namespace) -> BipartiteMFEmbedding:
    return BipartiteMFEmbedding(
        dim=args.dim,
        window=args.ws,
        ns=args.ns,
        alpha_scale=args.alpha_scale,
        beta_scale=args.beta_scale,
        mode=args.mode,
        learning_rate=args.mf_lr,
        reg=args.mf_reg,
        epochs=args.mf_epochs,
        lsh_rows=args.lsh_rows,
        lsh_bands=args.lsh_bands,
        seed=args.seed,
    )


def _dump_embeddings(graph: BipartiteGraph, model, outdir: Path) -> None:
    with open(outdir / "embeddings_u.txt", "w", encoding="utf-8") as fh:
        write_embeddings(model.u_embedding_, graph.u_tokens, fh)
    with open(outdir / "embeddings_v.txt", "w", encoding="utf-8") as fh:
        write_embeddings(model.v_embedding_, graph.v_tokens, fh)


def _embed_for_fold(args: argparse.Namespace, train_graph: BipartiteGraph):
    if args.method == "online":
        return _online_estimator(args).fit(train_graph).embeddings_
    if args.method == "mf":
        return _mf_estimator(args).fit(train_graph).embeddings_
    return init_embeddings(
        train_graph.u_count, train_graph.v_count, args.dim, args.seed
    )


def _cmd_train(args: argparse.Namespace, outdir: Path) -> int:
    graph = _load_graph(args.edges)
    model = _online_estimator(args).fit(graph)
    _dump_embeddings(graph, model, outdir)
    _write_manifest(args, outdir)
    return EXIT_OK


def _cmd_train_mf(args: argparse.Namespace, outdir: Path) -> int:
    graph = _load_graph(args.edges)
    model = _mf_estimator(args).fit(graph)
    _dump_embeddings(graph, model, outdir)
    _write_manifest(args, outdir)
    return EXIT_OK


def _mean_report(reports: list[EvalReport], task: str, config: dict) -> EvalReport:
    names = reports[0].metrics.keys()
    means = {
        name: float(np.mean([r.metrics[name] for r in reports])) for name in names
    }
    return EvalReport(task=task, fold=-1, config=config, metrics=means)


def _echo_config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "output"}


def _cmd_eval_lp(args: argparse.Namespace, outdir: Path) -> int:
    graph = _load_graph(args.edges)
    spec = SplitSpec(args.train_fraction, args.folds, args.seed)
    config = _echo_config(args)
    reports = []
    for fold in range(args.folds):
        train_graph, test_edges = split_edges(graph, spec, fold)
        emb = _embed_for_fold(args, train_graph)
        train_pairs, train_labels = build_lp_instances(
            graph, train_graph.edges, seed=args.seed * 1000 + 2 * fold
        )
        scorer = fit_logistic(
            pair_features(emb, train_pairs),
            train_labels,
            l2=args.l2,
            lr=args.lp_lr,
            epochs=args.lp_epochs,
        )
        test_pairs, test_labels = build_lp_instances(
            graph, test_edges, seed=args.seed * 1000 + 2 * fold + 1
        )
        auc_roc, auc_pr = binary_auc(
            scorer.scores(pair_features(emb, test_pairs)), test_labels
        )
        report = EvalReport(
            task="link_prediction",
            fold=fold,
            config=config,
            metrics={"auc_roc": auc_roc, "auc_pr": auc_pr},
        )
        reports.append(report)
        (outdir / f"report_fold_{fold}.json").write_text(
            report.to_json() + "\n", encoding="utf-8"
        )
    mean = _mean_report(reports, "link_prediction", config)
    (outdir / "report_mean.json").write_text(mean.to_json() + "\n", encoding="utf-8")
    _write_manifest(args, outdir)
    print(json.dumps(mean.metrics, sort_keys=True))
    return EXIT_OK


def _cmd_eval_rec(args: argparse.Namespace, outdir: Path) -> int:
    from .evaluation import topk_metrics

    graph = _load_graph(args.edges)
    spec = SplitSpec(args.train_fraction, args.folds, args.seed)
    config = _echo_config(args)
    reports = []
    for fold in range(args.folds):
        train_graph, test_edges = split_edges(graph, spec, fold)
        emb = _embed_for_fold(args, train_graph)
        report = topk_metrics(
            emb,
            train_graph,
            test_edges,
            k=args.k,
            fold=fold,
            config=config,
            candidates=args.candidates,
        )
        reports.append(report)
        (outdir / f"report_fold_{fold}.json").write_text(
            report.to_json() + "\n", encoding="utf-8"
        )
    mean = _mean_report(reports, "recommendation", config)
    (outdir / "report_mean.json").write_text(mean.to_json() + "\n", encoding="utf-8")
    _write_manifest(args, outdir)
    print(json.dumps(mean.metrics, sort_keys=True))
    return EXIT_OK


def _cmd_walk_stats(args: argparse.Namespace, outdir: Path) -> int:
    graph = _load_graph(args.edges)
    walk_config = WalkConfig(
        max_walks=args.max_walks,
        min_walks=args.min_walks,
        stop_prob=args.stop_prob,
        max_len=args.max_len,
        seed=args.seed,
    )
    cent_u, cent_v = compute_centrality(graph, method=args.centrality)
    frequencies: list[int] = []
    for side, cent in (("U", cent_u), ("V", cent_v)):
        projection = project_second_order(graph, side)
        corpus = generate_corpus(projection, cent, walk_config)
        n = graph.u_count if side == "U" else graph.v_count
        visits = np.zeros(n, dtype=np.int64)
        for seq in corpus.sequences:
            visits += np.bincount(np.asarray(seq), minlength=n)
        frequencies.extend(int(x) for x in visits[visits > 0])
    degrees = [
        int(d)
        for d in np.concatenate(
            [
                np.diff(graph.weight_matrix.indptr),
                np.diff(graph.weight_matrix.tocsc().indptr),
            ]
        )
        if d > 0
    ]
    degree_slope = power_law_slope(degrees)
    corpus_slope = power_law_slope(frequencies)
    stats = {
        "degree_slope": degree_slope,
        "corpus_slope": corpus_slope,
        "abs_slope_difference": abs(degree_slope - corpus_slope),
        "n_corpus_vertices": len(frequencies),
        "n_graph_vertices": len(degrees),
    }
    (outdir / "walk_stats.json").write_text(
        json.dumps(stats, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    _write_manifest(args, outdir)
    print(json.dumps(stats, sort_keys=True))
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "train-mf": _cmd_train_mf,
    "eval-lp": _cmd_eval_lp,
    "eval-rec": _cmd_eval_rec,
    "walk-stats": _cmd_walk_stats,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    outdir = Path(args.output)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](args, outdir)
    except (GraphFormatError, OSError) as exc:
        print(f"bine: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DivergenceError, ArithmeticError) as exc:
        print(f"bine: numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as exc:
        print(f"bine: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
