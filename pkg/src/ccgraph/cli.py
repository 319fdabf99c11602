"""Command-line entry point: ``ccgraph <subcommand> ...``.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from functools import reduce
from pathlib import Path

from . import corpus, graph, search
from .autodiff import DegenerateVector, ShapeMismatch
from .encoders import BatchTooSmall, EmptyCorpus, EmptyGraph
from .syntax import LexError, ParseError, parse_source

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

DATA_ERRORS = (
    OSError,
    json.JSONDecodeError,
    LexError,
    ParseError,
    graph.SchemaError,
    corpus.MalformedLine,
    corpus.BadFractions,
    search.EmptySplit,
    search.EmptyIndex,
    search.EmptyTestSet,
    search.VocabMismatch,
    EmptyCorpus,
    EmptyGraph,
    BatchTooSmall,
    DegenerateVector,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for data errors here
    def error(self, message):
        raise UsageError(message)


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")


def cmd_extract(args) -> int:
    snippet = parse_source(Path(args.snippet).read_text(encoding="utf-8"))
    sys.stdout.write(graph.graph_to_json(graph.extract_graph(snippet)) + "\n")
    return EXIT_OK


def cmd_stats(args) -> int:
    triplets = corpus.read_triplets(args.triplets)
    total = reduce(lambda a, b: a + b, (graph.stats(t.graph) for t in triplets), graph.GraphStats())
    _emit(dict(total.to_dict(), graphs=len(triplets)))
    return EXIT_OK


def cmd_build_corpus(args) -> int:
    pairs = corpus.read_pairs(args.pairs)
    triplets, report = corpus.build_triplets(pairs, workers=args.workers)
    corpus.write_triplets(triplets, args.out)
    _emit(report.to_dict())
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    if args.n < 1:
        raise UsageError("-n must be at least 1")
    corpus.write_pairs(corpus.generate_synthetic(args.n, args.seed), args.out)
    return EXIT_OK


def cmd_split(args) -> int:
    splits = corpus.split_corpus(corpus.read_triplets(args.triplets), args.train, args.valid, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("train", "valid", "test"):
        corpus.write_triplets(getattr(splits, name), out / f"{name}.jsonl")
    _emit({name: len(getattr(splits, name)) for name in ("train", "valid", "test")})
    return EXIT_OK


def cmd_train(args) -> int:
    try:
        config = search.TrainConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
    except TypeError as exc:
        raise UsageError(f"bad config: {exc}") from None
    if args.out_dir:
        config.out_dir = args.out_dir
    if not (config.train_path and config.out_dir):
        raise UsageError("config needs train_path and out_dir")
    train = corpus.read_triplets(config.train_path)
    valid = corpus.read_triplets(config.valid_path) if config.valid_path else []
    _, metrics = search.train(config, train, valid, config.out_dir)
    _emit(metrics[-1])
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.pool_size < 1:
        raise UsageError("--pool-size must be at least 1")
    model = search.load_model(args.checkpoint)
    result = search.evaluate_mrr(model, corpus.read_triplets(args.test), args.pool_size, args.seed, not args.no_graph)
    _emit(result.to_dict())
    return EXIT_OK


def cmd_search(args) -> int:
    if args.top_k < 1:
        raise UsageError("--top-k must be at least 1")
    model = search.load_model(args.checkpoint)
    index = search.embed_candidates(model, corpus.read_triplets(args.candidates), not args.no_graph)
    ranked = search.rank(index, model.query_vector(args.query))
    _emit(ranked[: args.top_k])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ccgraph", description="Concept graphs and graph-augmented code search.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("extract", help="print the canonical concept graph of a snippet")
    s.add_argument("snippet")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("stats", help="aggregate graph statistics of a triplet file")
    s.add_argument("triplets")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("build-corpus", help="turn code/docstring pairs into triplets")
    s.add_argument("pairs")
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_build_corpus)

    s = sub.add_parser("gen-synthetic", help="write a synthetic pairs file")
    s.add_argument("-n", type=int, default=200)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_gen_synthetic)

    s = sub.add_parser("split", help="seeded train/valid/test split")
    s.add_argument("triplets")
    s.add_argument("--train", type=float, default=0.8)
    s.add_argument("--valid", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--out-dir", required=True)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", help="train from a JSON config")
    s.add_argument("config")
    s.add_argument("-o", "--out-dir")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="MRR over seeded candidate pools")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--pool-size", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-graph", action="store_true", help="rank with code vectors alone")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("search", help="rank candidates for a free-text query")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--candidates", required=True)
    s.add_argument("--query", required=True)
    s.add_argument("--top-k", type=int, default=10)
    s.add_argument("--no-graph", action="store_true")
    s.set_defaults(func=cmd_search)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ShapeMismatch:
        raise  # a defect, not a data problem


if __name__ == "__main__":
    sys.exit(main())
