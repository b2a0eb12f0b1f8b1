"""Command-line surface: one verb per pipeline stage, composed via files.

Subcommands: synth, ingest-check, train-topics, assign, build-index,
retrieve, evaluate, sweep-t.  Results go to --out (or stdout); errors go to
stderr as a single line ``error: <code>: <message>`` with a nonzero exit.
All randomness is controlled by --seed, so identical inputs give
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiment, synth
from .corpus import load_corpus, load_queries, write_corpus, write_queries
from .embeddings import load_embeddings, validate_alignment, write_embeddings
from .errors import EngineError, ValidationError
from .index import (
    build_index,
    load_index,
    read_rankings,
    retrieve,
    save_index,
    split_by_assignment,
    write_rankings,
)
from .topics import (
    TrainConfig,
    assign_corpus,
    load_distributions,
    load_topic_model,
    save_topic_model,
    train_topics,
    weights_from_file,
    weights_from_model,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # single machine-parseable line
        raise EngineError(f"usage: {message}")


def _read_config_file(path: str) -> dict[str, str]:
    """Plain key=value lines; '#' starts a comment; flags override these."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}: line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _find_config_path(argv: list[str]) -> str | None:
    for i, arg in enumerate(argv):
        if arg == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
    return None


def _apply_config(
    subparser: argparse.ArgumentParser, config_path: str
) -> None:
    """Install config-file values as subcommand defaults; flags still win."""
    overrides = _read_config_file(config_path)
    actions = {a.dest: a for a in subparser._actions}
    defaults: dict[str, object] = {}
    for key, raw in overrides.items():
        if key not in actions or key == "config":
            raise ValidationError(f"unknown config key {key!r}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in {"1", "true", "yes", "on"}
        elif action.type is not None:
            try:
                defaults[key] = action.type(raw)
            except ValueError:
                raise ValidationError(f"config key {key!r}: bad value {raw!r}") from None
        else:
            defaults[key] = raw
        action.required = False  # a config value satisfies a required flag
    subparser.set_defaults(**defaults)


def _write_text(out: str | None, text: str) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        max_iters=args.max_iters,
        tolerance=args.tolerance,
        seed=args.seed,
        temperature=args.temperature,
    )


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = synth.SyntheticSpec(
        true_T=args.true_t,
        passages_per_topic=args.passages_per_topic,
        dim=args.dim,
        noise_sigma=args.noise_sigma,
        queries_per_topic=args.queries_per_topic,
        vocab_per_topic=args.vocab_per_topic,
        seed=args.seed,
        encoder_gain_ratio=args.gain_ratio,
    )
    data = synth.generate_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(data.corpus, out / "corpus.jsonl")
    write_embeddings(data.passage_emb, out / "passages.emb")
    write_queries(list(data.queries), out / "queries.jsonl")
    write_embeddings(data.query_emb, out / "queries.emb")
    (out / "planted_assignment.json").write_text(
        json.dumps(data.assignment, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote synthetic dataset ({len(data.corpus)} passages,"
          f" {len(data.queries)} queries) to {out}")
    return 0


def _cmd_ingest_check(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    emb = load_embeddings(args.emb)
    report = validate_alignment(corpus, emb)
    payload = report.to_dict()
    payload["passages"] = len(corpus)
    payload["pages"] = len(corpus.pages)
    payload["dim"] = emb.dim
    _write_text(args.out, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    if not report.aligned:
        print(
            f"error: alignment: {len(report.missing_embeddings)} missing,"
            f" {len(report.extraneous_ids)} extraneous",
            file=sys.stderr,
        )
        return 1
    return 0


def _cmd_train_topics(args: argparse.Namespace) -> int:
    emb = load_embeddings(args.emb)
    model = train_topics(emb, args.t, _train_config(args))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_topic_model(model, args.out)
    print(f"trained T={model.T} on {model.trained_on} vectors -> {args.out}")
    return 0


def _cmd_assign(args: argparse.Namespace) -> int:
    model = load_topic_model(args.model)
    emb = load_embeddings(args.emb)
    assignment = assign_corpus(model, emb)
    _write_text(args.out, json.dumps(assignment, sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_build_index(args: argparse.Namespace) -> int:
    if bool(args.model) == bool(args.assignment):
        raise ValidationError("exactly one of --model / --assignment is required")
    corpus = load_corpus(args.corpus)
    emb = load_embeddings(args.emb)
    if args.model:
        model = load_topic_model(args.model)
        t = model.T
        assignment = assign_corpus(model, emb)
    else:
        assignment = {
            str(k): int(v)
            for k, v in json.loads(Path(args.assignment).read_text(encoding="utf-8")).items()
        }
        t = max(assignment.values()) + 1 if assignment else 0
    index = build_index(corpus, split_by_assignment(emb, assignment, t))
    save_index(index, args.out, corpus.content_hash())
    report = index.build_report()
    print(f"built index: T={index.T}, dim={index.dim}, sizes={list(report.shard_sizes)}")
    if report.empty_topic_ids:
        print(f"warning: empty shards for topics {list(report.empty_topic_ids)}", file=sys.stderr)
    return 0


def _cmd_retrieve(args: argparse.Namespace) -> int:
    if bool(args.model) == bool(args.distributions):
        raise ValidationError("exactly one of --model / --distributions is required")
    index, _ = load_index(args.index)
    queries = load_queries(args.queries)
    query_emb = load_embeddings(args.emb)
    if args.model:
        provider = weights_from_model(load_topic_model(args.model))
    else:
        provider = weights_from_file(load_distributions(args.distributions, index.T))
    results = []
    for q in queries:
        vector = query_emb.row(q.id)
        w = provider(q.id, vector)
        results.append((q.id, retrieve(index, vector, w, args.k)))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_rankings(args.out, results)
    print(f"retrieved top-{args.k} for {len(results)} queries -> {args.out}")
    return 0


def _parse_metrics(raw: str) -> tuple[list[str], int]:
    """'r@5,p@1,f1,kilt-f1' -> (metric names, recall cutoff)."""
    metrics: list[str] = []
    recall_k = 5
    for token in raw.split(","):
        token = token.strip().lower().replace("-", "_")
        if not token:
            continue
        if token.startswith("r@"):
            try:
                recall_k = int(token[2:])
            except ValueError:
                raise ValidationError(f"bad metric token {token!r}") from None
            metrics.append("r@k")
        elif token in ("p@1", "f1", "kilt_f1"):
            metrics.append(token)
        else:
            raise ValidationError(f"unknown metric {token!r}")
    if not metrics:
        raise ValidationError("no metrics requested")
    return metrics, recall_k


def _cmd_evaluate(args: argparse.Namespace) -> int:
    metrics, recall_k = _parse_metrics(args.metrics)
    corpus = load_corpus(args.corpus)
    queries = load_queries(args.queries)
    rankings = read_rankings(args.retrievals)
    ranked_ids = {qid: [s.passage_id for s in ranked] for qid, ranked in rankings.items()}
    report = experiment.score_rankings(corpus, queries, ranked_ids, metrics, recall_k)
    _write_text(args.out, report.to_json())
    if args.out:
        print(report.render_table())
    return 0


def _cmd_sweep_t(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    train_emb = load_embeddings(args.emb)
    val_queries = load_queries(args.val_queries)
    val_emb = load_embeddings(args.val_emb)
    test_queries = load_queries(args.test_queries)
    test_emb = load_embeddings(args.test_emb)
    results = []
    for run in range(args.runs):
        config = TrainConfig(
            max_iters=args.max_iters,
            tolerance=args.tolerance,
            seed=args.seed + run,
            temperature=args.temperature,
        )
        results.append(
            experiment.sweep_T(
                corpus,
                train_emb,
                val_queries,
                val_emb,
                test_queries,
                test_emb,
                args.t_min,
                args.t_max,
                config,
                k_retrieve=args.k,
                verify_oracle=args.verify_oracle,
            )
        )
    aggregate = experiment.aggregate_sweeps(results)
    _write_text(args.out, experiment.sweep_to_json(aggregate))
    if args.out:
        print(aggregate.mean.render_table())
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="optional key=value config file; flags override")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="topicshard", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    by_name: dict[str, argparse.ArgumentParser] = {}

    p = by_name["synth"] = sub.add_parser(
        "synth", help="generate a planted synthetic dataset"
    )
    _add_common(p)
    p.add_argument("--true-t", type=int, default=4)
    p.add_argument("--passages-per-topic", type=int, default=50)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--noise-sigma", type=float, default=0.05)
    p.add_argument("--queries-per-topic", type=int, default=20)
    p.add_argument("--vocab-per-topic", type=int, default=30)
    p.add_argument("--gain-ratio", type=float, default=1.4)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = by_name["ingest-check"] = sub.add_parser("ingest-check", help="validate corpus/embedding alignment")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_ingest_check)

    p = by_name["train-topics"] = sub.add_parser("train-topics", help="train the spherical k-means topic model")
    _add_common(p)
    p.add_argument("--emb", required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_topics)

    p = by_name["assign"] = sub.add_parser("assign", help="hard-assign vectors to topics")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_assign)

    p = by_name["build-index"] = sub.add_parser("build-index", help="split by topic and build the sharded index")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--model")
    p.add_argument("--assignment", help="JSON id->topic map (alternative to --model)")
    p.add_argument("--out", required=True, help="index directory")
    p.set_defaults(func=_cmd_build_index)

    p = by_name["retrieve"] = sub.add_parser("retrieve", help="weighted top-K retrieval for a query file")
    _add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--emb", required=True, help="query embeddings (EMB1)")
    p.add_argument("--model")
    p.add_argument("--distributions", help="external topic distributions (JSONL)")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_retrieve)

    p = by_name["evaluate"] = sub.add_parser("evaluate", help="score a retrieval output file")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--retrievals", required=True, help="output of the retrieve subcommand")
    p.add_argument("--metrics", default="r@5")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_evaluate)

    p = by_name["sweep-t"] = sub.add_parser("sweep-t", help="sweep T and pick the best by validation R@5")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--val-queries", required=True)
    p.add_argument("--val-emb", required=True)
    p.add_argument("--test-queries", required=True)
    p.add_argument("--test-emb", required=True)
    p.add_argument("--t-min", type=int, default=1)
    p.add_argument("--t-max", type=int, required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--verify-oracle", action="store_true",
                   help="check retrieve against the exhaustive oracle per query")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep_t)

    return parser, by_name


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, by_name = build_parser()
    try:
        config_path = _find_config_path(argv)
        if config_path is not None and argv and argv[0] in by_name:
            _apply_config(by_name[argv[0]], config_path)
        args = parser.parse_args(argv)
        return args.func(args)
    except EngineError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
