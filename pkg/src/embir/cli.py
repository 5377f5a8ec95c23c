"""``embir`` command line: index, search, expand-run, awe-run,
affect-score, eval, and batch experiment execution.

Exit codes: 0 success, 1 usage error (bad flags, unknown formats,
missing paths), 2 data error (malformed inputs, corrupt index, ...).
Every run file gets a ``.meta`` sidecar with the tag, the canonical
experiment configuration and its hash; run files themselves stay
bit-standard TREC format.
"""

import argparse
import concurrent.futures
import json
import logging
import os
import sys
from pathlib import Path

from . import affect, awe, evaluation, expansion
from .analysis import AnalyzerConfig, load_stopwords
from .embeddings import load_embeddings
from .errors import ConfigurationError, EmbirError
from .evaluation import EVALUATORS, collect_run, read_qrels, write_run
from .index import Index, build_index
from .ingest import ingest_collection, ingest_topics
from .retrieval import BM25Params, QLParams, score_bm25, score_ql
from .util import config_hash

log = logging.getLogger("embir")

_FORMAT_ALIASES = {
    "trec": "trec_sgml", "trec_sgml": "trec_sgml",
    "cacm": "cacm", "jsonl": "jsonl",
    "dir": "plain_dir", "plain_dir": "plain_dir",
}
_TOPIC_ALIASES = {"trec": "trec_topics", "trec_topics": "trec_topics", "tsv": "tsv"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _setup_logging():
    level = os.environ.get("EMBIR_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(
        stream=sys.stderr, level=levels.get(level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s")


def _require_path(value, flag):
    if not Path(value).exists():
        raise ConfigurationError(f"{flag}: path does not exist: {value}")
    return value


def _analyzer_from(args):
    stopwords = frozenset()
    if getattr(args, "stopwords", None):
        _require_path(args.stopwords, "--stopwords")
        stopwords = load_stopwords(args.stopwords)
    return AnalyzerConfig(lowercase=args.lowercase, stopwords=stopwords,
                          stemmer=args.stemmer)


def _write_meta(output, payload):
    meta = dict(payload)
    meta["config_hash"] = config_hash(meta.get("config", {}))
    Path(str(output) + ".meta").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _load_topics(args):
    _require_path(args.topics, "--topics")
    if not args.tag.strip():
        raise ConfigurationError("--tag: must be non-empty")
    return ingest_topics(args.topics, _TOPIC_ALIASES[args.topics_format])


def _lexical_params(scorer, args):
    if scorer == "bm25":
        return BM25Params(k1=args.k1, b=args.b)
    return QLParams(mu=args.mu)


# --- subcommands ----------------------------------------------------------


def cmd_index(args):
    _require_path(args.input, "--input")
    config = _analyzer_from(args)
    reader = ingest_collection(args.input, _FORMAT_ALIASES[args.format])
    index = build_index(reader, config)
    index.save(args.output)
    log.info("indexed %d docs (%d tokens, %d decode replacements, %d skipped "
             "records) -> %s", reader.stats.docs_read, index.total_tokens,
             reader.stats.decode_replacements, reader.stats.skipped_records,
             args.output)
    return 0


def cmd_search(args):
    index = Index.load(_require_path(args.index, "--index"))
    topics = _load_topics(args)
    params = _lexical_params(args.scorer, args)
    scorer = score_bm25 if args.scorer == "bm25" else score_ql

    def score_topic(topic):
        from .analysis import analyze
        terms = analyze(topic.query_text(args.query_text == "title_desc"),
                        index.analyzer)
        return scorer(terms, index, params, k=args.depth) if terms else []

    run = collect_run(topics, args.tag, score_topic)
    write_run(run, args.output)
    config = {
        "pipeline": args.scorer, "index": args.index, "topics": args.topics,
        "topics_format": args.topics_format, "depth": args.depth,
        "query_text": args.query_text, "tag": args.tag,
    }
    config.update({"k1": args.k1, "b": args.b} if args.scorer == "bm25"
                  else {"mu": args.mu})
    _write_meta(args.output, {
        "tag": args.tag, "pipeline": args.scorer, "config": config,
        "skipped_topics": run.skipped_topics,
        "topics_total": len(topics), "topics_written": len(run.results)})
    return 0


def _load_store(args, index=None):
    _require_path(args.embeddings, "--embeddings")
    store = load_embeddings(args.embeddings, args.embeddings_format)
    if getattr(args, "restrict_to_index", False) and index is not None:
        store = store.restrict(index.terms)
    return store


def cmd_expand_run(args):
    index = Index.load(_require_path(args.index, "--index"))
    store = _load_store(args, index)
    topics = _load_topics(args)
    params = _lexical_params(args.scorer, args)
    config = expansion.ExpansionConfig(
        t=args.t, neighbors_per_term=args.k_neighbors,
        max_alternatives=args.max_alternatives)
    run = expansion.run_expansion_pipeline(
        topics, index, store, config, args.scorer, params, args.depth,
        args.tag, mode=args.boolean_mode,
        use_description=args.query_text == "title_desc")
    write_run(run, args.output)
    conf = {
        "pipeline": "expand", "index": args.index, "topics": args.topics,
        "topics_format": args.topics_format,
        "embeddings": args.embeddings,
        "embeddings_format": args.embeddings_format,
        "t": args.t, "k_neighbors": args.k_neighbors,
        "max_alternatives": args.max_alternatives,
        "scorer": args.scorer, "boolean_mode": args.boolean_mode,
        "depth": args.depth, "restrict_to_index": args.restrict_to_index,
        "query_text": args.query_text, "tag": args.tag,
    }
    conf.update({"k1": args.k1, "b": args.b} if args.scorer == "bm25"
                else {"mu": args.mu})
    _write_meta(args.output, {
        "tag": args.tag, "pipeline": "expand",
        "embeddings_file": Path(args.embeddings).name, "config": conf,
        "skipped_topics": run.skipped_topics,
        "topics_total": len(topics), "topics_written": len(run.results)})
    return 0


def cmd_awe_run(args):
    index = Index.load(_require_path(args.index, "--index"))
    store = _load_store(args, index)
    topics = _load_topics(args)
    config = awe.AweConfig(weighting=args.weighting,
                           rerank_depth=args.rerank_depth,
                           candidate_scorer=args.candidate_scorer)
    params = _lexical_params(args.candidate_scorer, args)
    run = awe.run_awe_pipeline(
        topics, index, store, config, args.depth, args.tag,
        candidate_params=params, cache_path=args.vector_cache,
        use_description=args.query_text == "title_desc")
    write_run(run, args.output)
    conf = {
        "pipeline": "awe", "index": args.index, "topics": args.topics,
        "topics_format": args.topics_format,
        "embeddings": args.embeddings,
        "embeddings_format": args.embeddings_format,
        "weighting": args.weighting, "rerank_depth": args.rerank_depth,
        "candidate_scorer": args.candidate_scorer, "depth": args.depth,
        "query_text": args.query_text, "tag": args.tag,
    }
    conf.update({"k1": args.k1, "b": args.b}
                if args.candidate_scorer == "bm25" else {"mu": args.mu})
    _write_meta(args.output, {
        "tag": args.tag, "pipeline": "awe",
        "embeddings_file": Path(args.embeddings).name, "config": conf,
        "skipped_topics": run.skipped_topics,
        "fallback_topics": run.fallback_topics,
        "topics_total": len(topics), "topics_written": len(run.results)})
    return 0


def cmd_affect_score(args):
    _require_path(args.input, "--input")
    _require_path(args.lexicon, "--lexicon")
    lexicon = affect.load_lexicon(args.lexicon)
    reader = ingest_collection(args.input, _FORMAT_ALIASES[args.format])
    config = _analyzer_from(args)
    report = affect.score_corpus(reader, lexicon, config, aggregate=args.aggregate)
    Path(args.output).write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    return 0


def cmd_eval(args):
    run = evaluation.read_run(_require_path(args.run, "--run"))
    qrels = read_qrels(_require_path(args.qrels, "--qrels"))
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    for metric in metrics:
        if metric not in EVALUATORS:
            raise ConfigurationError(
                f"--metrics: unknown metric {metric!r}; "
                f"expected from {tuple(EVALUATORS)}")
    out = sys.stdout if args.output is None else open(args.output, "w",
                                                      encoding="utf-8")
    try:
        for metric in metrics:
            result = EVALUATORS[metric](run, qrels, depth=args.depth)
            if args.per_topic:
                for topic_id in run.results:
                    if topic_id in result.per_topic:
                        out.write(f"{metric}\t{topic_id}\t"
                                  f"{result.per_topic[topic_id]:.4f}\n")
            out.write(f"{metric}\tall\t{result.mean:.4f}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


# --- batch ----------------------------------------------------------------

_SCALAR_KEYS_REQUIRED = ("tag", "pipeline", "index", "topics", "output")


def parse_batch_config(path):
    """Parse the TOML-style batch config: a ``[batch]`` section of
    defaults plus repeated ``[experiment]`` sections of ``key = value``
    lines (quoted strings, ints, floats, true/false)."""
    batch = {}
    experiments = []
    current = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line == "[batch]":
                current = batch
                continue
            if line == "[experiment]":
                current = {}
                experiments.append(current)
                continue
            if line.startswith("["):
                raise ConfigurationError(
                    f"{path}:{lineno}: unknown section {line}")
            if "=" not in line or current is None:
                raise ConfigurationError(
                    f"{path}:{lineno}: expected 'key = value' inside a section")
            key, _, value = line.partition("=")
            current[key.strip()] = _parse_scalar(value.strip(), path, lineno)
    if not experiments:
        raise ConfigurationError(f"{path}: no [experiment] sections")
    return batch, experiments


def _parse_scalar(text, path, lineno):
    if len(text) >= 2 and text[0] == '"' and text[-1] == '"':
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(
            f"{path}:{lineno}: cannot parse value {text!r}") from None


def _experiment_argv(exp):
    """Translate one experiment mapping into a subcommand argv."""
    pipeline = exp.get("pipeline")
    if pipeline in ("bm25", "ql"):
        argv = ["search", "--scorer", pipeline]
    elif pipeline == "expand":
        argv = ["expand-run"]
    elif pipeline == "awe":
        argv = ["awe-run"]
    else:
        raise ConfigurationError(
            f"experiment {exp.get('tag', '?')!r}: unknown pipeline {pipeline!r}")
    flag_map = {
        "index": "--index", "topics": "--topics",
        "topics_format": "--topics-format", "output": "--output",
        "tag": "--tag", "depth": "--depth", "k1": "--k1", "b": "--b",
        "mu": "--mu", "embeddings": "--embeddings",
        "embeddings_format": "--embeddings-format", "t": "--t",
        "k_neighbors": "--k-neighbors",
        "max_alternatives": "--max-alternatives",
        "boolean_mode": "--boolean-mode", "scorer_inner": "--scorer",
        "weighting": "--weighting", "rerank_depth": "--rerank-depth",
        "candidate_scorer": "--candidate-scorer",
        "vector_cache": "--vector-cache", "query_text": "--query-text",
    }
    bool_flags = {"restrict_to_index": "--restrict-to-index"}
    for key, value in exp.items():
        if key in ("pipeline", "qrels"):
            continue
        if key in bool_flags:
            if value:
                argv.append(bool_flags[key])
            continue
        if key == "scorer":
            if pipeline == "expand":
                argv += ["--scorer", str(value)]
            continue
        if key not in flag_map:
            raise ConfigurationError(
                f"experiment {exp.get('tag', '?')!r}: unknown key {key!r}")
        argv += [flag_map[key], str(value)]
    return argv


def _validate_experiment(exp, position, config_path):
    for key in _SCALAR_KEYS_REQUIRED:
        if key not in exp:
            raise ConfigurationError(
                f"{config_path}: experiment #{position} missing key {key!r}")
    if not str(exp["tag"]).strip():
        raise ConfigurationError(
            f"{config_path}: experiment #{position} has an empty tag")
    for key in ("index", "topics", "embeddings"):
        if key in exp:
            _require_path(exp[key], f"experiment {exp['tag']!r}: {key}")


def _run_experiment(exp, batch, parser):
    argv = _experiment_argv(exp)
    args = parser.parse_args(argv)
    args.func(args)
    qrels_path = exp.get("qrels", batch.get("qrels"))
    if qrels_path is None:
        raise ConfigurationError(
            f"experiment {exp['tag']!r}: no qrels given (experiment or [batch])")
    run = evaluation.read_run(exp["output"])
    qrels = read_qrels(_require_path(qrels_path, "qrels"))
    depth = int(exp.get("eval_depth", batch.get("eval_depth", 1000)))
    ndcg = evaluation.eval_ndcg(run, qrels, depth=depth).mean
    map_ = evaluation.eval_map(run, qrels, depth=depth).mean
    return exp["tag"], ndcg, map_


def cmd_batch(args):
    batch, experiments = parse_batch_config(
        _require_path(args.config, "config"))
    parser = build_parser()
    results = [None] * len(experiments)
    failures = []

    def run_one(i):
        # Validation failures are isolated per experiment, like any
        # other per-experiment error.
        _validate_experiment(experiments[i], i + 1, args.config)
        return _run_experiment(experiments[i], batch, parser)

    def tag_of(i):
        return str(experiments[i].get("tag", f"#{i + 1}"))

    if args.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(args.jobs) as pool:
            futures = {pool.submit(run_one, i): i for i in range(len(experiments))}
            for future in concurrent.futures.as_completed(futures):
                i = futures[future]
                try:
                    results[i] = future.result()
                except (EmbirError, UsageError) as exc:
                    failures.append((tag_of(i), str(exc)))
    else:
        for i in range(len(experiments)):
            try:
                results[i] = run_one(i)
            except (EmbirError, UsageError) as exc:
                failures.append((tag_of(i), str(exc)))

    lines = ["tag\tndcg\tmap"]
    for row in results:
        if row is not None:
            tag, ndcg, map_ = row
            lines.append(f"{tag}\t{ndcg:.4f}\t{map_:.4f}")
    Path(args.table).write_text("\n".join(lines) + "\n", encoding="utf-8")
    for tag, message in failures:
        log.error("experiment %s failed: %s", tag, message)
        print(f"embir: experiment {tag!r} failed: {message}", file=sys.stderr)
    return 2 if failures else 0


# --- parser wiring ----------------------------------------------------------


def _add_analyzer_flags(p):
    p.add_argument("--lowercase", action=argparse.BooleanOptionalAction,
                   default=True)
    p.add_argument("--stopwords", default=None,
                   help="stopword file (one word per line, # comments)")
    p.add_argument("--stemmer", choices=("none", "porter"), default="none")


def _add_lexical_flags(p):
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.add_argument("--mu", type=float, default=1000.0)


def _add_run_flags(p):
    p.add_argument("--topics", required=True)
    p.add_argument("--topics-format", choices=sorted(_TOPIC_ALIASES),
                   default="tsv")
    p.add_argument("--depth", type=int, default=1000,
                   help="result depth per topic")
    p.add_argument("--tag", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--query-text", choices=("title", "title_desc"),
                   default="title")


def build_parser():
    parser = _Parser(prog="embir", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build an inverted index")
    p.add_argument("--format", choices=sorted(_FORMAT_ALIASES), required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_analyzer_flags(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="BM25/QL baseline run")
    p.add_argument("--index", required=True)
    p.add_argument("--scorer", choices=("bm25", "ql"), default="bm25")
    _add_lexical_flags(p)
    _add_run_flags(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("expand-run", help="embedding query-expansion run")
    p.add_argument("--index", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--format", "--embeddings-format", dest="embeddings_format",
                   choices=("glove_text", "word2vec_text"), default="glove_text")
    p.add_argument("--t", type=float, default=0.75,
                   help="minimum cosine for an expansion candidate")
    p.add_argument("--k-neighbors", type=int, default=1)
    p.add_argument("--max-alternatives", type=int, default=64)
    p.add_argument("--scorer", choices=("bm25", "ql"), default="bm25")
    p.add_argument("--boolean-mode", choices=("union", "max-clause"),
                   default="union")
    p.add_argument("--restrict-to-index", action="store_true")
    _add_lexical_flags(p)
    _add_run_flags(p)
    p.set_defaults(func=cmd_expand_run)

    p = sub.add_parser("awe-run", help="averaged-word-embedding ranking run")
    p.add_argument("--index", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--format", "--embeddings-format", dest="embeddings_format",
                   choices=("glove_text", "word2vec_text"), default="glove_text")
    p.add_argument("--weighting", choices=awe.AWE_WEIGHTINGS,
                   default="tfidf_weighted")
    p.add_argument("--rerank-depth", type=int, default=1000,
                   help="candidate depth; 0 scores the whole corpus")
    p.add_argument("--candidate-scorer", choices=("bm25", "ql"), default="bm25")
    p.add_argument("--vector-cache", default=None,
                   help="sidecar file for cached document vectors")
    p.add_argument("--restrict-to-index", action="store_true")
    _add_lexical_flags(p)
    _add_run_flags(p)
    p.set_defaults(func=cmd_awe_run)

    p = sub.add_parser("affect-score", help="corpus affect report")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=sorted(_FORMAT_ALIASES), required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--aggregate", choices=affect.AGGREGATES, default="docs")
    _add_analyzer_flags(p)
    p.set_defaults(func=cmd_affect_score)

    p = sub.add_parser("eval", help="NDCG/MAP from a run file and qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--metrics", default="map,ndcg")
    p.add_argument("--depth", type=int, default=1000)
    p.add_argument("--per-topic", action="store_true")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("batch", help="run a config file of experiments")
    p.add_argument("config")
    p.add_argument("--table", required=True,
                   help="consolidated (tag, ndcg, map) TSV output")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_batch)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"embir: usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigurationError as exc:
        print(f"embir: usage error: {exc}", file=sys.stderr)
        return 1
    except EmbirError as exc:
        print(f"embir: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"embir: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
