"""Command-line pipeline driver.

Subcommands: `vocab` (build a vocabulary and binary corpus from raw text),
`split` (train/test split), `learn` (fit the hierarchical model), `topics`
(extract the topic hierarchy as JSON and HTML) and `eval` (quality
metrics).  Exit codes: 0 success, 2 usage error, 3 data error, 4 internal
error.  All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings

from . import __version__, corpus, evaluation, model as model_mod, structure, topics

log = logging.getLogger("hlta")

DEFAULTS = {
    "tau": 20,
    "mu": 15,
    "delta": 3.0,
    "kappa": 50,
    "alpha": 0.75,
    "minibatch": 1000,
    "subsample_stepwise": 10000,
    "stepwise_updates": 100,
    "top_k": 7,
    "coherence_words": 4,
}


class DataError(Exception):
    pass


def _version_text() -> str:
    pairs = " ".join(f"{k}={v}" for k, v in DEFAULTS.items())
    return f"hlta {__version__} (defaults: {pairs})"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hlta",
        description="Hierarchical latent tree analysis for topic detection.",
    )
    parser.add_argument("--version", action="version", version=_version_text())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vocab", help="build vocabulary and binary corpus from raw text")
    p.add_argument("input", help="directory of .txt files or a one-document-per-line file")
    p.add_argument("--n", type=int, required=True, help="vocabulary size")
    p.add_argument("--max-gram", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--stopwords", default=None, help="stopword file, one word per line")
    p.add_argument("--min-docs", type=int, default=3,
                   help="drop terms occurring in fewer documents (default 3)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("split", help="split a binary corpus into train and test")
    p.add_argument("corpus")
    p.add_argument("--vocab", required=True)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("learn", help="learn a hierarchical latent tree model")
    p.add_argument("corpus")
    p.add_argument("--vocab", default=None,
                   help="vocabulary file (default: vocab.txt next to the corpus)")
    p.add_argument("--tau", type=int, default=None,
                   help=f"top-level bound (default {DEFAULTS['tau']}; 30 suits large corpora)")
    p.add_argument("--mu", type=int, default=None, help="island size bound")
    p.add_argument("--delta", type=float, default=None, help="UD-test threshold")
    p.add_argument("--kappa", type=int, default=None, help="final batch-EM steps")
    p.add_argument("--subsample", type=int, default=None,
                   help="structure-phase document budget")
    p.add_argument("--minibatch", type=int, default=None, help="stepwise minibatch size")
    p.add_argument("--updates", type=int, default=None, help="stepwise update count")
    p.add_argument("--alpha", type=float, default=None, help="stepwise stepsize exponent")
    p.add_argument("--em", choices=("batch", "stepwise"), default="batch")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="cap the numerical thread count (default: all cores)")
    p.add_argument("--manifest", default=None,
                   help="re-run with the settings recorded in a manifest file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("topics", help="extract the topic hierarchy from a model")
    p.add_argument("model")
    p.add_argument("--top-k", type=int, default=DEFAULTS["top_k"])
    p.add_argument("--skip-level-1", action="store_true")
    p.add_argument("--narrow", action="store_true", help="add narrow topic sizes")
    p.add_argument("--corpus", default=None, help="binary corpus (required with --narrow)")
    p.add_argument("--vocab", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_topics)

    p = sub.add_parser("eval", help="evaluate a model and its topics")
    p.add_argument("model")
    p.add_argument("test_corpus")
    p.add_argument("--vocab", default=None)
    p.add_argument("--topics", required=True, help="topics JSON from the topics command")
    p.add_argument("--corpus", default=None,
                   help="corpus for coherence counts (default: the test corpus)")
    p.add_argument("--embeddings", default=None, help="word-vector text file")
    p.add_argument("--out", required=True, help="metrics JSON path")
    p.set_defaults(func=cmd_eval)
    return parser


# -- helpers -----------------------------------------------------------------


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _load_vocab(path):
    if not os.path.exists(path):
        raise DataError(f"vocabulary file not found: {path}")
    return corpus.read_vocabulary(path)


def _load_corpus(path, vocab_path):
    if not os.path.exists(path):
        raise DataError(f"corpus file not found: {path}")
    vocab_path = vocab_path or os.path.join(os.path.dirname(path) or ".", "vocab.txt")
    vocab = _load_vocab(vocab_path)
    try:
        return corpus.read_sparse_corpus(path, vocab)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# -- subcommands ---------------------------------------------------------------


def cmd_vocab(args) -> int:
    if args.n <= 0:
        raise DataError("--n must be positive")
    stop = frozenset()
    if args.stopwords:
        if os.path.exists(args.stopwords):
            stop = corpus.read_stopwords(args.stopwords)
        else:
            warnings.warn(f"stopword file {args.stopwords} not found; proceeding without")
    try:
        texts, ids = corpus.read_documents(args.input)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    tokens = corpus.build_corpus(texts, ids, stop)
    vocab, rewritten = corpus.promote_ngrams(tokens, args.n, args.max_gram,
                                             min_doc_count=args.min_docs)
    binary = corpus.binarize(rewritten, vocab)
    out = _ensure_dir(args.out)
    corpus.write_vocabulary(vocab, os.path.join(out, "vocab.txt"))
    corpus.write_sparse_corpus(binary, os.path.join(out, "corpus.txt"))
    log.info("vocabulary: %d terms; corpus: %d documents", len(vocab), len(binary))
    return 0


def cmd_split(args) -> int:
    data = _load_corpus(args.corpus, args.vocab)
    try:
        train, test = corpus.split(data, args.train_fraction, args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    out = _ensure_dir(args.out)
    corpus.write_vocabulary(data.vocab, os.path.join(out, "vocab.txt"))
    corpus.write_sparse_corpus(train, os.path.join(out, "train.txt"))
    corpus.write_sparse_corpus(test, os.path.join(out, "test.txt"))
    log.info("split: %d train / %d test", len(train), len(test))
    return 0


def _resolved_learn_params(args) -> dict:
    if args.manifest:
        with open(args.manifest, "r", encoding="utf-8") as fh:
            recorded = json.load(fh)
        params = dict(recorded["params"])
        params["corpus"] = recorded.get("corpus", args.corpus)
        params["vocab"] = recorded.get("vocab", args.vocab)
        return params
    em_mode = args.em
    if em_mode == "batch" and args.minibatch is not None:
        warnings.warn("--minibatch has no effect with --em batch; ignored")
    if em_mode == "batch" and args.updates is not None:
        warnings.warn("--updates has no effect with --em batch; ignored")
    subsample = args.subsample
    if subsample is None and em_mode == "stepwise":
        subsample = DEFAULTS["subsample_stepwise"]
    return {
        "corpus": args.corpus,
        "vocab": args.vocab,
        "tau": args.tau if args.tau is not None else DEFAULTS["tau"],
        "mu": args.mu if args.mu is not None else DEFAULTS["mu"],
        "delta": args.delta if args.delta is not None else DEFAULTS["delta"],
        "kappa": args.kappa if args.kappa is not None else DEFAULTS["kappa"],
        "subsample": subsample,
        "em_mode": em_mode,
        "minibatch_size": args.minibatch if args.minibatch is not None else DEFAULTS["minibatch"],
        "stepwise_updates": args.updates if args.updates is not None else DEFAULTS["stepwise_updates"],
        "alpha": args.alpha if args.alpha is not None else DEFAULTS["alpha"],
        "seed": args.seed,
    }


def cmd_learn(args) -> int:
    if args.threads:
        _limit_threads(args.threads)
    params = _resolved_learn_params(args)
    data = _load_corpus(params["corpus"], params["vocab"])
    try:
        config = structure.HltaConfig(
            tau=params["tau"], mu=params["mu"], delta=params["delta"],
            kappa=params["kappa"], subsample=params["subsample"],
            em_mode=params["em_mode"], minibatch_size=params["minibatch_size"],
            stepwise_updates=params["stepwise_updates"], alpha=params["alpha"],
            seed=params["seed"],
        )
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    fitted, hierarchy = structure.hlta(data, config)
    out = _ensure_dir(args.out)
    _write(os.path.join(out, "model.json"), model_mod.to_json(fitted))
    _write(os.path.join(out, "hierarchy.json"), topics.hierarchy_to_json(hierarchy))
    manifest = {
        "command": "learn",
        "package_version": __version__,
        "corpus": params["corpus"],
        "vocab": params["vocab"],
        "params": {k: v for k, v in params.items() if k not in ("corpus", "vocab")},
        "outputs": ["model.json", "hierarchy.json"],
    }
    _write(os.path.join(out, "manifest.json"), json.dumps(manifest, indent=1))
    log.info("model written to %s", out)
    return 0


def _limit_threads(n: int):
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=n)
    except ImportError:
        warnings.warn("threadpoolctl unavailable; --threads ignored")


def cmd_topics(args) -> int:
    if not os.path.exists(args.model):
        raise DataError(f"model file not found: {args.model}")
    fitted = model_mod.load(args.model)
    hierarchy = topics.extract_hierarchy(fitted, top_k=None,
                                         skip_level_1=args.skip_level_1)
    doc = [topics._node_dict(r) for r in hierarchy.roots]
    if args.narrow:
        if not args.corpus:
            raise DataError("--narrow needs --corpus (and --vocab) to refit marginals")
        data = _load_corpus(args.corpus, args.vocab)
        _add_narrow_sizes(doc, fitted, data, args.top_k)
    out = _ensure_dir(args.out)
    _write(os.path.join(out, "topics.json"), json.dumps(doc, indent=1))
    _write(os.path.join(out, "topics.html"),
           topics.render_html(hierarchy, top_k=args.top_k))
    print(topics.render_text(hierarchy, top_k=args.top_k))
    return 0


def _add_narrow_sizes(nodes, fitted, data, top_k):
    for node in nodes:
        narrow = topics.narrow_topic(fitted, node["latent"], data, top_k=top_k)
        node["narrow_size"] = narrow.size
        _add_narrow_sizes(node.get("children", []), fitted, data, top_k)


def cmd_eval(args) -> int:
    if not os.path.exists(args.model):
        raise DataError(f"model file not found: {args.model}")
    fitted = model_mod.load(args.model)
    test = _load_corpus(args.test_corpus, args.vocab)
    if not os.path.exists(args.topics):
        raise DataError(f"topics file not found: {args.topics}")
    with open(args.topics, "r", encoding="utf-8") as fh:
        hierarchy = topics.hierarchy_from_json(fh.read())
    coherence_data = _load_corpus(args.corpus, args.vocab) if args.corpus else test
    embeddings = None
    if args.embeddings:
        if not os.path.exists(args.embeddings):
            raise DataError(f"embeddings file not found: {args.embeddings}")
        embeddings = evaluation.load_embeddings(args.embeddings)
    try:
        report = evaluation.evaluate_run(fitted, test, hierarchy,
                                         coherence_data=coherence_data,
                                         embeddings=embeddings,
                                         top_m=DEFAULTS["coherence_words"])
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    _write(args.out, json.dumps(report, indent=1))
    summary = {k: report[k] for k in ("per_doc_ll", "mean_coherence", "mean_compactness")}
    print(json.dumps(summary, indent=1))
    return 0


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # invariant violation or bug
        log.exception("internal error: %s", exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
