"""Command-line entry point: ``fewtopic {prepare,run,topics,gen-synthetic}``.

Exit codes: 0 success, 1 a repetition failed (its row is still written),
2 bad input (missing/corrupt file, invalid config).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .corpus import filter_corpus, load_corpus, write_corpus
from .errors import FewTopicError
from .experiment import load_config, run_experiment
from .store import load_topicmodel
from .synthetic import benchmark_categories, generate_dataset
from .topicmodel import top_terms

log = logging.getLogger("fewtopic")

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_INPUT


def cmd_prepare(args) -> int:
    for path in (args.docword, args.vocab, args.labels):
        if not Path(path).is_file():
            return _fail(f"file not found: {path}")
    try:
        raw = load_corpus(args.docword, args.vocab, args.labels)
        cs = filter_corpus(raw, args.min_doc_terms, args.min_term_docs)
    except (FewTopicError, OSError) as exc:
        return _fail(str(exc))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(cs, out / "docword.txt", out / "vocab.txt", out / "labels.txt")
    print(f"D\t{cs.D}")
    print(f"J\t{cs.J}")
    for name, corpus in zip(cs.names, cs.corpora):
        print(f"{name}\t{corpus.n_docs}")
    return EXIT_OK


def cmd_run(args) -> int:
    overrides = {"seed": args.seed, "output_dir": args.out and Path(args.out).resolve(), "method": args.method}
    try:
        cfg = load_config(args.config, overrides)
    except FileNotFoundError:
        return _fail(f"file not found: {args.config}")
    except FewTopicError as exc:
        return _fail(str(exc))
    try:
        code = run_experiment(cfg)
    except FileNotFoundError as exc:
        return _fail(str(exc))
    except FewTopicError as exc:
        return _fail(str(exc))
    print(Path(cfg.output_dir) / "results.tsv")
    return code


def cmd_topics(args) -> int:
    if not Path(args.model).is_file():
        return _fail(f"file not found: {args.model}")
    try:
        model, vocab, _ = load_topicmodel(args.model)
    except (FewTopicError, OSError) as exc:
        return _fail(f"cannot read {args.model}: {exc}")
    if not vocab:
        vocab = [str(j) for j in range(model.J)]
    m = max(1, min(args.m, model.J))
    for k in range(model.K):
        print(f"Topic{k + 1}: " + " ".join(vocab[j] for j in top_terms(model, k, m)))
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    cs = generate_dataset(seed=args.seed, n_train=args.train, n_valid=args.valid, n_target=args.targets,
                          K=args.topics, J=args.terms, docs_per_corpus=args.docs, doc_length=args.doc_length,
                          n_archetypes=args.archetypes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(cs, out / "docword.txt", out / "vocab.txt", out / "labels.txt")
    _, valid, target = benchmark_categories(cs)
    (out / "experiment.cfg").write_text(
        "# generated benchmark; edit freely\n"
        "docword = docword.txt\nvocab = vocab.txt\nlabels = labels.txt\n"
        f"dataset = synthetic\nmethod = ours\nn_topics = {args.topics}\n"
        f"validation = {', '.join(valid)}\ntargets = {', '.join(target)}\n"
        "repetitions = 3\noutput_dir = results\n",
        encoding="utf-8",
    )
    print(f"wrote {cs.D} corpora, J={cs.J} to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fewtopic", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="filter a UCI bag-of-words dataset into per-category corpora")
    p.add_argument("--docword", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-doc-terms", type=int, default=30)
    p.add_argument("--min-term-docs", type=int, default=30)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("run", help="run an experiment described by a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--method")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("topics", help="print the top terms of a saved topic model")
    p.add_argument("model")
    p.add_argument("--m", type=int, default=10, help="terms per topic")
    p.set_defaults(func=cmd_topics)

    p = sub.add_parser("gen-synthetic", help="write a synthetic dataset and matching config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", type=int, default=30)
    p.add_argument("--valid", type=int, default=3)
    p.add_argument("--targets", type=int, default=10)
    p.add_argument("--topics", type=int, default=3)
    p.add_argument("--terms", type=int, default=50)
    p.add_argument("--docs", type=int, default=40)
    p.add_argument("--doc-length", type=int, default=80)
    p.add_argument("--archetypes", type=int)
    p.set_defaults(func=cmd_gen_synthetic)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
