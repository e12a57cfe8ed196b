"""Batch experiments: config files, repetitions and the results report."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import LDA_METHODS, METHODS, EpisodeConfig, config_for_method
from .corpus import CorpusSet, DataSplit, load_corpus, make_target_split, sample_documents
from .errors import ConfigError, FewTopicError
from .lda import LDAConfig, lda_baseline
from .metatrainer import evaluate_target, train
from .store import save_priornet, save_topicmodel

log = logging.getLogger(__name__)

RESULT_COLUMNS = ("method", "dataset", "target", "repetition", "perplexity", "train_seconds", "eval_seconds")
SWEEP_COLUMNS = ("method", "dataset", "target", "repetition", "em_steps", "perplexity")

# seed offsets keeping target sampling identical across methods
STREAM_TARGET = 1000
STREAM_LDA = 2000
STREAM_SPLIT = 3000


@dataclass
class ExperimentConfig:
    docword: Path
    vocab: Path
    labels: Path
    method: str = "ours"
    dataset: str = ""
    targets: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    n_validation: int = 3
    repetitions: int = 1
    seed: int = 0
    output_dir: Path = Path("results")
    target_docs: int = 3
    heldout: float = 0.2
    em_sweep: list = field(default_factory=list)
    timing: bool = False
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    lda: LDAConfig = field(default_factory=LDAConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not 0.0 <= self.heldout < 1.0:
            raise ConfigError("heldout must lie in [0, 1)")
        if self.target_docs < 1:
            raise ConfigError("target_docs must be >= 1")
        if not self.dataset:
            self.dataset = Path(self.docword).parent.name or "dataset"


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text: str) -> list:
    return [item.strip() for item in text.split(",") if item.strip()]


_TOP_LEVEL = {
    "method": str, "dataset": str, "n_validation": int, "repetitions": int, "seed": int,
    "target_docs": int, "heldout": float, "timing": _bool,
}
_EPISODE = {
    "n_topics": int, "em_steps": int, "support_size": int, "support_rate": float, "hidden": int,
    "rep_dim": int, "learning_rate": float, "dropout": float, "max_epochs": int, "patience": int,
    "val_interval": int, "val_episodes": int, "log_features": _bool,
}
_LDA = {
    "lda_sweeps": ("sweeps", int), "lda_burn_in": ("burn_in", int), "lda_fit_every": ("fit_every", int),
    "lda_alpha": ("alpha", float), "lda_beta": ("beta", float), "lda_fold_in_sweeps": ("fold_in_sweeps", int),
}


def parse_config_text(text: str, base_dir=Path("."), overrides=None) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` starts a comment)."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        raw[key] = value
    raw.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})

    kwargs, episode, lda = {}, {}, {}
    base_dir = Path(base_dir)
    try:
        for key, value in raw.items():
            if key in ("docword", "vocab", "labels", "output_dir"):
                path = Path(value)
                kwargs[key] = path if path.is_absolute() else base_dir / path
            elif key in ("targets", "validation"):
                kwargs[key] = _list(value)
            elif key == "em_sweep":
                kwargs[key] = [int(v) for v in _list(value)]
            elif key in _TOP_LEVEL:
                kwargs[key] = _TOP_LEVEL[key](value)
            elif key in _EPISODE:
                episode[key] = _EPISODE[key](value)
            elif key in _LDA:
                name, conv = _LDA[key]
                lda[name] = conv(value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
    except ValueError as exc:
        raise ConfigError(f"bad value: {exc}") from None
    for key in ("docword", "vocab", "labels"):
        if key not in kwargs:
            raise ConfigError(f"config needs a {key!r} path")
    kwargs["episode"] = EpisodeConfig(**episode)
    kwargs["lda"] = LDAConfig(**lda)
    return ExperimentConfig(**kwargs)


def load_config(path, overrides=None) -> ExperimentConfig:
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), path.parent, overrides)


def _protocol(cfg: ExperimentConfig, data: CorpusSet, rep_seed: int):
    """Yield (targets, validation, training names) groups sharing one training run."""
    targets = cfg.targets or list(data.names)
    unknown = [t for t in targets + cfg.validation if t not in data.names]
    if unknown:
        raise ConfigError(f"categories not in dataset: {', '.join(unknown)}")
    if cfg.validation:
        excluded = set(targets) | set(cfg.validation)
        training = [n for n in data.names if n not in excluded]
        yield targets, cfg.validation, training
        return
    rng = np.random.default_rng([rep_seed, STREAM_SPLIT])
    for target in targets:
        others = [n for n in data.names if n != target]
        if len(others) <= cfg.n_validation:
            raise ConfigError("not enough categories for a training/validation split")
        validation = sorted(rng.choice(others, size=cfg.n_validation, replace=False).tolist(), key=others.index)
        training = [n for n in others if n not in validation]
        yield [target], validation, training


def _target_split(cfg, data, target, rep_seed):
    index = data.names.index(target)
    rng = np.random.default_rng([rep_seed, STREAM_TARGET + index])
    docs = sample_documents(data[target], cfg.target_docs, rng)
    return make_target_split(docs, cfg.heldout, rng)


def _fmt(x) -> str:
    return f"{x:.6f}"


def run_repetition(cfg: ExperimentConfig, data: CorpusSet, rep: int, out_dir: Path):
    """Run one repetition; returns (result rows, sweep rows)."""
    rep_seed = cfg.seed + rep
    rows, sweep_rows = [], []
    episode = cfg.episode.with_(seed=rep_seed)
    for targets, validation, training in _protocol(cfg, data, rep_seed):
        tag = f"rep{rep}" if len(targets) > 1 or cfg.validation else f"rep{rep}_{targets[0]}"
        net, train_secs = None, 0.0
        if cfg.method not in LDA_METHODS:
            episode_cfg = config_for_method(cfg.method, episode)
            start = time.perf_counter()
            net, trainlog = train(data.subset(training), data.subset(validation), episode_cfg, variant=cfg.method)
            train_secs = time.perf_counter() - start
            (out_dir / f"trainlog_{tag}.tsv").write_text(trainlog.to_tsv(), encoding="utf-8")
            save_priornet(out_dir / f"model_{tag}.bin", net)
        for target in targets:
            support, evaluation = _target_split(cfg, data, target, rep_seed)
            start = time.perf_counter()
            if net is None:
                split = DataSplit(data.subset(training), data.subset(validation), target, support, evaluation)
                rng = np.random.default_rng([rep_seed, STREAM_LDA + data.names.index(target)])
                ppl, model = lda_baseline(cfg.method.split("-")[1], split, episode.n_topics, rng, cfg.lda)
            else:
                ppl, model = evaluate_target(support, evaluation, net, episode_cfg)
                for T in cfg.em_sweep:
                    swept, _ = evaluate_target(support, evaluation, net, episode_cfg, em_steps=T)
                    sweep_rows.append((cfg.method, cfg.dataset, target, str(rep), str(T), _fmt(swept)))
            eval_secs = time.perf_counter() - start
            save_topicmodel(out_dir / f"topics_rep{rep}_{target}.bin", model, data.vocab,
                            {"method": cfg.method, "target": target, "repetition": rep})
            timing = (_fmt(train_secs), _fmt(eval_secs)) if cfg.timing else ("NA", "NA")
            rows.append((cfg.method, cfg.dataset, target, str(rep), _fmt(ppl)) + timing)
    return rows, sweep_rows


def _run_one(args):
    cfg, data, rep, out_dir = args
    try:
        return rep, run_repetition(cfg, data, rep, out_dir), None
    except (FewTopicError, ValueError, ArithmeticError) as exc:
        log.error("repetition %d failed: %s", rep, exc)
        return rep, ([], []), f"{type(exc).__name__}: {exc}"


def _tsv(rows, columns, comment) -> str:
    lines = [f"# {comment}", "\t".join(columns)]
    lines += ["\t".join(r) for r in rows]
    return "\n".join(lines) + "\n"


def summarize(values) -> tuple:
    """Mean and standard error (sample std / sqrt(n)); se is 0 for one value."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> int:
    """Execute every repetition and write the reports.  Returns an exit code."""
    data = load_corpus(cfg.docword, cfg.vocab, cfg.labels)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if threads is None:
        threads = int(os.environ.get("FEWSHOT_THREADS", "1") or 1)
    jobs = [(cfg, data, rep, out_dir) for rep in range(cfg.repetitions)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = [_run_one(job) for job in jobs]

    rows, sweep_rows, failed = [], [], False
    for rep, (rep_rows, rep_sweep), error in sorted(outcomes, key=lambda o: o[0]):
        if error is not None:
            failed = True
            rows.append((cfg.method, cfg.dataset, "*", str(rep), f"ERROR {error}", "NA", "NA"))
        rows.extend(rep_rows)
        sweep_rows.extend(rep_sweep)
    values = [float(r[4]) for r in rows if not r[4].startswith("ERROR")]
    if values:
        mean, se = summarize(values)
        summary = f"{mean:.6f} ± {se:.6f}"
    else:
        summary = "NA"
    rows.append((cfg.method, cfg.dataset, "ALL", "mean±se", summary, "NA", "NA"))
    comment = ("columns: method, dataset, target, repetition, perplexity, train_seconds, eval_seconds; "
               "last row is mean ± standard error over all data rows")
    (out_dir / "results.tsv").write_text(_tsv(rows, RESULT_COLUMNS, comment), encoding="utf-8")
    if cfg.em_sweep:
        sweep_summary = []
        for T in cfg.em_sweep:
            vals = [float(r[5]) for r in sweep_rows if r[4] == str(T)]
            if vals:
                mean, se = summarize(vals)
                sweep_summary.append((cfg.method, cfg.dataset, "ALL", "mean±se", str(T), f"{mean:.6f} ± {se:.6f}"))
        (out_dir / "em_sweep.tsv").write_text(
            _tsv(sweep_rows + sweep_summary, SWEEP_COLUMNS,
                 "test perplexity by number of EM steps; trailing rows are mean ± standard error per step count"),
            encoding="utf-8")
    return 1 if failed else 0
