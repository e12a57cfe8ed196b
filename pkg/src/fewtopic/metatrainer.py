"""Episodic training of the prior networks and target-corpus evaluation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import diffcalc as dc
from .config import EpisodeConfig
from .corpus import MAX_SPLIT_ATTEMPTS, CorpusSet, CountMatrix, sample_documents, split_words
from .errors import ConfigError, DataError
from .priornet import PriorNet, generate_priors
from .topicmodel import log_likelihood, perplexity, run_em

log = logging.getLogger(__name__)

# offsets added to the seed for independent random streams
STREAM_TRAIN = 1
STREAM_VALID = 2
STREAM_DROPOUT = 3


@dataclass
class TrainLog:
    losses: list = field(default_factory=list)  # (epoch, loss)
    validations: list = field(default_factory=list)  # (epoch, perplexity, best so far)
    best_epoch: int = 0
    wall_clock: float = 0.0

    @property
    def best_perplexity(self) -> float:
        return self.validations[-1][2] if self.validations else float("nan")

    @property
    def initial_perplexity(self) -> float:
        return self.validations[0][1] if self.validations else float("nan")

    @property
    def final_perplexity(self) -> float:
        return self.validations[-1][1] if self.validations else float("nan")

    def to_tsv(self) -> str:
        loss = dict(self.losses)
        val = {e: p for e, p, _ in self.validations}
        rows = ["# training log: per-epoch episode loss; validation perplexity where measured",
                "epoch\tloss\tval_perplexity"]
        for epoch in sorted(set(loss) | set(val)):
            lv = f"{loss[epoch]:.10g}" if epoch in loss else "NA"
            vv = f"{val[epoch]:.10g}" if epoch in val else "NA"
            rows.append(f"{epoch}\t{lv}\t{vv}")
        return "\n".join(rows) + "\n"


def _dense(X) -> np.ndarray:
    return X.dense() if isinstance(X, CountMatrix) else np.asarray(X)


def sample_episode(corpus: CountMatrix, config: EpisodeConfig, rng: np.random.Generator):
    """Draw N documents and split their words into (support, query) arrays."""
    docs = _dense(sample_documents(corpus, config.support_size, rng))
    for _ in range(MAX_SPLIT_ATTEMPTS):
        support, query = split_words(docs, config.support_rate, rng)
        if support.sum() > 0 and query.sum() > 0:
            return support, query
    raise DataError("sampled documents could not be split into non-empty support and query")


def episode_loss(support, query, net: PriorNet, config: EpisodeConfig, training=True, rng=None,
                 em_steps=None):
    """Negative query log-likelihood of the model fitted to ``support``."""
    T = config.train_em_steps if em_steps is None else em_steps
    priors = generate_priors(support, net, training=training, rng=rng)
    model = run_em(support, priors, T)
    return -log_likelihood(query, model)


def _check_vocab(net: PriorNet, J: int):
    if net.J != J:
        raise ConfigError(f"model was built for {net.J} terms, data has {J}")


def validation_perplexity(episodes, net: PriorNet, config: EpisodeConfig) -> float:
    values = []
    for support, query in episodes:
        priors = generate_priors(support, net, training=False)
        model = run_em(support, priors, config.train_em_steps)
        values.append(perplexity(query, model))
    return float(np.mean(values))


def train(training: CorpusSet, validation: CorpusSet, config: EpisodeConfig, net: PriorNet | None = None,
          variant=None):
    """Fit prior-network parameters by episodic training with early stopping.

    One epoch is one episode and one Adam step.  Every ``val_interval``
    epochs the mean perplexity over a fixed set of validation episodes is
    measured; the best parameters seen are returned.
    """
    start = time.perf_counter()
    if training.D == 0:
        raise DataError("no training corpora")
    empty = [n for n, c in zip(training.names, training.corpora) if c.n_docs == 0]
    if empty:
        raise DataError(f"training corpora without documents: {', '.join(empty)}")
    if net is None:
        net = PriorNet.from_config(training.J, config, variant=variant)
    _check_vocab(net, training.J)

    rng = np.random.default_rng([config.seed, STREAM_TRAIN])
    drop_rng = np.random.default_rng([config.seed, STREAM_DROPOUT])
    episodes = []
    if validation is not None and validation.D > 0:
        vrng = np.random.default_rng([config.seed, STREAM_VALID])
        for _ in range(config.val_episodes):
            d = vrng.integers(validation.D)
            episodes.append(sample_episode(validation.corpora[d], config, vrng))

    trainlog = TrainLog()
    best_state, best_val = net.state(), np.inf
    if episodes:
        best_val = validation_perplexity(episodes, net, config)
        trainlog.validations.append((0, best_val, best_val))

    params = net.parameters()
    opt = dc.Adam(params, lr=config.learning_rate)
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        d = rng.integers(training.D)
        support, query = sample_episode(training.corpora[d], config, rng)
        loss = episode_loss(support, query, net, config, training=True, rng=drop_rng)
        opt.step(dc.grad(loss, params))
        trainlog.losses.append((epoch, loss.item()))
        if episodes and epoch % config.val_interval == 0:
            val = validation_perplexity(episodes, net, config)
            if val < best_val:
                best_val, best_state, stale = val, net.state(), 0
                trainlog.best_epoch = epoch
            else:
                stale += 1
            trainlog.validations.append((epoch, val, best_val))
            log.debug("epoch %d loss %.4f val %.4f", epoch, loss.item(), val)
            if stale >= config.patience:
                break
    if episodes:
        net.load_state(best_state)
    else:
        trainlog.best_epoch = config.max_epochs
    trainlog.wall_clock = time.perf_counter() - start
    return net, trainlog


def evaluate_target(target_support, target_eval, net: PriorNet, config: EpisodeConfig, em_steps=None):
    """Fit a topic model to the target support and score its held-out words.

    Returns ``(perplexity, TopicModel)``.
    """
    support = _dense(target_support)
    _check_vocab(net, support.shape[1])
    T = config.test_em_steps if em_steps is None else em_steps
    priors = generate_priors(support, net, training=False)
    model = run_em(support, priors, T)
    return perplexity(target_eval, model), model
