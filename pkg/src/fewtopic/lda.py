"""LDA baselines: collapsed Gibbs sampling with symmetric Dirichlet
hyperparameters refitted by Minka's fixed-point iteration."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.special import digamma

from .corpus import CorpusSet, CountMatrix, DataSplit
from .errors import ContractError, DataError
from .topicmodel import TopicModel, as_model, perplexity

log = logging.getLogger(__name__)

HYPER_MIN = 1e-5
HYPER_MAX = 1e3


@dataclass(frozen=True)
class LDAConfig:
    sweeps: int = 1000
    burn_in: int = 500
    fit_every: int = 20
    alpha: float | None = None  # None -> 50 / K
    beta: float = 0.01
    fold_in_sweeps: int = 200
    max_fit_iter: int = 100
    fit_tol: float = 1e-6


@dataclass
class GibbsState:
    doc: np.ndarray  # per-token document index
    word: np.ndarray  # per-token term index
    z: np.ndarray  # per-token topic
    n_dk: np.ndarray
    n_kj: np.ndarray
    n_k: np.ndarray
    alpha: float
    beta: float

    @property
    def K(self) -> int:
        return self.n_kj.shape[0]

    @property
    def J(self) -> int:
        return self.n_kj.shape[1]

    def check(self) -> None:
        """Assert that the count tables are the marginals of the assignments."""
        n_docs = self.n_dk.shape[0]
        n_dk = np.zeros_like(self.n_dk)
        np.add.at(n_dk, (self.doc, self.z), 1)
        n_kj = np.zeros_like(self.n_kj)
        np.add.at(n_kj, (self.z, self.word), 1)
        assert n_dk.shape[0] == n_docs
        assert np.array_equal(n_dk, self.n_dk), "doc-topic counts out of sync"
        assert np.array_equal(n_kj, self.n_kj), "topic-term counts out of sync"
        assert np.array_equal(n_kj.sum(axis=1), self.n_k), "topic totals out of sync"

    def estimate(self) -> TopicModel:
        K, J = self.K, self.J
        theta = (self.n_dk + self.alpha) / (self.n_dk.sum(axis=1, keepdims=True) + K * self.alpha)
        phi = (self.n_kj + self.beta) / (self.n_k[:, None] + J * self.beta)
        return as_model(theta, phi)


def _tokens(X) -> tuple:
    if isinstance(X, CountMatrix):
        rows, cols, counts = X.triples()
        shape = X.shape
    else:
        arr = np.asarray(X, dtype=np.int64)
        rows, cols = np.nonzero(arr)
        counts = arr[rows, cols]
        shape = arr.shape
    return np.repeat(rows, counts).astype(np.int64), np.repeat(cols, counts).astype(np.int64), shape


@numba.njit(cache=True)
def _sweep(doc, word, z, n_dk, n_kj, n_k, alpha, beta, uniforms, update_phi):
    K, J = n_kj.shape
    p = np.empty(K)
    jbeta = J * beta
    for i in range(doc.shape[0]):
        d, w, k = doc[i], word[i], z[i]
        n_dk[d, k] -= 1
        if update_phi:
            n_kj[k, w] -= 1
            n_k[k] -= 1
        total = 0.0
        for t in range(K):
            total += (n_dk[d, t] + alpha) * (n_kj[t, w] + beta) / (n_k[t] + jbeta)
            p[t] = total
        u = uniforms[i] * total
        k = K - 1
        for t in range(K):
            if u < p[t]:
                k = t
                break
        z[i] = k
        n_dk[d, k] += 1
        if update_phi:
            n_kj[k, w] += 1
            n_k[k] += 1


def _init_state(doc, word, n_docs, K, J, alpha, beta, rng) -> GibbsState:
    z = rng.integers(K, size=len(doc)).astype(np.int64)
    n_dk = np.zeros((n_docs, K), dtype=np.int64)
    n_kj = np.zeros((K, J), dtype=np.int64)
    np.add.at(n_dk, (doc, z), 1)
    np.add.at(n_kj, (z, word), 1)
    return GibbsState(doc, word, z, n_dk, n_kj, n_kj.sum(axis=1), float(alpha), float(beta))


def _minka_terms(counts, totals, a):
    C = counts.shape[1]
    num = np.sum(digamma(counts + a) - digamma(a))
    den = C * np.sum(digamma(totals + C * a) - digamma(C * a))
    return num, den


def _slope(counts, totals, a) -> float:
    """``a`` times the derivative of the log evidence; zero exactly at a fixed point."""
    num, den = _minka_terms(counts, totals, a)
    return float(num - den)


def fit_symmetric_dirichlet(counts: np.ndarray, value: float, max_iter=100, tol=1e-6) -> float:
    """Fixed point of Minka's update for a symmetric Dirichlet-multinomial parameter.

    ``counts`` has one row per group (document or topic) and one column per
    component.  The update is ``a <- a * num(a) / den(a)`` with
    ``num = sum(digamma(n_ik + a) - digamma(a))`` and
    ``den = C * sum(digamma(n_i + C a) - digamma(C a))``.  Iterating it
    crawls sublinearly when the optimum is on or near a bound, so the fixed
    point ``num = den`` is located by bracketed root finding in log ``a``
    after checking the sign of ``num - den`` at both clamps.
    """
    counts = np.asarray(counts, dtype=np.float64)
    totals = counts.sum(axis=1)
    if totals.sum() == 0:
        return float(np.clip(value, HYPER_MIN, HYPER_MAX))
    if _slope(counts, totals, HYPER_MIN) <= 0:
        return HYPER_MIN
    if _slope(counts, totals, HYPER_MAX) >= 0:
        return HYPER_MAX
    root, info = brentq(lambda u: _slope(counts, totals, np.exp(u)), np.log(HYPER_MIN), np.log(HYPER_MAX),
                        xtol=tol, maxiter=max_iter, full_output=True, disp=False)
    if not info.converged:
        warnings.warn(f"Dirichlet fixed point did not converge in {max_iter} iterations", RuntimeWarning)
    return float(np.exp(root))


def fit_hyperparameters(state: GibbsState, max_iter=100, tol=1e-6) -> tuple:
    """Refit symmetric (alpha, beta) from the current count tables."""
    alpha = fit_symmetric_dirichlet(state.n_dk, state.alpha, max_iter, tol)
    beta = fit_symmetric_dirichlet(state.n_kj, state.beta, max_iter, tol)
    return alpha, beta


def gibbs_sample(X, K, rng, config: LDAConfig = LDAConfig(), check=False) -> GibbsState:
    doc, word, (n_docs, J) = _tokens(X)
    if len(doc) == 0:
        raise DataError("cannot run Gibbs sampling on a corpus with no tokens")
    if not config.sweeps > config.burn_in >= 0:
        raise ContractError("need sweeps > burn_in >= 0")
    alpha = config.alpha if config.alpha is not None else 50.0 / K
    if alpha <= 0 or config.beta <= 0:
        raise ContractError("Dirichlet hyperparameters must be positive")
    state = _init_state(doc, word, n_docs, K, J, alpha, config.beta, rng)
    for sweep in range(1, config.sweeps + 1):
        _sweep(state.doc, state.word, state.z, state.n_dk, state.n_kj, state.n_k,
               state.alpha, state.beta, rng.random(len(doc)), True)
        if check:
            state.check()
        if config.fit_every and sweep > config.burn_in and sweep % config.fit_every == 0:
            state.alpha, state.beta = fit_hyperparameters(state, config.max_fit_iter, config.fit_tol)
    return state


def gibbs_train(X, K, rng, config: LDAConfig = LDAConfig(), check=False) -> TopicModel:
    """Point estimates of (Theta, Phi) from the final state of one chain."""
    return gibbs_sample(X, K, rng, config, check).estimate()


def fold_in(X, trained: GibbsState, rng, sweeps=200) -> TopicModel:
    """Estimate Theta for new documents against the frozen topic-term counts."""
    doc, word, (n_docs, J) = _tokens(X)
    if J != trained.J:
        raise ContractError(f"documents have {J} terms, trained model has {trained.J}")
    if len(doc) == 0:
        raise DataError("no tokens to fold in")
    K = trained.K
    z = rng.integers(K, size=len(doc)).astype(np.int64)
    n_dk = np.zeros((n_docs, K), dtype=np.int64)
    np.add.at(n_dk, (doc, z), 1)
    n_kj, n_k = trained.n_kj.copy(), trained.n_k.copy()
    for _ in range(sweeps):
        _sweep(doc, word, z, n_dk, n_kj, n_k, trained.alpha, trained.beta, rng.random(len(doc)), False)
    theta = (n_dk + trained.alpha) / (n_dk.sum(axis=1, keepdims=True) + K * trained.alpha)
    return as_model(theta, trained.estimate().phi.data)


def lda_baseline(mode: str, split: DataSplit, K: int, rng, config: LDAConfig = LDAConfig()):
    """Held-out perplexity of LDAind (target support only) or LDAall
    (all training corpora, then fold-in of the target support).

    Returns ``(perplexity, TopicModel)``.
    """
    if mode == "ind":
        model = gibbs_train(split.target_support, K, rng, config)
    elif mode == "all":
        stacked = _stack(split.training)
        state = gibbs_sample(stacked, K, rng, config)
        model = fold_in(split.target_support, state, rng, config.fold_in_sweeps)
    else:
        raise ContractError(f"unknown LDA mode {mode!r}")
    return perplexity(split.target_eval, model), model


def _stack(corpus_set: CorpusSet) -> CountMatrix:
    return CountMatrix(sp.vstack([c.csr for c in corpus_set.corpora], format="csr"))
