"""MAP estimation of a topic model under Dirichlet priors by EM.

All functions accept plain arrays or :class:`~fewtopic.diffcalc.Tensor`
objects for the priors and parameters, and return Tensors, so the same
code serves both test-time fitting and the differentiable unroll used
during training.

The Dirichlet density here has exponent ``alpha`` (not ``alpha - 1``), so
non-negative prior parameters give a proper prior whose mode is
``alpha / sum(alpha)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffcalc as dc
from .corpus import CountMatrix
from .diffcalc import EPS_LOG, Tensor
from .errors import ContractError, DimensionError

EPS_INIT = 1e-10
NORM_TOL = 1e-9
DEFAULT_TOL = 1e-6


@dataclass
class TopicModel:
    theta: Tensor  # N x K topic proportions
    phi: Tensor  # K x J word distributions

    @property
    def K(self) -> int:
        return self.phi.shape[0]

    @property
    def J(self) -> int:
        return self.phi.shape[1]

    @property
    def N(self) -> int:
        return self.theta.shape[0]


@dataclass
class PriorPair:
    alpha: Tensor  # N x K
    beta: Tensor  # K x J


@dataclass
class Responsibility:
    """Topic posteriors for the non-zero cells ``(rows[i], cols[i])`` of X."""

    rows: np.ndarray
    cols: np.ndarray
    gamma: Tensor  # nnz x K


class _Cells:
    """Non-zero cells of a count matrix in gather/scatter form."""

    __slots__ = ("rows", "cols", "counts", "shape")

    def __init__(self, X):
        if isinstance(X, _Cells):
            self.rows, self.cols, self.counts, self.shape = X.rows, X.cols, X.counts, X.shape
            return
        if isinstance(X, CountMatrix):
            rows, cols, counts = X.triples()
            shape = X.shape
        else:
            arr = np.asarray(X.data if isinstance(X, Tensor) else X, dtype=np.float64)
            if arr.ndim != 2:
                raise DimensionError(f"count matrix must be 2-D, got shape {arr.shape}")
            rows, cols = np.nonzero(arr)
            counts = arr[rows, cols]
            shape = arr.shape
        self.rows = np.asarray(rows, dtype=np.intp)
        self.cols = np.asarray(cols, dtype=np.intp)
        self.counts = np.asarray(counts, dtype=np.float64).reshape(-1, 1)
        self.shape = shape


def _check_shapes(cells: _Cells, model: TopicModel) -> None:
    N, J = cells.shape
    if model.theta.shape[0] != N or model.phi.shape[1] != J or model.theta.shape[1] != model.phi.shape[0]:
        raise DimensionError(
            f"counts {cells.shape} incompatible with theta {model.theta.shape} and phi {model.phi.shape}"
        )


def _cell_probs(cells: _Cells, model: TopicModel) -> Tensor:
    # nnz x K products theta_nk * phi_kj at each non-zero cell
    return dc.take_rows(model.theta, cells.rows) * dc.take_rows(dc.transpose(model.phi), cells.cols)


def _normalize_rows(numer: Tensor) -> Tensor:
    numer = numer + EPS_INIT
    return numer / numer.sum(axis=1)


def as_model(theta, phi) -> TopicModel:
    return TopicModel(dc.as_tensor(theta), dc.as_tensor(phi))


def as_priors(alpha, beta) -> PriorPair:
    return PriorPair(dc.as_tensor(alpha), dc.as_tensor(beta))


def log_likelihood(X, model: TopicModel) -> Tensor:
    """Sum over cells of ``x_nj * log sum_k theta_nk phi_kj``."""
    cells = _Cells(X)
    _check_shapes(cells, model)
    if len(cells.rows) == 0:
        return dc.Tensor(0.0)
    mix = _cell_probs(cells, model).sum(axis=1)
    return (dc.log(mix) * cells.counts).sum()


def _prior_terms(model: TopicModel, priors: PriorPair) -> Tensor:
    if priors.alpha.shape != model.theta.shape or priors.beta.shape != model.phi.shape:
        raise DimensionError(
            f"priors {priors.alpha.shape}/{priors.beta.shape} do not match model "
            f"{model.theta.shape}/{model.phi.shape}"
        )
    return (priors.alpha * dc.log(model.theta)).sum() + (priors.beta * dc.log(model.phi)).sum()


def log_posterior(X, model: TopicModel, priors: PriorPair) -> Tensor:
    """Log-likelihood plus Dirichlet log-prior terms, constants dropped."""
    return log_likelihood(X, model) + _prior_terms(model, priors)


def lower_bound_q(X, model: TopicModel, resp: Responsibility, priors: PriorPair) -> Tensor:
    """Jensen lower bound of :func:`log_posterior` for responsibilities ``resp``."""
    cells = _Cells(X)
    _check_shapes(cells, model)
    g = resp.gamma.data
    if g.size and (np.any(g < 0) or np.max(np.abs(g.sum(axis=1) - 1.0)) > NORM_TOL):
        raise ContractError("responsibilities must be non-negative and sum to one over topics")
    if len(resp.rows) != len(cells.rows) or np.any(resp.rows != cells.rows) or np.any(resp.cols != cells.cols):
        raise ContractError("responsibilities do not cover the non-zero cells of X")
    prior = _prior_terms(model, priors)
    if len(cells.rows) == 0:
        return prior
    gamma = resp.gamma
    joint = dc.log(_cell_probs(cells, model)) - dc.log(gamma)
    return ((gamma * joint).sum(axis=1) * cells.counts).sum() + prior


def init_params(priors: PriorPair) -> TopicModel:
    """Start EM at the mode of the Dirichlet priors."""
    return TopicModel(_normalize_rows(priors.alpha), _normalize_rows(priors.beta))


def e_step(X, model: TopicModel) -> Responsibility:
    cells = _Cells(X)
    _check_shapes(cells, model)
    probs = _cell_probs(cells, model)
    gamma = probs / dc.clip_min(probs.sum(axis=1), EPS_LOG)
    return Responsibility(cells.rows, cells.cols, gamma)


def m_step(X, resp: Responsibility, priors: PriorPair) -> TopicModel:
    cells = _Cells(X)
    N, J = cells.shape
    weighted = resp.gamma * cells.counts
    theta = _normalize_rows(dc.segment_sum(weighted, cells.rows, N) + priors.alpha)
    phi = _normalize_rows(dc.transpose(dc.segment_sum(weighted, cells.cols, J)) + priors.beta)
    return TopicModel(theta, phi)


def run_em(X, priors: PriorPair, T: int, tol: float | None = None, trace: list | None = None) -> TopicModel:
    """Initialize at the prior mode, then alternate E and M steps.

    With ``tol=None`` exactly ``T`` steps run.  Otherwise ``T`` is a step
    cap and iteration stops once the relative change of the log posterior
    drops below ``tol``.  If ``trace`` is a list, the model after
    initialization and after every step is appended to it.
    """
    if T < 0:
        raise ContractError(f"number of EM steps must be >= 0, got {T}")
    cells = _Cells(X)
    model = init_params(priors)
    if trace is not None:
        trace.append(model)
    previous = None
    if tol is not None:
        previous = log_posterior(cells, model, priors).item()
    for _ in range(T):
        model = m_step(cells, e_step(cells, model), priors)
        if trace is not None:
            trace.append(model)
        if tol is not None:
            current = log_posterior(cells, model, priors).item()
            if abs(current - previous) <= tol * max(abs(previous), 1.0):
                break
            previous = current
    return model


def perplexity(X_eval, model: TopicModel) -> float:
    """``exp(-log_likelihood / token count)`` on held-out counts."""
    cells = _Cells(X_eval)
    total = cells.counts.sum()
    if total <= 0:
        raise ContractError("perplexity needs at least one held-out token")
    return float(np.exp(-log_likelihood(cells, model).item() / total))


def top_terms(model: TopicModel, k: int, m: int) -> list:
    """Indices of the ``m`` most probable terms of topic ``k`` (ties: lower index first)."""
    phi_k = np.asarray(model.phi.data[k])
    if not 1 <= m <= len(phi_k):
        raise ContractError(f"m must lie in [1, {len(phi_k)}], got {m}")
    order = np.lexsort((np.arange(len(phi_k)), -phi_k))
    return [int(j) for j in order[:m]]
