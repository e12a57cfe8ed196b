"""Networks that map a handful of support documents to Dirichlet priors.

Four feed-forward networks, each with two ReLU hidden layers:

* ``fR`` (J -> H -> H -> H) and ``gR`` (H -> H -> H -> M) form a
  mean-pooled set encoder giving the corpus representation ``r``;
* ``fA`` ([x_n, r] -> H -> H -> K, softplus) gives per-document alpha;
* ``fB`` ([X^T alpha_k, r] -> H -> H -> J, softplus) gives per-topic beta.

In ``dir`` mode the networks are replaced by one free vector and one free
matrix that pass through softplus and are shared by every corpus.
"""

from __future__ import annotations

import numpy as np

from . import diffcalc as dc
from .config import EpisodeConfig
from .corpus import CountMatrix
from .diffcalc import Tensor
from .errors import ConfigError, ContractError, DimensionError
from .topicmodel import PriorPair

DIR_INIT = 0.1
DIR_JITTER = 0.01
# shrinks the output layer so initial priors are weak rather than dominated by random weights
OUTPUT_INIT_SCALE = 0.1

_STREAM = {"fR": 0, "gR": 1, "fA": 2, "fB": 3, "dir": 4}


def _layer_sizes(name, J, K, M, H, use_rep):
    extra = M if use_rep else 0
    return {
        "fR": [J, H, H, H],
        "gR": [H, H, H, M],
        "fA": [J + extra, H, H, K],
        "fB": [J + extra, H, H, J],
    }[name]


class PriorNet:
    """Parameter container for the prior generators.

    ``params`` maps names such as ``"fA.1.W"`` to leaf tensors, in a fixed
    declaration order that serialization relies on.
    """

    def __init__(self, J, K, M=256, hidden=256, prior_mode="nn", use_representation=True,
                 log_features=False, seed=0, dropout=0.1, variant=None, init=True):
        if prior_mode not in ("nn", "dir"):
            raise ConfigError(f"unknown prior mode {prior_mode!r}")
        self.J, self.K, self.M, self.hidden = J, K, M, hidden
        self.prior_mode = prior_mode
        self.use_representation = use_representation and prior_mode == "nn"
        self.log_features = log_features
        self.seed = seed
        self.dropout = dropout
        self.variant = variant or self._default_variant()
        self.params = {}
        for name, shape in self.declared_shapes():
            self.params[name] = dc.parameter(np.zeros(shape), name=name)
        if init:
            self._initialize()

    @classmethod
    def from_config(cls, J, config: EpisodeConfig, variant=None) -> "PriorNet":
        return cls(J, config.n_topics, M=config.rep_dim, hidden=config.hidden,
                   prior_mode=config.prior_mode, use_representation=config.use_representation,
                   log_features=config.log_features, seed=config.seed, dropout=config.dropout,
                   variant=variant)

    def _default_variant(self):
        if self.prior_mode == "dir":
            return "dir"
        return "full" if self.use_representation else "nn"

    def networks(self):
        if self.prior_mode == "dir":
            return []
        names = ["fR", "gR"] if self.use_representation else []
        return names + ["fA", "fB"]

    def declared_shapes(self):
        """(name, shape) pairs in declaration order."""
        if self.prior_mode == "dir":
            return [("dir.a", (1, self.K)), ("dir.b", (self.K, self.J))]
        out = []
        for net in self.networks():
            sizes = _layer_sizes(net, self.J, self.K, self.M, self.hidden, self.use_representation)
            for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
                out.append((f"{net}.{i}.W", (fan_in, fan_out)))
                out.append((f"{net}.{i}.b", (1, fan_out)))
        return out

    def _initialize(self):
        if self.prior_mode == "dir":
            rng = np.random.default_rng([self.seed, _STREAM["dir"]])
            base = float(dc.softplus_inverse(DIR_INIT))
            # jitter breaks the topic symmetry that EM would otherwise preserve
            for name in ("dir.a", "dir.b"):
                p = self.params[name]
                p.data[...] = base + DIR_JITTER * rng.standard_normal(p.shape)
            return
        for net in self.networks():
            rng = np.random.default_rng([self.seed, _STREAM[net]])
            for name, p in self.params.items():
                if name.startswith(net + ".") and name.endswith(".W"):
                    fan_in = p.shape[0]
                    scale = np.sqrt(2.0 / max(fan_in, 1))
                    if name == f"{net}.2.W":
                        scale *= OUTPUT_INIT_SCALE
                    p.data[...] = rng.standard_normal(p.shape) * scale

    def parameters(self) -> list:
        return list(self.params.values())

    def state(self) -> dict:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state(self, state: dict) -> None:
        for k, v in state.items():
            if self.params[k].shape != v.shape:
                raise DimensionError(f"{k}: expected {self.params[k].shape}, got {v.shape}")
            self.params[k].data[...] = v

    def copy(self) -> "PriorNet":
        clone = PriorNet(self.J, self.K, self.M, self.hidden, self.prior_mode, self.use_representation,
                         self.log_features, self.seed, self.dropout, self.variant, init=False)
        clone.load_state(self.state())
        return clone


def _mlp(net: PriorNet, name: str, x: Tensor, out_activation, training, rng) -> Tensor:
    depth = sum(1 for k in net.params if k.startswith(name + ".") and k.endswith(".W"))
    h = x
    for i in range(depth):
        W, b = net.params[f"{name}.{i}.W"], net.params[f"{name}.{i}.b"]
        if i < depth - 1:
            h = dc.dense_layer(h, W, b, "relu")
            h = dc.dropout(h, net.dropout, training, rng)
        else:
            h = dc.dense_layer(h, W, b, out_activation)
    return h


def _features(X, net: PriorNet) -> np.ndarray:
    arr = X.dense() if isinstance(X, CountMatrix) else np.asarray(X, dtype=np.float64)
    arr = arr.astype(np.float64)
    if arr.ndim != 2 or arr.shape[1] != net.J:
        raise DimensionError(f"support has shape {arr.shape}, network expects {net.J} terms")
    return np.log1p(arr) if net.log_features else arr


def _broadcast_rows(r: Tensor, n: int) -> Tensor:
    return dc.matmul(dc.Tensor(np.ones((n, 1))), r)


def encode_corpus(X_support, net: PriorNet, training=False, rng=None) -> Tensor:
    """Permutation-invariant corpus representation, shape ``1 x M``."""
    if not net.use_representation:
        raise ConfigError("this network has no corpus encoder")
    x = _features(X_support, net)
    if x.shape[0] == 0:
        raise ContractError("corpus encoder needs at least one document")
    pooled = _mlp(net, "fR", dc.Tensor(x), "identity", training, rng).mean(axis=0)
    return _mlp(net, "gR", pooled, "identity", training, rng)


def generate_alpha(X_support, r, net: PriorNet, training=False, rng=None) -> Tensor:
    x = dc.Tensor(_features(X_support, net))
    inputs = x if r is None else dc.concat([x, _broadcast_rows(r, x.shape[0])], axis=1)
    return _mlp(net, "fA", inputs, "softplus", training, rng)


def generate_beta(X_support, alpha, r, net: PriorNet, training=False, rng=None) -> Tensor:
    x = dc.Tensor(_features(X_support, net))
    alpha = dc.as_tensor(alpha)
    if alpha.shape[0] != x.shape[0]:
        raise DimensionError(f"alpha has {alpha.shape[0]} rows for {x.shape[0]} documents")
    pooled = dc.matmul(dc.transpose(alpha), x)  # K x J, independent of N
    inputs = pooled if r is None else dc.concat([pooled, _broadcast_rows(r, pooled.shape[0])], axis=1)
    return _mlp(net, "fB", inputs, "softplus", training, rng)


def generate_priors(X_support, net: PriorNet, training=False, rng=None) -> PriorPair:
    """Dirichlet parameters (alpha N x K, beta K x J) for one support set."""
    if net.prior_mode == "dir":
        n = X_support.n_docs if isinstance(X_support, CountMatrix) else np.shape(X_support)[0]
        alpha = _broadcast_rows(dc.softplus(net.params["dir.a"]), n)
        return PriorPair(alpha, dc.softplus(net.params["dir.b"]))
    r = encode_corpus(X_support, net, training, rng) if net.use_representation else None
    alpha = generate_alpha(X_support, r, net, training, rng)
    beta = generate_beta(X_support, alpha, r, net, training, rng)
    return PriorPair(alpha, beta)
