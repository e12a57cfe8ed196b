"""Synthetic families of related corpora for desk-scale experiments.

A pool of sparse "archetype" topics is shared by the whole dataset.  Each
corpus draws its own K topics as perturbations of K archetypes, so corpora
are related without being identical, which is the setting few-shot prior
learning needs.
"""

from __future__ import annotations

import numpy as np

from .corpus import CorpusSet, CountMatrix


def generate_dataset(seed=0, n_train=30, n_valid=3, n_target=10, K=3, J=50, docs_per_corpus=40,
                     doc_length=80, n_archetypes=None, topic_sparsity=0.5, concentration=100.0,
                     doc_alpha=0.3) -> CorpusSet:
    """Return a CorpusSet with categories ``train-XX``, ``valid-XX``, ``target-XX``."""
    rng = np.random.default_rng(seed)
    G = n_archetypes or 2 * K
    archetypes = rng.dirichlet(np.full(J, topic_sparsity), size=G)
    vocab = [f"w{j:04d}" for j in range(J)]
    names, corpora = [], []
    groups = [("train", n_train), ("valid", n_valid), ("target", n_target)]
    for prefix, count in groups:
        for c in range(count):
            chosen = rng.choice(G, size=K, replace=False)
            topics = np.vstack([rng.dirichlet(concentration * archetypes[g] + 1e-3) for g in chosen])
            theta = rng.dirichlet(np.full(K, doc_alpha), size=docs_per_corpus)
            lengths = np.maximum(rng.poisson(doc_length, size=docs_per_corpus), 1)
            counts = np.vstack([rng.multinomial(n, p) for n, p in zip(lengths, theta @ topics)])
            names.append(f"{prefix}-{c:02d}")
            corpora.append(CountMatrix(counts))
    return CorpusSet(names, corpora, vocab)


def benchmark_categories(corpus_set: CorpusSet):
    """(training, validation, target) category names of a generated dataset."""
    pick = lambda p: [n for n in corpus_set.names if n.startswith(p + "-")]
    return pick("train"), pick("valid"), pick("target")
