import itertools
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fewtopic.corpus import (
    CorpusSet,
    CountMatrix,
    filter_corpus,
    load_corpus,
    make_target_split,
    read_docword,
    sample_documents,
    split_words,
    write_corpus,
)
from fewtopic.errors import DataError, ParseError


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def _dataset(tmp_path, docword, vocab, labels):
    return (
        _write(tmp_path / "docword.txt", docword),
        _write(tmp_path / "vocab.txt", vocab),
        _write(tmp_path / "labels.txt", labels),
    )


def test_docword_transcription(tmp_path):
    X = read_docword(_write(tmp_path / "d.txt", "2\n3\n2\n1 1 4\n2 3 1\n"))
    np.testing.assert_array_equal(X.dense(), [[4, 0, 0], [0, 0, 1]])


def test_empty_triples_with_nonzero_header(tmp_path):
    with pytest.raises(ParseError):
        read_docword(_write(tmp_path / "d.txt", "2\n3\n2\n"))


@pytest.mark.parametrize(
    "body, line",
    [
        ("1 1 4\n3 1 1\n", 5),  # doc out of range
        ("1 1 4\n1 4 1\n", 5),  # term out of range
        ("1 1 4\n1 1 2\n", 5),  # duplicate
        ("1 1 4\n1 x 2\n", 5),  # not an integer
        ("1 1\n2 2 2\n", 4),  # too few fields
    ],
)
def test_parse_errors_carry_line_numbers(tmp_path, body, line):
    with pytest.raises(ParseError) as err:
        read_docword(_write(tmp_path / "d.txt", "2\n3\n2\n" + body))
    assert err.value.line == line


def test_categories_become_corpora(tmp_path):
    paths = _dataset(tmp_path, "3\n2\n3\n1 1 1\n2 2 2\n3 1 3\n", "a\nb\n", "1\tx\n2\ty\n3\tx\n")
    cs = load_corpus(*paths)
    assert cs.D == 2
    assert cs.names == ["x", "y"]
    np.testing.assert_array_equal(cs["x"].dense(), [[1, 0], [3, 0]])
    assert cs.vocab == ["a", "b"]


def test_missing_file_is_reported(tmp_path):
    paths = _dataset(tmp_path, "1\n1\n1\n1 1 1\n", "a\n", "1\tx\n")
    with pytest.raises(FileNotFoundError, match="nope"):
        load_corpus(paths[0], tmp_path / "nope", paths[2])


def _oracle_filter(X, min_doc_terms, min_term_docs):
    """Largest (docs, terms) block meeting both thresholds, by enumeration."""
    N, J = X.shape
    best_docs, best_terms = set(), set()
    for dmask in itertools.product([0, 1], repeat=N):
        docs = [n for n in range(N) if dmask[n]]
        for tmask in itertools.product([0, 1], repeat=J):
            terms = [j for j in range(J) if tmask[j]]
            sub = X[np.ix_(docs, terms)] > 0
            if docs and terms and (sub.sum(axis=1) >= min_doc_terms).all() and (sub.sum(axis=0) >= min_term_docs).all():
                best_docs |= set(docs)
                best_terms |= set(terms)
    return sorted(best_docs), sorted(best_terms)


def test_filter_identity_with_unit_thresholds():
    X = CountMatrix(np.array([[1, 2, 0], [0, 1, 3]]))
    out = filter_corpus(CorpusSet(["a"], [X], ["p", "q", "r"]), 1, 1)
    assert out.corpora[0] == X
    assert out.vocab == ["p", "q", "r"]


def test_filter_drops_doc_below_distinct_term_threshold():
    J = 40
    X = np.ones((2, J), dtype=int)
    X[1, 29:] = 0  # 29 distinct terms
    out = filter_corpus(CorpusSet(["a"], [CountMatrix(X)], [str(j) for j in range(J)]), 30, 1)
    assert out.corpora[0].n_docs == 1


def test_filter_cascade_matches_enumeration_oracle():
    # removing doc 2 (too short) leaves term 3 in one document only
    X = np.array([
        [1, 1, 1, 0],
        [1, 1, 0, 1],
        [0, 0, 0, 5],
    ])
    cs = CorpusSet(["a"], [CountMatrix(X)], ["t0", "t1", "t2", "t3"])
    docs, terms = _oracle_filter(X, 2, 2)
    out = filter_corpus(cs, 2, 2)
    np.testing.assert_array_equal(out.corpora[0].dense(), X[np.ix_(docs, terms)])
    assert out.vocab == [f"t{j}" for j in terms]


@settings(max_examples=60, deadline=None)
@given(arrays(np.int64, (4, 4), elements=st.integers(0, 2)), st.integers(1, 3), st.integers(1, 3))
def test_filter_fixed_point_property(X, a, b):
    docs, terms = _oracle_filter(X, a, b)
    cs = CorpusSet(["a"], [CountMatrix(X)], [str(j) for j in range(4)])
    if not docs:
        with pytest.raises(DataError):
            filter_corpus(cs, a, b)
        return
    out = filter_corpus(cs, a, b)
    np.testing.assert_array_equal(out.corpora[0].dense(), X[np.ix_(docs, terms)])
    again = filter_corpus(out, a, b)
    assert again.corpora[0] == out.corpora[0] and again.vocab == out.vocab


def test_filter_uses_document_frequency_across_corpora():
    # each term appears in one document per corpus; globally in two
    a = CountMatrix(np.array([[1, 1]]))
    b = CountMatrix(np.array([[1, 1]]))
    out = filter_corpus(CorpusSet(["a", "b"], [a, b], ["x", "y"]), 1, 2)
    assert out.D == 2 and out.J == 2


def test_filter_drops_emptied_corpus_with_warning(caplog):
    keep = CountMatrix(np.array([[1, 1], [1, 1]]))
    gone = CountMatrix(np.array([[1, 0]]))
    with caplog.at_level(logging.WARNING):
        out = filter_corpus(CorpusSet(["keep", "gone"], [keep, gone], ["x", "y"]), 2, 1)
    assert out.names == ["keep"]
    assert "gone" in caplog.text


def test_roundtrip_through_writer(tmp_path, rng):
    corpora = [CountMatrix(rng.poisson(0.7, size=(n, 6))) for n in (3, 5)]
    cs = CorpusSet(["alpha", "beta"], corpora, [f"w{j}" for j in range(6)])
    write_corpus(cs, tmp_path / "d", tmp_path / "v", tmp_path / "l")
    back = load_corpus(tmp_path / "d", tmp_path / "v", tmp_path / "l")
    assert back.names == cs.names and back.vocab == cs.vocab
    for x, y in zip(back.corpora, cs.corpora):
        assert x == y
    write_corpus(back, tmp_path / "d2", tmp_path / "v2", tmp_path / "l2")
    assert (tmp_path / "d").read_bytes() == (tmp_path / "d2").read_bytes()


def test_split_degenerate_rates(rng):
    X = rng.poisson(3, size=(3, 7))
    s, q = split_words(X, 1.0, rng)
    np.testing.assert_array_equal(s, X)
    assert q.sum() == 0
    s, q = split_words(X, 0.0, rng)
    assert s.sum() == 0
    np.testing.assert_array_equal(q, X)


@settings(max_examples=50, deadline=None)
@given(arrays(np.int64, (3, 5), elements=st.integers(0, 50)), st.floats(0, 1), st.integers(0, 2**31))
def test_split_conserves_counts(X, R, seed):
    rng = np.random.default_rng(seed)
    s, q = split_words(X, R, rng)
    assert (s >= 0).all() and (q >= 0).all()
    np.testing.assert_array_equal(s + q, X)
    sc, qc = split_words(CountMatrix(X), R, rng)
    assert sc + qc == CountMatrix(X)


def test_split_binomial_mean():
    # Binomial(10000, 0.8): sd = 40, so the mean over 400 seeds has sd 2
    counts = [split_words(np.array([[10_000]]), 0.8, np.random.default_rng(s))[0][0, 0] for s in range(400)]
    assert abs(np.mean(counts) - 8000) <= 40
    assert 30 <= np.std(counts) <= 50


def test_target_split_heldout_zero(rng):
    X = CountMatrix(rng.poisson(2, size=(3, 8)))
    s, e = make_target_split(X, 0.0, rng)
    assert s == X and e.total == 0


def test_target_split_conservation_and_rate():
    big = np.full((4, 10), 25)  # 1000 tokens
    heldout = []
    for seed in range(200):
        s, e = make_target_split(big, 0.2, np.random.default_rng(seed))
        np.testing.assert_array_equal(s + e, big)
        heldout.append(e.sum())
    # Binomial(1000, 0.2) has sd 12.6; 25 is roughly two sd
    assert np.mean(np.abs(np.array(heldout) - 200) <= 25) >= 0.9
    assert abs(np.mean(heldout) - 200) <= 5


def test_target_split_gives_up_on_single_token(rng):
    with pytest.raises(DataError):
        make_target_split(np.array([[1]]), 0.2, rng)


def test_sample_documents_with_replacement_when_short(rng):
    X = CountMatrix(np.eye(2, dtype=int))
    out = sample_documents(X, 5, rng)
    assert out.n_docs == 5
