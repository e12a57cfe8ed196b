import numpy as np
import pytest

from fewtopic.cli import main
from fewtopic.corpus import CorpusSet, CountMatrix, load_corpus, write_corpus
from fewtopic.errors import ConfigError
from fewtopic.experiment import parse_config_text, summarize
from fewtopic.store import save_topicmodel
from fewtopic.topicmodel import as_model

TINY = """\
docword = docword.txt   # paths are relative to this file
vocab = vocab.txt
labels = labels.txt
method = dir
dataset = synthetic
validation = valid-00, valid-01
targets = target-00
n_topics = 3
hidden = 8
rep_dim = 4
max_epochs = 10
val_episodes = 3
"""


@pytest.fixture
def synthetic(tmp_path):
    assert main(["gen-synthetic", "--out", str(tmp_path), "--seed", "4", "--train", "4", "--valid", "2",
                 "--targets", "2", "--docs", "10", "--doc-length", "30"]) == 0
    (tmp_path / "tiny.cfg").write_text(TINY, encoding="utf-8")
    return tmp_path


def _rows(path):
    return [l.split("\t") for l in path.read_text(encoding="utf-8").splitlines() if not l.startswith("#")]


def test_gen_synthetic_writes_dataset(synthetic):
    cs = load_corpus(synthetic / "docword.txt", synthetic / "vocab.txt", synthetic / "labels.txt")
    assert cs.D == 8 and cs.J == 50
    assert (synthetic / "experiment.cfg").exists()


def test_run_single_repetition(synthetic, capsys):
    out = synthetic / "out"
    assert main(["run", "--config", str(synthetic / "tiny.cfg"), "--out", str(out)]) == 0
    rows = _rows(out / "results.tsv")
    assert rows[0] == ["method", "dataset", "target", "repetition", "perplexity", "train_seconds", "eval_seconds"]
    assert len(rows) == 3
    assert rows[1][:4] == ["dir", "synthetic", "target-00", "0"]
    assert rows[2][2:4] == ["ALL", "mean±se"] and rows[2][4].startswith(rows[1][4])
    raw = (out / "results.tsv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")


def test_method_and_seed_overrides(synthetic):
    cfg = synthetic / "tiny.cfg"
    assert main(["run", "--config", str(cfg), "--out", str(synthetic / "a"), "--method", "lda-ind"]) == 0
    assert _rows(synthetic / "a" / "results.tsv")[1][0] == "lda-ind"
    main(["run", "--config", str(cfg), "--out", str(synthetic / "b"), "--seed", "9"])
    main(["run", "--config", str(cfg), "--out", str(synthetic / "c")])
    assert _rows(synthetic / "b" / "results.tsv")[1][4] != _rows(synthetic / "c" / "results.tsv")[1][4]


def test_parallel_repetitions_keep_order(synthetic, monkeypatch):
    cfg = synthetic / "tiny.cfg"
    cfg.write_text(TINY + "repetitions = 3\n", encoding="utf-8")
    assert main(["run", "--config", str(cfg), "--out", str(synthetic / "seq")]) == 0
    monkeypatch.setenv("FEWSHOT_THREADS", "2")
    assert main(["run", "--config", str(cfg), "--out", str(synthetic / "par")]) == 0
    assert (synthetic / "seq" / "results.tsv").read_bytes() == (synthetic / "par" / "results.tsv").read_bytes()
    assert [r[3] for r in _rows(synthetic / "par" / "results.tsv")[1:4]] == ["0", "1", "2"]


def test_failed_repetition_is_reported(synthetic):
    cfg = synthetic / "tiny.cfg"
    # a target corpus without tokens cannot be split into support and held-out words
    cs = load_corpus(synthetic / "docword.txt", synthetic / "vocab.txt", synthetic / "labels.txt")
    corpora = [CountMatrix(np.zeros((1, cs.J), dtype=int)) if n == "target-00" else c for n, c in zip(cs.names, cs.corpora)]
    write_corpus(CorpusSet(cs.names, corpora, cs.vocab), synthetic / "docword.txt", synthetic / "vocab.txt",
                 synthetic / "labels.txt")
    assert main(["run", "--config", str(cfg), "--out", str(synthetic / "bad")]) == 1
    rows = _rows(synthetic / "bad" / "results.tsv")
    assert rows[1][4].startswith("ERROR")


def test_run_missing_data_file(synthetic, capsys):
    (synthetic / "vocab.txt").unlink()
    assert main(["run", "--config", str(synthetic / "tiny.cfg"), "--out", str(synthetic / "o")]) == 2
    assert "vocab.txt" in capsys.readouterr().err


def test_prepare_identity_thresholds(synthetic, capsys):
    out = synthetic / "prepared"
    args = ["prepare", "--docword", str(synthetic / "docword.txt"), "--vocab", str(synthetic / "vocab.txt"),
            "--labels", str(synthetic / "labels.txt"), "--out", str(out)]
    assert main(args + ["--min-doc-terms", "1", "--min-term-docs", "1"]) == 0
    assert (out / "docword.txt").read_bytes() == (synthetic / "docword.txt").read_bytes()
    summary = capsys.readouterr().out.splitlines()
    assert summary[0] == "D\t8" and summary[1] == "J\t50"
    assert "target-00\t10" in summary


def test_prepare_missing_vocab(synthetic, capsys):
    missing = synthetic / "nothere.txt"
    code = main(["prepare", "--docword", str(synthetic / "docword.txt"), "--vocab", str(missing),
                 "--labels", str(synthetic / "labels.txt"), "--out", str(synthetic / "p")])
    assert code == 2
    assert "nothere.txt" in capsys.readouterr().err


@pytest.fixture
def topic_file(tmp_path):
    model = as_model([[0.5, 0.5]], [[0.5, 0.3, 0.2, 0.0], [0.1, 0.1, 0.1, 0.7]])
    path = tmp_path / "topics.bin"
    save_topicmodel(path, model, ["apple", "berry", "cherry", "date"])
    return path


def test_topics_listing(topic_file, capsys):
    assert main(["topics", str(topic_file), "--m", "3"]) == 0
    first = capsys.readouterr().out
    assert first.splitlines() == ["Topic1: apple berry cherry", "Topic2: date apple berry"]
    main(["topics", str(topic_file), "--m", "3"])
    assert capsys.readouterr().out == first


def test_topics_clamps_to_vocabulary(topic_file, capsys):
    assert main(["topics", str(topic_file), "--m", "99"]) == 0
    assert all(len(line.split()) == 5 for line in capsys.readouterr().out.splitlines())


def test_topics_corrupt_file(topic_file):
    topic_file.write_bytes(topic_file.read_bytes()[:-5])
    assert main(["topics", str(topic_file)]) == 2


def test_config_parsing(tmp_path):
    cfg = parse_config_text(TINY + "learning_rate = 0.01\nlog_features = yes\nlda_sweeps = 50\n", tmp_path)
    assert cfg.docword == tmp_path / "docword.txt"
    assert cfg.validation == ["valid-00", "valid-01"]
    assert cfg.episode.learning_rate == 0.01 and cfg.episode.log_features
    assert cfg.lda.sweeps == 50
    for bad in ("colour = blue\n", "method = maml\n", "repetitions = 0\n", "n_topics = x\n", "just words\n"):
        with pytest.raises(ConfigError):
            parse_config_text(TINY + bad, tmp_path)


def test_standard_error():
    mean, se = summarize([1.0, 2.0, 3.0])
    assert mean == 2.0 and se == pytest.approx(1 / np.sqrt(3))
    assert summarize([4.0]) == (4.0, 0.0)
