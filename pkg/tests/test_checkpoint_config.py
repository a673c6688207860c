import json
import struct

import pytest

from otparse.checkpoint import (MAGIC, METRICS_HEADER, CheckpointError, load_checkpoint, read_metrics,
                                save_checkpoint, write_metrics)
from otparse.config import ConfigError, load_config, parse_config, read_categories
from otparse.grammar import build_grammar, build_label_set, dump_grammar
from otparse.scorer import Scorer, ScorerParams, Vocab
from otparse.trainer import EpochRecord


@pytest.fixture
def saved(tmp_path, grammar):
    vocab = Vocab(["pizza", "great", "é"], buckets=3)
    params = ScorerParams.init(len(vocab), 6, 7, len(build_label_set(grammar)), seed=11)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, Scorer(params, vocab), grammar, {"epochs": 3})
    return path, params, vocab


def test_checkpoint_round_trip(saved, grammar):
    path, params, vocab = saved
    ck = load_checkpoint(path)
    for name, arr in params.arrays().items():
        assert arr.tobytes() == getattr(ck.scorer.params, name).tobytes()
    assert ck.scorer.vocab.words == vocab.words and len(ck.scorer.vocab) == len(vocab)
    assert ck.scorer.params.seed == 11
    assert dump_grammar(ck.grammar) == dump_grammar(grammar)
    assert ck.metadata["epochs"] == 3


def test_checkpoint_header(saved):
    path, params, _ = saved
    data = path.read_bytes()
    magic, version, d, hidden, n_labels, vsize, seed, mlen = struct.unpack_from("<8sIqqqqqQ", data)
    assert (magic, version, d, hidden, n_labels, vsize, seed) == (MAGIC, 1, 6, 7, params.n_labels, params.vocab_size, 11)
    json.loads(data[60:60 + mlen])
    assert len(data) == 60 + mlen + 8 * sum(a.size for a in params.arrays().values())


@pytest.mark.parametrize("mutate", [
    lambda b: b"XXXXXXXX" + b[8:],
    lambda b: b[:30],
    lambda b: b[:-8],
    lambda b: b + b"\0" * 8,
    lambda b: b[:8] + struct.pack("<I", 9) + b[12:],
])
def test_checkpoint_rejects_damage(saved, tmp_path, mutate):
    path = saved[0]
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)


def test_checkpoint_label_mismatch(tmp_path, grammar):
    params = ScorerParams.init(5, 4, 4, 3, seed=0)
    with pytest.raises(CheckpointError):
        save_checkpoint(tmp_path / "x", Scorer(params, Vocab(["a", "b"])), grammar)


def test_metrics_round_trip(tmp_path):
    hist = [EpochRecord(1, 12.5, 0.0), EpochRecord(2, 0.1 + 0.2, 1 / 3)]
    p = tmp_path / "m.tsv"
    write_metrics(p, hist)
    assert p.read_text().startswith(METRICS_HEADER + "\n")
    assert read_metrics(p) == [(1, 12.5, 0.0), (2, 0.1 + 0.2, 1 / 3)]
    p.write_text("epoch\tloss\n")
    with pytest.raises(ValueError):
        read_metrics(p)


def test_config_full(tmp_path):
    (tmp_path / "cats.txt").write_text("# restaurant\nfood#quality\n\nSERVICE#GENERAL\n")
    (tmp_path / "train.jsonl").write_text("")
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({
        "seed": 4,
        "grammar": {"categories_file": "cats.txt", "families": ["one_to_many"]},
        "scorer": {"d": 8, "hidden": 16},
        "train": {"epochs": 3, "optimizer": "adam"},
        "paths": {"train": "train.jsonl", "checkpoint": "out/m.ckpt"},
        "polarity_codes": {"0": "negative", "1": "neutral", "2": "positive"},
    }))
    cfg = load_config(cfg_path)
    assert cfg.grammar.categories == ["FOOD#QUALITY", "SERVICE#GENERAL"]
    assert cfg.grammar.families == frozenset({"one_to_many"})
    assert (cfg.scorer.d, cfg.train.epochs, cfg.train.seed, cfg.train.optimizer) == (8, 3, 4, "adam")
    assert cfg.paths["train"] == tmp_path / "train.jsonl"
    assert cfg.paths["checkpoint"] == tmp_path / "out/m.ckpt"


@pytest.mark.parametrize("obj", [
    {"sed": 1},
    {"train": {"epoch": 3}},
    {"scorer": {"width": 3}},
    {"grammar": {"families": ["teleport"]}},
    {"grammar": {"categories": ["A#B"], "categories_file": "x"}},
    {"paths": {"train": "missing.jsonl"}},
    {"paths": {"output": "x"}},
    {"train": {"learning_rate": -1}},
    {"seed": "zero"},
    {"grammar": {"categories_file": "nope.txt"}},
])
def test_config_rejects(tmp_path, obj):
    with pytest.raises(ConfigError):
        parse_config(obj, tmp_path)


def test_config_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(p)


def test_defaults():
    cfg = parse_config({})
    assert cfg.train.learning_rate == 0.05 and cfg.train.batch_size == 8 and cfg.train.epochs == 500
    assert (cfg.scorer.d, cfg.scorer.hidden) == (64, 128)
    assert cfg.grammar.categories is None


def test_read_categories_keeps_hash(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("  # comment\nfood#prices\n")
    assert read_categories(p) == ["FOOD#PRICES"]
    assert build_grammar(read_categories(p)).categories == ("FOOD#PRICES",)
