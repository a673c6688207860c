import json
import random

import numpy as np
import pytest

from otparse.builder import SentimentQuadruple as Q
from otparse.evaluate import (EvalReport, bench_decode, completeness, eval_corpus, eval_quads, is_complete,
                              situation_histogram)
from otparse.fixtures import CATEGORIES, TAGS, generate_corpus
from otparse.trees import OpinionTree

A = Q((0, 1), "FOOD#QUALITY", (2, 3), "positive")
B = Q((4, 5), "FOOD#PRICES", (6, 7), "negative")
C = Q(None, "SERVICE#GENERAL", (1, 2), "neutral")


def test_perfect_and_total_miss():
    r = eval_quads([A, B], [A, B])
    assert (r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0)
    r = eval_quads([A], [B])
    assert (r.precision, r.recall, r.f1, r.tp) == (0.0, 0.0, 0.0, 0)


def test_half_overlap():
    r = eval_quads([A, B], [A, C])
    assert (r.tp, r.fp, r.fn) == (1, 1, 1)
    assert (r.precision, r.recall, r.f1) == (0.5, 0.5, 0.5)


def test_multiset_matching():
    r = eval_quads([A], [A, A])
    assert (r.tp, r.fp, r.fn) == (1, 0, 1)
    r = eval_quads([A, A], [A, A])
    assert r.f1 == 1.0


def test_implicit_terms_compare_equal():
    assert eval_quads([Q(None, "X#Y", None, "positive")], [Q(None, "X#Y", None, "positive")]).f1 == 1.0
    assert eval_quads([Q(None, "X#Y", (0, 1), "positive")], [Q((0, 1), "X#Y", (0, 1), "positive")]).tp == 0


def test_metric_algebra():
    rng = random.Random(0)
    pool = [Q((i, i + 1), CATEGORIES[i % 5], (i + 1, i + 2), "positive") for i in range(12)]
    for _ in range(300):
        gold = rng.sample(pool, rng.randint(0, 6))
        pred = rng.sample(pool, rng.randint(0, 6))
        r = eval_quads(pred, gold)
        assert r.tp + r.fp == len(pred) and r.tp + r.fn == len(gold)
        assert (r.f1 == 0) == (r.tp == 0)
        assert (r.f1 == 1) == (r.fp == 0 and r.fn == 0 and r.tp > 0)
        if r.precision + r.recall:
            assert r.f1 == pytest.approx(2 * r.precision * r.recall / (r.precision + r.recall))
        missing = [q for q in gold if q not in pred]
        if missing:
            assert eval_quads(pred + [missing[0]], gold).f1 >= r.f1


def test_eval_corpus_micro_average():
    r = eval_corpus([[A], [B]], [[A], [C]])
    assert (r.tp, r.fp, r.fn) == (1, 1, 1)
    with pytest.raises(ValueError):
        eval_corpus([[A]], [])


def test_completeness_counts(decoder, pruned):
    rng = np.random.default_rng(0)
    trees = [decoder.decode(rng.normal(size=(n + 1, n + 1, len(decoder.labels))))[0] for n in range(2, 11)]
    assert completeness(trees, pruned) == 1.0
    broken = OpinionTree("S", (2, 6), (OpinionTree("Q", (2, 6)),))
    assert completeness(trees + [broken], pruned) == pytest.approx(0.9)
    assert completeness([], pruned) == 1.0
    assert not is_complete(None, pruned)


def test_histogram_fixed_order(grammar):
    corpus = generate_corpus(50, seed=1, grammar=grammar)
    hist = situation_histogram([(s.tokens, s.quads) for s in corpus], grammar)
    assert list(hist)[:5] == [t.value for t in TAGS]
    assert sum(hist.values()) == 50
    assert hist["unparseable"] == 0


class FakeClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self):
        return self.now


class CubicDecoder:
    def __init__(self, clock, power):
        self.clock, self.power = clock, power

    def decode(self, table):
        self.clock.now += 1e-9 * (table.shape[0] - 1) ** self.power


def test_bench_empty():
    assert bench_decode([], None) == {}


@pytest.mark.parametrize("power", [2.0, 3.0])
def test_bench_exponent_fit(power):
    clock = FakeClock()
    tables = [np.zeros((n + 1, n + 1, 1)) for n in (8, 16, 32, 64) for _ in range(2)]
    stats = bench_decode(tables, CubicDecoder(clock, power), repeats=3, clock=clock)
    assert stats["exponent"] == pytest.approx(power)
    assert stats["sentences"] == 8 and stats["repeats"] == 3
    assert stats["run_spread"] == pytest.approx(0.0, abs=1e-12)
    assert stats["p50"] <= stats["p95"]


def test_bench_real_decoder(decoder):
    rng = np.random.default_rng(0)
    tables = [rng.normal(size=(n + 1, n + 1, len(decoder.labels))) for n in (4, 8)]
    stats = bench_decode(tables, decoder, repeats=2)
    assert stats["mean"] > 0 and "exponent" in stats


def test_report_forms():
    r = eval_quads([A, B], [A, C])
    r.completeness = 1.0
    r.situation_histogram = {"basic": 3}
    text = r.to_text()
    assert text.splitlines()[:3] == ["precision\t0.500000", "recall\t0.500000", "f1\t0.500000"]
    assert "completeness\t1.000000" in text and "situation.basic\t3" in text
    back = json.loads(r.to_json())
    assert EvalReport(**back) == r
