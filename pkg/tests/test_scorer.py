import numpy as np
import pytest

from otparse.grammar import FA, FO
from otparse.scorer import (PARAM_ORDER, Scorer, ScorerParams, Vocab, encode, positions, score_all_spans,
                            score_span, span_repr)
from otparse.selfcheck import check_gradients


@pytest.fixture
def params():
    return ScorerParams.init(20, 8, 12, 9, seed=3)


def reference_encode(ids, p):
    """Second implementation, written out row by row."""
    d = p.d
    x = np.array([p.embed[t] * np.sqrt(d) for t in ids])
    for t in range(len(ids)):
        for k in range(d):
            rate = 10000.0 ** (-(2 * (k // 2)) / d)
            x[t, k] += np.sin((t + 1) * rate) if k % 2 == 0 else np.cos((t + 1) * rate)
    q, k_, v = x @ p.Wq, x @ p.Wk, x @ p.Wv
    h = [p.boundary]
    for t in range(len(ids)):
        logits = np.array([q[t] @ k_[u] for u in range(len(ids))]) / np.sqrt(d)
        w = np.exp(logits - logits.max())
        w /= w.sum()
        h.append(x[t] + (w @ v) @ p.Wo)
    return np.array(h)


def test_vocab_ids():
    v = Vocab(["pizza", "great"])
    assert v.words[:3] == [Vocab.UNK, FA, FO]
    assert v.id("pizza") == 3 and v.id("nope") == 0
    hv = Vocab(["pizza"], buckets=5)
    assert len(hv) == len(hv.words) + 5
    assert hv.id("nope") == hv.id("nope") >= len(hv.words)


def test_init_ranges(params):
    for name in PARAM_ORDER:
        arr = getattr(params, name)
        if name.startswith("b") and name != "boundary":
            assert not arr.any()
        else:
            assert np.all(np.abs(arr) <= 0.1)
    with pytest.raises(ValueError):
        ScorerParams.init(0, 8, 8, 9)


def test_encode_empty(params):
    h = encode(np.array([], dtype=np.int64), params)
    assert h.shape == (1, params.d)
    assert np.array_equal(h[0], params.boundary)


def test_encode_matches_reference(params):
    ids = np.array([3, 7, 1, 19, 4])
    assert np.allclose(encode(ids, params), reference_encode(ids, params), rtol=1e-12, atol=1e-12)


def test_encode_deterministic(params):
    ids = np.array([1, 2, 3, 4])
    a = encode(ids, params)
    b = encode(ids, ScorerParams.init(20, 8, 12, 9, seed=3))
    assert a.tobytes() == b.tobytes()


def test_context_mixing_is_global(params):
    ids = np.array([2, 5, 6, 7, 8, 9, 11])
    swapped = ids.copy()
    swapped[[0, 6]] = swapped[[6, 0]]
    h1, h2 = encode(ids, params), encode(swapped, params)
    for pos in range(1, len(ids) + 1):
        assert not np.allclose(h1[pos], h2[pos])


def test_positions_shape():
    pe = positions(5, 6)
    assert pe.shape == (5, 6)
    assert np.isclose(pe[0, 0], np.sin(1.0)) and np.isclose(pe[0, 1], np.cos(1.0))


def test_span_repr():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(6, 4))
    assert not span_repr(np.vstack([h[0], h[0]]), 0, 1).any()
    for i in range(6):
        for j in range(i + 1, 6):
            assert np.array_equal(span_repr(h, i, j), h[j] - h[i])
            for k in range(j + 1, 6):
                assert np.allclose(span_repr(h, i, k), span_repr(h, i, j) + span_repr(h, j, k))
    with pytest.raises(ValueError):
        span_repr(h, 3, 3)


def test_score_span_degenerate(params):
    p = params.copy()
    p.W1[:] = 0.0
    p.b2[:] = 0.25
    assert np.array_equal(score_span(np.ones(p.d), p), np.full(p.n_labels, 0.25))
    with pytest.raises(ValueError):
        score_span(np.ones(p.d + 1), p)


def test_score_span_homogeneity(params):
    rng = np.random.default_rng(1)
    p = params.copy()
    p.b2[:] = rng.normal(size=p.n_labels)
    v = rng.normal(size=p.d)
    pre = v @ p.W1
    p.W1 *= np.sign(pre)  # make every pre-activation positive
    assert np.allclose(score_span(2 * v, p) - p.b2, 2 * (score_span(v, p) - p.b2))


def test_score_all_spans_shape_and_cells(params):
    ids = np.array([4])
    table = score_all_spans(ids, params)
    assert table.shape == (2, 2, params.n_labels)
    assert np.count_nonzero(np.any(table != 0.0, axis=2)) == 1

    rng = np.random.default_rng(2)
    ids = rng.integers(0, 20, size=9)
    table = score_all_spans(ids, params)
    h = reference_encode(ids, params)
    for _ in range(20):
        i, j = sorted(rng.choice(10, size=2, replace=False))
        direct = np.maximum((h[j] - h[i]) @ params.W1 + params.b1, 0) @ params.W2 + params.b2
        assert np.allclose(table[i, j], direct, rtol=1e-10, atol=1e-12)
    assert score_all_spans(ids, params).tobytes() == table.tobytes()


def test_scorer_table_uses_vocab(params):
    vocab = Vocab(["a", "b"])
    sc = Scorer(params, vocab)
    assert np.array_equal(sc.table(["a", "zzz"]), score_all_spans(np.array([3, 0]), params))


def test_gradients_match_finite_differences():
    res = check_gradients(instances=10, seed=7)
    assert res.passed, res.detail
