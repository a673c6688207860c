"""Span scorer: embeddings, one self-attention layer, and a two-layer MLP per span.

Fencepost vectors are ``h_0`` (a learned boundary vector) followed by one
vector per token.  Embeddings are multiplied by ``sqrt(d)`` before the
position terms are added, so word identity is not drowned out by position.
A span ``(i, j)`` is represented by ``h_j - h_i`` and scored as
``relu(v W1 + b1) W2 + b2``, one column of ``W2`` per label.
Gradients are written out by hand; everything is float64.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .grammar import FA, FO

PARAM_ORDER = ("embed", "boundary", "Wq", "Wk", "Wv", "Wo", "W1", "b1", "W2", "b2")


class Vocab:
    """Token ids: 0 is UNK, then known words, then ``buckets`` hashed rows for unknown words.

    With ``buckets > 0`` an unseen token goes to row ``offset + crc32(token) % buckets``;
    with ``buckets == 0`` it goes to UNK.
    """

    UNK = "<unk>"

    def __init__(self, words: Iterable[str] = (), buckets: int = 0):
        self.words: list[str] = [self.UNK]
        self.index: dict[str, int] = {self.UNK: 0}
        for w in (FA, FO, *words):
            if w not in self.index:
                self.index[w] = len(self.words)
                self.words.append(w)
        self.buckets = buckets

    @classmethod
    def from_corpus(cls, sentences: Iterable[Sequence[str]], buckets: int = 0) -> "Vocab":
        seen: dict[str, None] = {}
        for toks in sentences:
            for t in toks:
                seen.setdefault(t, None)
        return cls(seen, buckets)

    def __len__(self):
        return len(self.words) + self.buckets

    def id(self, token: str) -> int:
        idx = self.index.get(token)
        if idx is not None:
            return idx
        if self.buckets:
            return len(self.words) + zlib.crc32(token.encode("utf-8")) % self.buckets
        return 0

    def ids(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.id(t) for t in tokens], dtype=np.int64)


@dataclass
class ScorerParams:
    embed: np.ndarray  # V x d
    boundary: np.ndarray  # d, the h_0 fencepost
    Wq: np.ndarray
    Wk: np.ndarray
    Wv: np.ndarray
    Wo: np.ndarray
    W1: np.ndarray  # d x H
    b1: np.ndarray
    W2: np.ndarray  # H x |L|
    b2: np.ndarray
    seed: int = 0

    @classmethod
    def init(cls, vocab_size: int, d: int, hidden: int, n_labels: int, seed: int = 0) -> "ScorerParams":
        if min(vocab_size, d, hidden, n_labels) <= 0:
            raise ValueError("all scorer dimensions must be positive")
        rng = np.random.default_rng(seed)

        def u(*shape):
            return rng.uniform(-0.1, 0.1, size=shape)

        return cls(
            embed=u(vocab_size, d), boundary=u(d),
            Wq=u(d, d), Wk=u(d, d), Wv=u(d, d), Wo=u(d, d),
            W1=u(d, hidden), b1=np.zeros(hidden),
            W2=u(hidden, n_labels), b2=np.zeros(n_labels),
            seed=seed,
        )

    @property
    def d(self) -> int:
        return self.embed.shape[1]

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]

    @property
    def n_labels(self) -> int:
        return self.W2.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.embed.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_ORDER}

    def copy(self) -> "ScorerParams":
        return ScorerParams(**{k: v.copy() for k, v in self.arrays().items()}, seed=self.seed)

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.arrays().items()}


def positions(n: int, d: int) -> np.ndarray:
    """Sinusoidal position terms for tokens 1..n (row t-1 is position t)."""
    pos = np.arange(1, n + 1, dtype=np.float64)[:, None]
    rates = 1.0 / np.power(10000.0, (2 * (np.arange(d) // 2)) / d)
    ang = pos * rates[None, :]
    out = np.empty((n, d))
    out[:, 0::2] = np.sin(ang[:, 0::2])
    out[:, 1::2] = np.cos(ang[:, 1::2])
    return out


@dataclass
class _EncodeCache:
    ids: np.ndarray
    x: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    attn: np.ndarray
    ctx: np.ndarray


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _encode(ids: np.ndarray, p: ScorerParams):
    n = len(ids)
    if n == 0:
        return p.boundary[None, :].copy(), None
    x = p.embed[ids] * np.sqrt(p.d) + positions(n, p.d)
    q, k, v = x @ p.Wq, x @ p.Wk, x @ p.Wv
    attn = _softmax(q @ k.T / np.sqrt(p.d))
    ctx = attn @ v
    h = x + ctx @ p.Wo
    return np.vstack([p.boundary[None, :], h]), _EncodeCache(ids, x, q, k, v, attn, ctx)


def encode(ids: np.ndarray, params: ScorerParams) -> np.ndarray:
    """Fencepost vectors ``h_0..h_n`` as an ``(n + 1, d)`` array."""
    return _encode(np.asarray(ids, dtype=np.int64), params)[0]


def span_repr(h: np.ndarray, i: int, j: int) -> np.ndarray:
    if not 0 <= i < j < len(h):
        raise ValueError(f"bad span ({i}, {j}) for {len(h) - 1} tokens")
    return h[j] - h[i]


def score_span(v: np.ndarray, params: ScorerParams) -> np.ndarray:
    if v.shape != (params.d,):
        raise ValueError(f"span vector has shape {v.shape}, expected ({params.d},)")
    return np.maximum(v @ params.W1 + params.b1, 0.0) @ params.W2 + params.b2


@dataclass
class ScoreCache:
    n: int
    enc: _EncodeCache | None
    h: np.ndarray
    ii: np.ndarray
    jj: np.ndarray
    pre: np.ndarray  # pre-activations, one row per span
    hid: np.ndarray


def score_all_spans(ids: np.ndarray, params: ScorerParams, keep: bool = False):
    """Dense ``(n+1, n+1, |L|)`` table; cells with ``i >= j`` are zero.

    With ``keep`` the forward cache needed by :func:`backward` is returned too.
    """
    ids = np.asarray(ids, dtype=np.int64)
    n = len(ids)
    h, enc = _encode(ids, params)
    ii, jj = np.triu_indices(n + 1, k=1)
    table = np.zeros((n + 1, n + 1, params.n_labels))
    pre = h[jj] - h[ii]
    pre = pre @ params.W1 + params.b1
    hid = np.maximum(pre, 0.0)
    if len(ii):
        table[ii, jj] = hid @ params.W2 + params.b2
    if keep:
        return table, ScoreCache(n, enc, h, ii, jj, pre, hid)
    return table


def backward(cache: ScoreCache, dtable: np.ndarray, params: ScorerParams) -> dict[str, np.ndarray]:
    """Gradient of ``sum(dtable * table)`` with respect to every parameter."""
    grads = params.zeros_like()
    ds = dtable[cache.ii, cache.jj]
    rows = np.flatnonzero(np.any(ds != 0.0, axis=1))
    if len(rows) == 0:
        return grads
    ds = ds[rows]
    hid, pre = cache.hid[rows], cache.pre[rows]
    ii, jj = cache.ii[rows], cache.jj[rows]
    grads["W2"] = hid.T @ ds
    grads["b2"] = ds.sum(axis=0)
    dpre = (ds @ params.W2.T) * (pre > 0.0)
    v = cache.h[jj] - cache.h[ii]
    grads["W1"] = v.T @ dpre
    grads["b1"] = dpre.sum(axis=0)
    dv = dpre @ params.W1.T
    dh = np.zeros_like(cache.h)
    np.add.at(dh, jj, dv)
    np.add.at(dh, ii, -dv)
    grads["boundary"] = dh[0]
    enc = cache.enc
    if enc is None:
        return grads
    dh = dh[1:]
    grads["Wo"] = enc.ctx.T @ dh
    dctx = dh @ params.Wo.T
    dattn = dctx @ enc.v.T
    dvv = enc.attn.T @ dctx
    dlogits = enc.attn * (dattn - (dattn * enc.attn).sum(axis=1, keepdims=True)) / np.sqrt(params.d)
    dq = dlogits @ enc.k
    dk = dlogits.T @ enc.q
    grads["Wq"] = enc.x.T @ dq
    grads["Wk"] = enc.x.T @ dk
    grads["Wv"] = enc.x.T @ dvv
    dx = dh + dq @ params.Wq.T + dk @ params.Wk.T + dvv @ params.Wv.T
    np.add.at(grads["embed"], enc.ids, dx * np.sqrt(params.d))
    return grads


@dataclass
class Scorer:
    """Parameters plus vocabulary: the pluggable piece in front of the decoder."""

    params: ScorerParams
    vocab: Vocab
    extra: dict = field(default_factory=dict)

    def table(self, tokens: Sequence[str]) -> np.ndarray:
        return score_all_spans(self.vocab.ids(tokens), self.params)
