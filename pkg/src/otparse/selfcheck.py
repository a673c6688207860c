"""Differential checks of the decoder, trainer and tree builder against independent references.

Each check returns a :class:`CheckResult`; the CLI's ``oracle-check`` runs
the small built-in instances and the acceptance tests run the larger ones.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .builder import augment_tokens, build_tree, prune_tree
from .decoder import Decoder, score_tree
from .evaluate import is_complete
from .fixtures import generate_corpus
from .grammar import build_grammar, is_valid_tree, pruned_grammar
from .oracle import BruteForce
from .recovery import recover_quads
from .scorer import ScorerParams, backward, score_all_spans
from .trainer import loss_gradient
from .trees import tree_to_spans


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  {self.detail}  ({self.seconds:.1f}s)"


def _timed(fn):
    def run(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


def small_decoder(categories=("FOOD#QUALITY",), families=None) -> Decoder:
    g = build_grammar(list(categories), families) if families is not None else build_grammar(list(categories))
    return Decoder(pruned_grammar(g))


def random_table(rng: np.random.Generator, n: int, n_labels: int) -> np.ndarray:
    return rng.normal(size=(n + 1, n + 1, n_labels))


@_timed
def check_cky(lengths=(3, 4, 5, 6, 7), tables=100, seed=0, decoder=None) -> CheckResult:
    """decode() score equals the exhaustive maximum exactly, and the trees agree."""
    dec = decoder or small_decoder()
    rng = np.random.default_rng(seed)
    bad, total, ties = [], 0, 0
    for n in lengths:
        bf = BruteForce(dec.grammar, n, dec.labels)
        for t in range(tables):
            table = random_table(rng, n, len(dec.labels))
            tree, score = dec.decode(table)
            spans, best, winners = bf.best(table)
            total += 1
            ties += winners > 1
            same = frozenset(tree_to_spans(tree)) == spans
            if score != best or score != score_tree(tree, table, dec.labels) or (winners == 1 and not same):
                bad.append((n, t, score, best))
    return CheckResult("cky_optimality", not bad,
                       f"{total - len(bad)}/{total} tables exact, {ties} ties" + (f", first miss {bad[0]}" if bad else ""))


@_timed
def check_loss_augmented(lengths=(2, 3, 4, 5, 6), tables=100, seed=1, decoder=None) -> CheckResult:
    """max s(T) + hamming(T, gold) from the chart equals the exhaustive maximum exactly."""
    dec = decoder or small_decoder()
    rng = np.random.default_rng(seed)
    bad, total = [], 0
    for n in lengths:
        bf = BruteForce(dec.grammar, n, dec.labels)
        for t in range(tables):
            table = random_table(rng, n, len(dec.labels))
            gold = bf.trees[int(rng.integers(len(bf.trees)))]
            tree, aug = dec.loss_augmented_decode(table, gold)
            spans, best, winners = bf.best_augmented(table, gold)
            total += 1
            same = frozenset(tree_to_spans(tree)) == spans
            if aug != best or (winners == 1 and not same):
                bad.append((n, t, aug, best))
    return CheckResult("loss_augmented_optimality", not bad,
                       f"{total - len(bad)}/{total} tables exact" + (f", first miss {bad[0]}" if bad else ""))


@_timed
def check_round_trip(size=500, seed=0) -> CheckResult:
    """recover(prune(build(x))) gives back the gold quads for every fixture sentence."""
    grammar = build_grammar(["FOOD#QUALITY", "FOOD#PRICES", "SERVICE#GENERAL", "AMBIENCE#GENERAL",
                             "RESTAURANT#GENERAL"])
    pruned = pruned_grammar(grammar)
    corpus = generate_corpus(size, seed=seed, grammar=grammar)
    bad = 0
    tags = set()
    for s in corpus:
        tags.add(s.tag.value)
        toks, quads = augment_tokens(s.tokens, s.quads)
        full = build_tree(toks, quads, grammar)
        tree = prune_tree(full)
        augmented = len(toks) != len(s.tokens)
        got = recover_quads(tree, augmented)
        ok = sorted(got, key=lambda q: q.sort_key()) == sorted(s.quads, key=lambda q: q.sort_key())
        ok = ok and is_valid_tree(full, grammar) and is_valid_tree(tree, pruned)
        bad += not ok
    return CheckResult("round_trip", bad == 0 and len(tags) == 5,
                       f"{size - bad}/{size} sentences, {len(tags)} situation tags")


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def _fd_grad(f, params: ScorerParams, name: str, idxs, step: float) -> np.ndarray:
    arr = getattr(params, name)
    out = np.empty(len(idxs))
    for k, idx in enumerate(idxs):
        old = arr[idx]
        arr[idx] = old + step
        fp = f()
        arr[idx] = old - step
        fm = f()
        arr[idx] = old
        out[k] = (fp - fm) / (2 * step)
    return out


def _sample_idxs(rng, shape, k, rows=None):
    """``k`` random entries; ``rows`` restricts the first axis (used embedding rows)."""
    if rows is not None:
        rows = np.unique(rows)
        picks = [(int(rng.choice(rows)), int(rng.integers(shape[1]))) for _ in range(k)]
        return list(dict.fromkeys(picks))
    flat = rng.choice(int(np.prod(shape)), size=min(k, int(np.prod(shape))), replace=False)
    return [np.unravel_index(int(f), shape) for f in flat]


def _compare(f, grads, params, rng, ids, step, per_group) -> float:
    nums, anas = [], []
    for name, arr in params.arrays().items():
        idxs = _sample_idxs(rng, arr.shape, per_group, rows=ids if name == "embed" else None)
        nums.append(_fd_grad(f, params, name, idxs, step))
        anas.append(np.array([grads[name][i] for i in idxs]))
    return _rel_err(np.concatenate(nums), np.concatenate(anas))


@_timed
def check_gradients(instances=10, seed=0, step=1e-5, tol=1e-4, per_group=12) -> CheckResult:
    """Analytic vs central-difference gradients of span scores and of the hinge loss.

    Per instance, ``per_group`` entries are sampled from every parameter group
    and the error is ``|g_fd - g|_2 / max(|g_fd|_2, |g|_2)`` over all of them
    (entry-wise ratios are meaningless where the true gradient is exactly 0).
    The hinge is differentiated with the violating tree held fixed.
    """
    rng = np.random.default_rng(seed)
    dec = small_decoder()
    L = len(dec.labels)
    worst_span = worst_hinge = 0.0
    done_span = done_hinge = 0
    inst = 0
    while done_span < instances or done_hinge < instances:
        inst += 1
        if inst > 20 * instances:
            break
        n = int(rng.integers(3, 7))
        params = ScorerParams.init(12, 8, 10, L, seed=seed * 1000 + inst)
        params.b1 += rng.normal(scale=0.1, size=params.b1.shape)
        params.b2 += rng.normal(scale=0.1, size=params.b2.shape)
        ids = rng.integers(0, 12, size=n)
        if done_span < instances:
            dtable = rng.normal(size=(n + 1, n + 1, L))
            f = lambda: float(np.sum(score_all_spans(ids, params) * dtable))  # noqa: E731
            _, cache = score_all_spans(ids, params, keep=True)
            grads = backward(cache, dtable, params)
            worst_span = max(worst_span, _compare(f, grads, params, rng, ids, step, per_group))
            done_span += 1
        gold = _random_gold(dec, n, rng)
        loss, grads, viol = loss_gradient(params, ids, gold, dec)
        if loss == 0.0 or done_hinge >= instances:
            continue
        viol_spans = tree_to_spans(viol)
        delta = len(set(viol_spans) - set(gold))

        def hinge():
            t = score_all_spans(ids, params)
            s = lambda spans: math.fsum(float(t[i, j, dec.labels.index(lab)]) for i, j, lab in spans)  # noqa: E731
            return s(viol_spans) + delta - s(gold)

        worst_hinge = max(worst_hinge, _compare(hinge, grads, params, rng, ids, step, per_group))
        done_hinge += 1
    ok = worst_span <= tol and worst_hinge <= tol and done_span >= instances and done_hinge >= instances
    return CheckResult("gradients", ok,
                       f"span rel err {worst_span:.2e} over {done_span} instances, "
                       f"hinge rel err {worst_hinge:.2e} over {done_hinge} instances")


def _random_gold(dec: Decoder, n: int, rng) -> frozenset:
    """A valid tree over n decoder tokens: the argmax of a random table."""
    table = random_table(rng, n, len(dec.labels))
    return frozenset(tree_to_spans(dec.decode(table)[0]))


@_timed
def check_completeness(decodes=1000, seed=0, lengths=(2, 12), vocab=40, d=16, hidden=24) -> CheckResult:
    """Every tree decoded under random parameters is valid and recoverable."""
    rng = np.random.default_rng(seed)
    cats = ["FOOD#QUALITY", "SERVICE#GENERAL", "AMBIENCE#GENERAL"]
    dec = small_decoder(cats)
    bad = 0
    for k in range(decodes):
        if k % 50 == 0:
            params = ScorerParams.init(vocab, d, hidden, len(dec.labels), seed=seed * 100000 + k)
        n = int(rng.integers(lengths[0], lengths[1] + 1))
        ids = rng.integers(0, vocab, size=n)
        tree, _ = dec.decode(score_all_spans(ids, params))
        bad += not is_complete(tree, dec.grammar)
    return CheckResult("completeness", bad == 0, f"{decodes - bad}/{decodes} decoded trees valid and recoverable")


def builtin_checks() -> list[CheckResult]:
    """Small instances for ``oracle-check``; well under a minute."""
    return [
        check_cky(lengths=(2, 3, 4, 5), tables=20),
        check_cky(lengths=(1, 2, 3, 4), tables=20, seed=3,
                  decoder=small_decoder(("FOOD#QUALITY", "SERVICE#GENERAL"), families=())),
        check_loss_augmented(lengths=(2, 3, 4, 5), tables=20),
        check_round_trip(size=200),
        check_gradients(instances=10),
        check_completeness(decodes=200),
    ]
