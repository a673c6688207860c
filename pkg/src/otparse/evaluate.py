"""Exact-match quad metrics, completeness, situation counts and decode timing."""

from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .builder import SituationTag, Unparseable, validate_parseable
from .grammar import Grammar, is_valid_tree
from .recovery import MalformedTreeError, recover_quads
from .trees import OpinionTree, TreeError


@dataclass
class EvalReport:
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    completeness: float | None = None
    situation_histogram: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def to_text(self) -> str:
        """``key<TAB>value`` lines in a fixed order (see docs/formats.md)."""
        lines = [
            f"precision\t{self.precision:.6f}",
            f"recall\t{self.recall:.6f}",
            f"f1\t{self.f1:.6f}",
            f"tp\t{self.tp}",
            f"fp\t{self.fp}",
            f"fn\t{self.fn}",
        ]
        if self.completeness is not None:
            lines.append(f"completeness\t{self.completeness:.6f}")
        for tag, count in self.situation_histogram.items():
            lines.append(f"situation.{tag}\t{count}")
        for key, value in self.timing.items():
            lines.append(f"timing.{key}\t{value}")
        return "\n".join(lines) + "\n"


def _quad_key(q):
    return (q.aspect, q.category, q.opinion, q.polarity)


def eval_quads(pred: Iterable, gold: Iterable) -> EvalReport:
    """Multiset exact match over (aspect span, category, opinion span, polarity)."""
    p = Counter(_quad_key(q) for q in pred)
    g = Counter(_quad_key(q) for q in gold)
    tp = sum((p & g).values())
    fp = sum(p.values()) - tp
    fn = sum(g.values()) - tp
    return _report(tp, fp, fn)


def eval_corpus(preds: Sequence[Iterable], golds: Sequence[Iterable]) -> EvalReport:
    """Micro-averaged counts over aligned sentence lists."""
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions for {len(golds)} gold sentences")
    tp = fp = fn = 0
    for p, g in zip(preds, golds):
        r = eval_quads(p, g)
        tp, fp, fn = tp + r.tp, fp + r.fp, fn + r.fn
    return _report(tp, fp, fn)


def _report(tp, fp, fn) -> EvalReport:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(precision, recall, f1, tp, fp, fn)


def is_complete(tree: OpinionTree | None, grammar: Grammar, implicit_prefix: bool | None = None) -> bool:
    """Valid under the pruned grammar and readable as quadruples."""
    if tree is None or not is_valid_tree(tree, grammar):
        return False
    prefix = grammar.implicit_prefix if implicit_prefix is None else implicit_prefix
    try:
        recover_quads(tree, prefix)
    except (MalformedTreeError, TreeError, ValueError):
        return False
    return True


def completeness(trees: Sequence, grammar: Grammar) -> float:
    if not trees:
        return 1.0
    return sum(is_complete(t, grammar) for t in trees) / len(trees)


def situation_histogram(sentences: Iterable[tuple], grammar: Grammar | None = None) -> dict[str, int]:
    """Tag counts in a fixed order; unparseable sentences are counted under ``unparseable``."""
    counts = Counter()
    for tokens, quads in sentences:
        tag = validate_parseable(tokens, quads, grammar)
        counts[SituationTag.UNPARSEABLE.value if isinstance(tag, Unparseable) else tag.value] += 1
    return {t.value: counts.get(t.value, 0) for t in SituationTag}


def _percentile(xs, q):
    return float(np.percentile(np.asarray(xs), q)) if xs else 0.0


def bench_decode(tables: Sequence[np.ndarray], decoder, repeats: int = 3, clock=time.perf_counter) -> dict:
    """Time the chart decode of each precomputed score table ``repeats`` times.

    Reports mean/p50/p95 of the per-sentence time (each averaged over the
    repeats), the run-to-run spread, and the fitted exponent ``b`` of
    ``t = a * n^b`` when at least two lengths are present.
    """
    if not tables:
        return {}
    per_sentence = []
    run_totals = []
    for _ in range(repeats):
        total = 0.0
        times = []
        for table in tables:
            t0 = clock()
            decoder.decode(table)
            dt = clock() - t0
            times.append(dt)
            total += dt
        per_sentence.append(times)
        run_totals.append(total)
    avg = np.mean(np.asarray(per_sentence), axis=0)
    lengths = np.array([t.shape[0] - 1 for t in tables])
    stats = {
        "sentences": len(tables),
        "repeats": repeats,
        "mean": float(avg.mean()),
        "p50": _percentile(list(avg), 50),
        "p95": _percentile(list(avg), 95),
        "run_spread": float(np.std(run_totals) / np.mean(run_totals)) if np.mean(run_totals) > 0 else 0.0,
    }
    uniq = np.unique(lengths)
    if len(uniq) >= 2:
        by_len = np.array([avg[lengths == n].mean() for n in uniq])
        keep = (uniq > 0) & (by_len > 0)
        if keep.sum() >= 2:
            slope, intercept = np.polyfit(np.log(uniq[keep]), np.log(by_len[keep]), 1)
            stats["exponent"] = float(slope)
            stats["coefficient"] = float(np.exp(intercept))
    return stats
