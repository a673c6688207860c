"""Brute-force reference for the decoder.

Enumerates every valid pruned tree over ``n`` tokens as a labeled span set,
straight from a description of the tree shapes (regular expressions over the
child kinds of S and Q nodes, and subsets for stacked chains).  Nothing here
reads the grammar's rule table, so it is an independent check of both the
pruned grammar and the chart decoder.
"""

from __future__ import annotations

import itertools
import math
import re
from functools import lru_cache

import numpy as np
from scipy import sparse

from .grammar import Grammar, LabelSet, build_label_set

_SENTENCE_RE = re.compile(r"I?Q(I?Q)*I?")


def _q_terms_re(one_to_many: bool) -> re.Pattern:
    alts = ["AO", "OA"]
    if one_to_many:
        alts += ["AO{2,}", "OA{2,}", "A{2,}O", "O{2,}A"]
    return re.compile("|".join(alts))


def _compositions(i: int, j: int):
    """All ways to cut ``[i, j)`` into consecutive nonempty parts."""
    if i == j:
        yield []
        return
    for k in range(i + 1, j + 1):
        for rest in _compositions(k, j):
            yield [(i, k)] + rest


class TreeEnumerator:
    """All valid pruned trees for a grammar configuration, as sorted span tuples."""

    def __init__(self, grammar: Grammar):
        fams = grammar.families
        self.cats = grammar.categories
        self.pols = grammar.polarities
        self.stacked = "cross_mapping" in fams
        self.implicit = "mono_implicit" in fams
        self.prefix = "bi_implicit" in fams
        self.terms_re = _q_terms_re("one_to_many" in fams)
        self._term = lru_cache(maxsize=None)(self._term_options)
        self._q = lru_cache(maxsize=None)(self._q_options)

    def _chains(self, values):
        if not self.stacked:
            return [(v,) for v in values]
        out = []
        for r in range(1, len(values) + 1):
            out.extend(itertools.combinations(values, r))
        return out

    def _term_options(self, kind: str, i: int, j: int):
        values = self.cats if kind == "A" else self.pols
        return [
            tuple((i, j, f"{kind}:{v}") for v in chain) + ((i, j, kind + "T"),)
            for chain in self._chains(values)
        ]

    def _q_options(self, i: int, j: int):
        out = []
        if self.implicit:
            for c in self.cats:
                for p in self.pols:
                    out.append(((i, j, f"A:{c}"), (i, j, f"O:{p}"), (i, j, "OT")))
                    out.append(((i, j, f"O:{p}"), (i, j, f"A:{c}"), (i, j, "AT")))
        for parts in _compositions(i, j):
            for kinds in itertools.product("IAO", repeat=len(parts)):
                seq = "".join(kinds)
                if seq[0] == "I" or seq[-1] == "I" or "II" in seq:
                    continue
                if not self.terms_re.fullmatch(seq.replace("I", "")):
                    continue
                pools = []
                for (a, b), kind in zip(parts, kinds):
                    pools.append([((a, b, "I"),)] if kind == "I" else self._term(kind, a, b))
                for combo in itertools.product(*pools):
                    out.append(tuple(itertools.chain.from_iterable(combo)))
        return [((i, j, "Q"),) + o for o in out]

    def _sequences(self, lo: int, hi: int, pattern: re.Pattern):
        """Span sets of S children over ``[lo, hi)`` whose kind string matches ``pattern``."""
        for parts in _compositions(lo, hi):
            for kinds in itertools.product("IQ", repeat=len(parts)):
                if not pattern.fullmatch("".join(kinds)):
                    continue
                pools = [
                    [((a, b, "I"),)] if k == "I" else self._q(a, b)
                    for (a, b), k in zip(parts, kinds)
                ]
                for combo in itertools.product(*pools):
                    yield tuple(itertools.chain.from_iterable(combo))

    def sentence_trees(self, lo: int, hi: int):
        if lo == hi:
            yield ()
            return
        yield ((lo, hi, "S"),)
        for body in self._sequences(lo, hi, _SENTENCE_RE):
            yield ((lo, hi, "S"),) + body

    def trees(self, n: int):
        """Every valid tree over ``n`` tokens (FA/FO included when enabled)."""
        if not self.prefix:
            yield from self.sentence_trees(0, n)
            return
        if n < 2:
            raise ValueError("the FA/FO prefix needs n >= 2")
        yield from self.sentence_trees(2, n)
        rest_re = re.compile(r"(I?Q)*I?")
        for c in self.cats:
            for p in self.pols:
                bi = ((0, n, "S"), (0, 2, "Q"), (0, 1, f"A:{c}"), (0, 1, "AT"), (1, 2, f"O:{p}"), (1, 2, "OT"))
                if n == 2:
                    yield bi
                    continue
                for rest in self._sequences(2, n, rest_re):
                    yield bi + rest


class BruteForce:
    """Scores every enumerated tree with one sparse product per table."""

    def __init__(self, grammar: Grammar, n: int, labels: LabelSet | None = None):
        self.labels = labels or build_label_set(grammar)
        self.n = n
        self.trees = [frozenset(t) for t in TreeEnumerator(grammar).trees(n)]
        L = len(self.labels)
        rows, cols = [], []
        for r, spans in enumerate(self.trees):
            for i, j, lab in spans:
                rows.append(r)
                cols.append((i * (n + 1) + j) * L + self.labels.index(lab))
        shape = (len(self.trees), (n + 1) * (n + 1) * L)
        self.incidence = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=shape)

    def __len__(self):
        return len(self.trees)

    def _exact(self, spans, table) -> float:
        return math.fsum(float(table[i, j, self.labels.index(lab)]) for i, j, lab in spans)

    def _best(self, approx: np.ndarray, exact) -> tuple[frozenset, float, int]:
        # the sparse product is only a filter; finalists are rescored exactly
        cut = approx.max() - 1e-6 * (1.0 + abs(approx.max()))
        finalists = np.flatnonzero(approx >= cut)
        scored = sorted(((exact(self.trees[r]), r) for r in finalists), reverse=True)
        top = scored[0][0]
        winners = sum(1 for s, _ in scored if s == top)
        return self.trees[scored[0][1]], top, winners

    def best(self, table: np.ndarray) -> tuple[frozenset, float, int]:
        """(best span set, its exact score, number of trees tied at that score)."""
        approx = self.incidence @ table.reshape(-1)
        return self._best(approx, lambda spans: self._exact(spans, table))

    def best_augmented(self, table: np.ndarray, gold: frozenset) -> tuple[frozenset, float, int]:
        """Maximizer of ``s(T) + |T \\ gold|`` over all trees."""
        gold_vec = np.zeros(self.incidence.shape[1])
        L = len(self.labels)
        for i, j, lab in gold:
            gold_vec[(i * (self.n + 1) + j) * L + self.labels.index(lab)] = 1.0
        sizes = np.asarray(self.incidence.sum(axis=1)).ravel()
        approx = self.incidence @ table.reshape(-1) + sizes - self.incidence @ gold_vec

        def exact(spans):
            delta = len(spans - gold)
            return math.fsum([float(table[i, j, self.labels.index(lab)]) for i, j, lab in spans] + [float(delta)])

        return self._best(approx, exact)
