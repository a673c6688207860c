"""Grammar-constrained CKY over span score tables.

The chart runs over the symbols of the pruned grammar.  Term symbols
(``At``, ``Ot`` and their single/implicit forms) are filled directly from a
span's label scores, since their internal structure never crosses a split
point; everything above them comes from the grammar's binary rules.  The
sentence symbol ``S`` and its right-branching tail only ever end at the last
fencepost, so they are computed once per start position.

Scores are 64-bit; ties go to the lowest split point, then to the earlier
rule.  The score returned with a tree is always its exact recomputation
(:func:`score_tree`), never the chart's running sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .grammar import WORD, Grammar, LabelSet, build_label_set, is_valid_tree
from .trees import LabeledSpanSet, OpinionTree, tree_to_spans

NEG = -math.inf
TERM_SYMBOLS = ("At", "Ot", "At1", "Ot1", "Ai", "Oi", "I")
SENTENCE_SYMBOLS = ("S", "S|Q", "S|I.Q")


class DecodeError(AssertionError):
    """The decoder produced something it should not have (internal bug)."""


def score_tree(tree: OpinionTree, table: np.ndarray, labels: LabelSet) -> float:
    """Sum of the tree's labeled-span scores, exactly rounded."""
    return math.fsum(float(table[i, j, labels.index(lab)]) for i, j, lab in tree_to_spans(tree))


def hamming(pred: LabeledSpanSet, gold: LabeledSpanSet) -> int:
    """Predicted labeled spans missing from gold."""
    return len(set(pred) - set(gold))


def augment_table(table: np.ndarray, gold: LabeledSpanSet, labels: LabelSet) -> np.ndarray:
    """``table + 1`` everywhere except on the gold spans (the Hamming cost)."""
    out = table + 1.0
    for i, j, lab in gold:
        out[i, j, labels.index(lab)] -= 1.0
    return out


@dataclass
class Chart:
    n: int
    best: dict  # symbol -> (n+1) x (n+1) list of scores
    back: dict  # (symbol, i, j) -> (rule or form, split)
    table: np.ndarray | None = None
    cells: list | None = None  # table as nested lists

    def dump(self) -> str:
        """One line per filled cell: ``i j label score split``."""
        lines = []
        for sym in sorted(self.best):
            rows = self.best[sym]
            for i, row in enumerate(rows):
                for j, v in enumerate(row):
                    if v == NEG:
                        continue
                    bp = self.back.get((sym, i, j))
                    split = bp[1] if isinstance(bp, tuple) and bp[1] is not None else "-"
                    lines.append(f"{i} {j} {sym} {v!r} {split}")
        return "\n".join(lines) + ("\n" if lines else "")


class Decoder:
    """CKY decoder bound to one pruned grammar."""

    def __init__(self, grammar: Grammar, labels: LabelSet | None = None):
        if grammar.form != "pruned":
            raise ValueError("the decoder searches the pruned grammar; call pruned_grammar() first")
        self.grammar = grammar
        self.labels = labels or build_label_set(grammar)
        self.prefix = grammar.implicit_prefix
        fams = grammar.families
        self.stacked = "cross_mapping" in fams
        self.implicit = "mono_implicit" in fams
        # rules whose lhs lives inside a Q constituent
        self.rules = [
            r for r in grammar.rules
            if r.lhs not in SENTENCE_SYMBOLS and r.lhs not in TERM_SYMBOLS
            and r.lhs not in ("AT", "OT") and r.rhs and WORD not in r.rhs
        ]
        order: list[str] = []
        for r in self.rules:
            if r.lhs not in order:
                order.append(r.lhs)
        # unary rules read symbols of the same span, so their lhs goes last
        unary_lhs = {r.lhs for r in self.rules if len(r.rhs) == 1 and r.rhs[0] not in TERM_SYMBOLS}
        self.order = [s for s in order if s not in unary_lhs] + [s for s in order if s in unary_lhs]
        self.by_lhs = {s: [(k, r) for k, r in enumerate(self.rules) if r.lhs == s] for s in self.order}
        L = self.labels
        self.lid = {name: L.index(name) for name in ("S", "Q", "I", "AT", "OT")}
        self.a_ids = L.ids_with_prefix("A:")
        self.o_ids = L.ids_with_prefix("O:")

    # -- term cells --------------------------------------------------------

    @staticmethod
    def _best_chain(cell, ids, stacked: bool):
        """Label ids of the best chain on one span: the top label, plus every positive one when stacking."""
        top = max(ids, key=lambda t: (cell[t], -t))
        if not stacked:
            return (top,)
        return tuple(t for t in ids if t == top or cell[t] > 0.0)

    def _term_scores(self, table: np.ndarray) -> dict:
        """Term-symbol scores for every span at once, as nested lists."""
        lid = self.lid
        A = table[:, :, self.a_ids]
        O = table[:, :, self.o_ids]
        amax, omax = A.max(axis=-1), O.max(axis=-1)
        if self.stacked:
            achain = np.where(A > 0, A, 0.0).sum(axis=-1) + np.minimum(amax, 0.0)
            ochain = np.where(O > 0, O, 0.0).sum(axis=-1) + np.minimum(omax, 0.0)
        else:
            achain, ochain = amax, omax
        at, ot = table[:, :, lid["AT"]], table[:, :, lid["OT"]]
        arrays = {"At": at + achain, "Ot": ot + ochain, "I": table[:, :, lid["I"]].copy()}
        if self.implicit or self.prefix:
            arrays["At1"] = at + amax
            arrays["Ot1"] = ot + omax
        if self.implicit:
            arrays["Ai"] = amax + arrays["Ot1"]
            arrays["Oi"] = omax + arrays["At1"]
        # only i < j are spans
        invalid = ~np.triu(np.ones(at.shape, dtype=bool), k=1)
        for arr in arrays.values():
            arr[invalid] = NEG
        return arrays

    # -- chart ---------------------------------------------------------------

    def chart(self, table: np.ndarray, lo: int, hi: int) -> Chart:
        """Fill every Q-internal cell within ``[lo, hi]`` plus the sentence tail."""
        n = table.shape[0] - 1
        terms = self._term_scores(table)
        best = {s: a.tolist() for s, a in terms.items()}
        col = {s: a.T.tolist() for s, a in terms.items()}
        for s in list(self.order) + list(SENTENCE_SYMBOLS[1:]):
            best[s] = [[NEG] * (n + 1) for _ in range(n + 1)]
            col[s] = [[NEG] * (n + 1) for _ in range(n + 1)]
        back: dict = {}
        q_score = table[:, :, self.lid["Q"]].tolist()
        plan = [
            (sym, [(r_idx, r.rhs[0], r.rhs[1] if len(r.rhs) == 2 else None) for r_idx, r in self.by_lhs[sym]])
            for sym in self.order
        ]
        for width in range(1, hi - lo + 1):
            for i in range(lo, hi - width + 1):
                j = i + width
                for sym, rules in plan:
                    top, bp = NEG, None
                    for r_idx, b, c in rules:
                        if c is None:
                            v = best[b][i][j]
                            if v > top:
                                top, bp = v, (r_idx, None)
                            continue
                        left, right = best[b][i], col[c][j]
                        for k in range(i + 1, j):
                            v = left[k] + right[k]
                            if v > top or (v == top and v > NEG and bp[1] is not None and k < bp[1]):
                                top, bp = v, (r_idx, k)
                    if top > NEG:
                        if sym == "Q":
                            top += q_score[i][j]
                        best[sym][i][j] = top
                        col[sym][j][i] = top
                        back[(sym, i, j)] = bp
        self._fill_tail(lo, hi, best, back)
        return Chart(n, best, back, table)

    def _fill_tail(self, lo, hi, best, back):
        """``S|Q`` and ``S|I.Q`` cells ending at ``hi``, right to left."""
        I, Q, SQ, SIQ = best["I"], best["Q"], best["S|Q"], best["S|I.Q"]
        for i in range(hi - 1, lo - 1, -1):
            cands = [(Q[i][hi], ("Q", None))]
            for k in range(i + 1, hi):
                q = Q[i][k]
                if q == NEG:
                    continue
                cands.append((q + I[k][hi], ("Q I", k)))
                cands.append((q + SQ[k][hi], ("Q S|Q", k)))
                cands.append((q + SIQ[k][hi], ("Q S|I.Q", k)))
            top, bp = _argmax(cands)
            SQ[i][hi] = top
            back[("S|Q", i, hi)] = bp
            cands = [(I[i][k] + SQ[k][hi], ("I S|Q", k)) for k in range(i + 1, hi)]
            top, bp = _argmax(cands)
            SIQ[i][hi] = top
            back[("S|I.Q", i, hi)] = bp

    def _root(self, tab, lo, hi, best) -> tuple[float, tuple]:
        if hi == lo:
            return 0.0, ("empty", None)
        s = tab[lo][hi][self.lid["S"]]
        cands = [(s, ("I", None)), (s + best["S|Q"][lo][hi], ("S|Q", None))]
        for k in range(lo + 1, hi):
            cands.append((s + best["I"][lo][k] + best["S|Q"][k][hi], ("I S|Q", k)))
        return _argmax(cands)

    # -- trees -----------------------------------------------------------------

    def _term_tree(self, sym, i, j, ch) -> OpinionTree:
        L = self.labels
        cell = ch.cells[i][j]
        if sym in ("Ai", "Oi"):
            outer, inner = (self.a_ids, self.o_ids) if sym == "Ai" else (self.o_ids, self.a_ids)
            outer = self._best_chain(cell, outer, False)[0]
            inner = self._best_chain(cell, inner, False)[0]
            leaf = OpinionTree("OT" if sym == "Ai" else "AT", (i, j))
            return OpinionTree(L.label(outer), (i, j), (OpinionTree(L.label(inner), (i, j), (leaf,)),))
        aspect = sym.startswith("A")
        ids = self._best_chain(cell, self.a_ids if aspect else self.o_ids, sym in ("At", "Ot") and self.stacked)
        node = OpinionTree("AT" if aspect else "OT", (i, j))
        for t in reversed(ids):
            node = OpinionTree(L.label(t), (i, j), (node,))
        return node

    def _expand(self, sym, i, j, ch) -> list[OpinionTree]:
        """Children contributed by ``sym`` over ``(i, j)``; intermediates splice in."""
        if sym == "I":
            return [OpinionTree("I", (i, j))]
        if sym in TERM_SYMBOLS:
            return [self._term_tree(sym, i, j, ch)]
        if sym == "Q":
            return [OpinionTree("Q", (i, j), tuple(self._body(sym, i, j, ch)))]
        return self._body(sym, i, j, ch)

    def _body(self, sym, i, j, ch) -> list[OpinionTree]:
        r_idx, k = ch.back[(sym, i, j)]
        rhs = self.rules[r_idx].rhs
        if len(rhs) == 1:
            return self._expand(rhs[0], i, j, ch)
        return self._expand(rhs[0], i, k, ch) + self._expand(rhs[1], k, j, ch)

    def _tail(self, sym, i, hi, ch) -> list[OpinionTree]:
        form, k = ch.back[(sym, i, hi)]
        if form == "Q":
            return self._expand("Q", i, hi, ch)
        if form == "I S|Q":
            return [OpinionTree("I", (i, k))] + self._tail("S|Q", k, hi, ch)
        head = self._expand("Q", i, k, ch)
        if form == "Q I":
            return head + [OpinionTree("I", (k, hi))]
        return head + self._tail(form.split(" ")[1], k, hi, ch)

    def _root_tree(self, form, lo, hi, ch) -> OpinionTree:
        kind, k = form
        if kind == "empty":
            return OpinionTree("S", (lo, hi))
        if kind == "I":
            return OpinionTree("S", (lo, hi), (OpinionTree("I", (lo, hi)),))
        if kind == "S|Q":
            return OpinionTree("S", (lo, hi), tuple(self._tail("S|Q", lo, hi, ch)))
        kids = [OpinionTree("I", (lo, k))] + self._tail("S|Q", k, hi, ch)
        return OpinionTree("S", (lo, hi), tuple(kids))

    # -- entry points ------------------------------------------------------------

    def decode_with_chart(self, table: np.ndarray) -> tuple[OpinionTree, float, Chart]:
        n = table.shape[0] - 1
        if table.shape[:2] != (n + 1, n + 1) or table.shape[2] != len(self.labels):
            raise ValueError(f"score table shape {table.shape} does not match {len(self.labels)} labels")
        if not np.all(np.isfinite(table)):
            raise ValueError("score table contains non-finite entries")
        tab = table.tolist()
        if not self.prefix:
            chart = self.chart(table, 0, n)
            chart.cells = tab
            _, form = self._root(tab, 0, n, chart.best)
            tree = self._root_tree(form, 0, n, chart)
        else:
            if n < 2:
                raise ValueError("with FA/FO enabled the input must start with the two pseudo tokens")
            chart = self.chart(table, 2, n)
            chart.cells = tab
            plain, form = self._root(tab, 2, n, chart.best)
            tree = self._root_tree(form, 2, n, chart)
            bi, bi_tree = self._bi_root(tab, n, chart)
            if bi > plain:
                tree = bi_tree
        score = score_tree(tree, table, self.labels)
        return tree, score, chart

    def _bi_root(self, tab, n, chart):
        """Best tree whose first constituent is the FA/FO quad on ``(0, 2)``."""
        lid = self.lid
        a = max(self.a_ids, key=lambda t: (tab[0][1][t], -t))
        o = max(self.o_ids, key=lambda t: (tab[1][2][t], -t))
        q = tab[0][2][lid["Q"]] + tab[0][1][a] + tab[0][1][lid["AT"]] + tab[1][2][o] + tab[1][2][lid["OT"]]
        best = chart.best
        cands = [(0.0 if n == 2 else NEG, None)]
        if n > 2:
            cands += [(best["I"][2][n], "I"), (best["S|Q"][2][n], "S|Q"), (best["S|I.Q"][2][n], "S|I.Q")]
        tail, form = _argmax(cands)
        score = tab[0][n][lid["S"]] + q + tail
        L = self.labels
        qnode = OpinionTree("Q", (0, 2), (
            OpinionTree(L.label(a), (0, 1), (OpinionTree("AT", (0, 1)),)),
            OpinionTree(L.label(o), (1, 2), (OpinionTree("OT", (1, 2)),)),
        ))
        kids = [qnode]
        if form == "I":
            kids.append(OpinionTree("I", (2, n)))
        elif form is not None:
            kids += self._tail(form, 2, n, chart)
        return score, OpinionTree("S", (0, n), tuple(kids))

    def decode(self, table: np.ndarray, check: bool = False) -> tuple[OpinionTree, float]:
        tree, score, _ = self.decode_with_chart(table)
        if check and not is_valid_tree(tree, self.grammar):
            raise DecodeError(f"decoded an invalid tree: {tree}")
        return tree, score

    def loss_augmented_decode(self, table: np.ndarray, gold: LabeledSpanSet) -> tuple[OpinionTree, float]:
        """Most violating tree under ``s(T) + hamming(T, gold)`` and that augmented score."""
        tree, _ = self.decode(augment_table(table, gold, self.labels))
        spans = tree_to_spans(tree)
        parts = [float(table[i, j, self.labels.index(lab)]) for i, j, lab in spans]
        return tree, math.fsum(parts + [float(hamming(spans, gold))])


def _argmax(cands):
    """First candidate with the highest score; ties keep the lowest split."""
    top, bp = NEG, None
    for v, b in cands:
        if v > top:
            top, bp = v, b
    return top, bp


def decode_unconstrained(table: np.ndarray, labels: LabelSet) -> OpinionTree:
    """Label-unconstrained binary CKY (ablation only; the result may be invalid).

    Every span takes its best label or EMPTY (score 0); EMPTY nodes are
    spliced out and the root is always labeled S.
    """
    n = table.shape[0] - 1
    if n == 0:
        return OpinionTree("S", (0, 0))
    tab = table.tolist()
    lab = [[None] * (n + 1) for _ in range(n + 1)]
    val = [[0.0] * (n + 1) for _ in range(n + 1)]
    split = {}
    for width in range(1, n + 1):
        for i in range(n - width + 1):
            j = i + width
            row = tab[i][j]
            t = max(range(len(row)), key=lambda x: (row[x], -x))
            lab[i][j], s = (t, row[t]) if row[t] > 0.0 else (None, 0.0)
            if width > 1:
                k = max(range(i + 1, j), key=lambda m: (val[i][m] + val[m][j], -m))
                s += val[i][k] + val[k][j]
                split[(i, j)] = k
            val[i][j] = s

    def build(i, j) -> list[OpinionTree]:
        kids = []
        if (i, j) in split:
            k = split[(i, j)]
            kids = build(i, k) + build(k, j)
        if lab[i][j] is None:
            return kids or [OpinionTree("I", (i, j))]
        return [OpinionTree(labels.label(lab[i][j]), (i, j), tuple(kids))]

    top = build(0, n)
    if len(top) == 1 and top[0].label == "S":
        return top[0]
    return OpinionTree("S", (0, n), tuple(top))


_DECODERS: dict = {}


def get_decoder(grammar: Grammar) -> Decoder:
    key = id(grammar)
    dec = _DECODERS.get(key)
    if dec is None or dec.grammar is not grammar:
        dec = _DECODERS[key] = Decoder(grammar)
    return dec


def decode(table: np.ndarray, grammar: Grammar, check: bool = False) -> tuple[OpinionTree, float]:
    return get_decoder(grammar).decode(table, check=check)


def loss_augmented_decode(table, grammar, gold):
    return get_decoder(grammar).loss_augmented_decode(table, gold)

