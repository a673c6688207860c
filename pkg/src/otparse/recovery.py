"""Pruned opinion tree -> sentiment quadruples."""

from __future__ import annotations

from .builder import SentimentQuadruple, pair_levels
from .grammar import POLARITIES, label_kind
from .trees import OpinionTree


class MalformedTreeError(ValueError):
    """The tree cannot be read back as quadruples."""


def _chain(node: OpinionTree, kind: str) -> tuple[list[str], OpinionTree]:
    """Values of a stacked ``kind:value`` chain, top to bottom, and the node below it."""
    values = []
    while label_kind(node.label) == kind and ":" in node.label:
        values.append(node.label.split(":", 1)[1])
        if len(node.children) != 1:
            raise MalformedTreeError(f"chain node {node.label}{node.span} must have one child")
        node = node.children[0]
    if not values:
        raise MalformedTreeError(f"expected an {kind}: node, got {node.label}")
    return values, node


def _term(node: OpinionTree):
    """(side, span, chain values) of an explicit aspect/opinion term node."""
    kind = label_kind(node.label)
    if kind not in ("A", "O"):
        raise MalformedTreeError(f"unexpected {node.label} inside Q")
    values, leaf = _chain(node, kind)
    if leaf.label != kind + "T" or not leaf.is_leaf or leaf.span != node.span:
        raise MalformedTreeError(f"{node.label}{node.span} does not end in a {kind}T leaf")
    for v in values:
        if kind == "O" and v not in POLARITIES:
            raise MalformedTreeError(f"unknown polarity {v!r}")
    return kind, node.span, values


def _implicit(node: OpinionTree, prefix: bool):
    kind = label_kind(node.label)
    if kind not in ("A", "O"):
        raise MalformedTreeError(f"unexpected {node.label} under Q")
    values, below = _chain(node, kind)
    other = "O" if kind == "A" else "A"
    inner_values, leaf = _chain(below, other)
    if len(values) != 1 or len(inner_values) != 1:
        raise MalformedTreeError("implicit quads take exactly one category and one polarity")
    if leaf.label != other + "T" or not leaf.is_leaf or leaf.span != node.span:
        raise MalformedTreeError(f"implicit chain at {node.span} does not end in {other}T")
    _check_outside_prefix(node.span, prefix)
    if kind == "A":  # A:c over O:p: the aspect is missing
        return SentimentQuadruple(None, values[0], node.span, inner_values[0])
    return SentimentQuadruple(node.span, inner_values[0], None, values[0])


def _check_outside_prefix(span, prefix: bool):
    if prefix and span[0] < 2:
        raise MalformedTreeError(f"term {span} overlaps the FA/FO pseudo tokens")


def _quads_of_q(q: OpinionTree, prefix: bool) -> list[SentimentQuadruple]:
    parts = [c for c in q.children if c.label != "I"]
    if prefix and q.span == (0, 2):
        terms = [_term(c) for c in parts]
        if [(t[0], t[1]) for t in terms] != [("A", (0, 1)), ("O", (1, 2))]:
            raise MalformedTreeError("FA/FO quad must be A over FA then O over FO")
        if len(terms[0][2]) != 1 or len(terms[1][2]) != 1:
            raise MalformedTreeError("FA/FO quad carries a single category and polarity")
        return [SentimentQuadruple((0, 1), terms[0][2][0], (1, 2), terms[1][2][0])]
    if len(q.children) == 1:
        return [_implicit(q.children[0], prefix)]
    terms = [_term(c) for c in parts]
    for t in terms:
        _check_outside_prefix(t[1], prefix)
    aspects = [t for t in terms if t[0] == "A"]
    opinions = [t for t in terms if t[0] == "O"]
    if not aspects or not opinions:
        raise MalformedTreeError(f"Q{q.span} lacks an aspect or an opinion")
    if len(aspects) == 1:
        single, multi = aspects[0], opinions
    elif len(opinions) == 1:
        single, multi = opinions[0], aspects
    else:
        raise MalformedTreeError(f"Q{q.span} has several aspects and several opinions")
    if terms[0] is not single and terms[-1] is not single:
        raise MalformedTreeError(f"Q{q.span}: the single term must sit at one end")
    levels = [(span, v) for _, span, values in multi for v in values]
    out = []
    for sval, (span, mval) in pair_levels(single[2], levels):
        if single[0] == "A":
            out.append(SentimentQuadruple(single[1], sval, span, mval))
        else:
            out.append(SentimentQuadruple(span, mval, single[1], sval))
    return out


def recover_quads(tree: OpinionTree, implicit_prefix: bool = False) -> list[SentimentQuadruple]:
    """Quadruples encoded by a pruned tree, in un-augmented token positions.

    With ``implicit_prefix`` the tree is over ``FA FO`` + tokens: a Q on
    ``(0, 2)`` is a quad with both terms implicit, any other term touching the
    prefix is an error, and all spans are shifted back by 2.
    """
    if tree.label != "S":
        raise MalformedTreeError(f"root is {tree.label}, not S")
    quads: list[SentimentQuadruple] = []
    for child in tree.children:
        if child.label == "I":
            continue
        if child.label != "Q":
            raise MalformedTreeError(f"unexpected {child.label} under S")
        quads.extend(_quads_of_q(child, implicit_prefix))
    if not implicit_prefix:
        return quads
    out = []
    for q in quads:
        if q.aspect == (0, 1) and q.opinion == (1, 2):
            out.append(SentimentQuadruple(None, q.category, None, q.polarity))
        else:
            out.append(q.shift(-2))
    return out
