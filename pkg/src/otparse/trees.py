"""Opinion trees, their bracketed text form, and labeled-span conversion."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Sequence

from .grammar import label_kind

# A tree as a set of (i, j, label) triples.
LabeledSpanSet = frozenset


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class OpinionTree:
    label: str
    span: tuple[int, int]
    children: tuple["OpinionTree", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]

    def nodes(self) -> Iterator["OpinionTree"]:
        """Pre-order traversal."""
        yield self
        for c in self.children:
            yield from c.nodes()

    def leaves(self) -> Iterator["OpinionTree"]:
        for n in self.nodes():
            if n.is_leaf:
                yield n

    def shift(self, offset: int) -> "OpinionTree":
        return OpinionTree(
            self.label,
            (self.span[0] + offset, self.span[1] + offset),
            tuple(c.shift(offset) for c in self.children),
        )

    def to_bracket(self, tokens: Sequence[str]) -> str:
        return to_bracket(self, tokens)

    def __str__(self):
        if self.is_leaf:
            return f"({self.label} {self.span[0]}:{self.span[1]})"
        return f"({self.label} {' '.join(map(str, self.children))})"


# ---------------------------------------------------------------------------
# bracketed text form
#
# (S (I So) (Q (O:positive (OT happy)) (I to have a) ...))
# Leaves list their tokens; a zero-width leaf is written "(I)".  Tokens "("
# and ")" are written -LRB- / -RRB-.

_ESCAPES = {"(": "-LRB-", ")": "-RRB-"}
_UNESCAPES = {v: k for k, v in _ESCAPES.items()}


def escape_token(tok: str) -> str:
    if not tok or any(ch.isspace() for ch in tok):
        raise TreeError(f"token {tok!r} cannot be bracketed")
    return _ESCAPES.get(tok, tok)


def to_bracket(tree: OpinionTree, tokens: Sequence[str]) -> str:
    if tree.is_leaf:
        words = [escape_token(t) for t in tokens[tree.start:tree.end]]
        return "(" + " ".join([tree.label] + words) + ")"
    inner = " ".join(to_bracket(c, tokens) for c in tree.children)
    return f"({tree.label} {inner})"


_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")


def from_bracket(text: str, offset: int = 0) -> tuple[OpinionTree, list[str]]:
    """Parse the bracketed form back into a tree and its token sequence."""
    toks = _TOKEN_RE.findall(text)
    words: list[str] = []
    pos = 0

    def parse() -> OpinionTree:
        nonlocal pos
        if pos >= len(toks) or toks[pos] != "(":
            raise TreeError(f"expected '(' at item {pos}")
        pos += 1
        if pos >= len(toks) or toks[pos] in "()":
            raise TreeError("missing label")
        label = toks[pos]
        pos += 1
        start = offset + len(words)
        children = []
        if pos < len(toks) and toks[pos] == "(":
            while pos < len(toks) and toks[pos] == "(":
                children.append(parse())
        else:
            while pos < len(toks) and toks[pos] not in "()":
                words.append(_UNESCAPES.get(toks[pos], toks[pos]))
                pos += 1
        if pos >= len(toks) or toks[pos] != ")":
            raise TreeError("unbalanced brackets")
        pos += 1
        return OpinionTree(label, (start, offset + len(words)), tuple(children))

    tree = parse()
    if pos != len(toks):
        raise TreeError("trailing material after tree")
    return tree, words


# ---------------------------------------------------------------------------
# labeled spans


def tree_to_spans(tree: OpinionTree) -> LabeledSpanSet:
    """One (i, j, label) triple per node.

    An ``I`` child filling the whole span of the root ``S`` is implied and not
    recorded.  Same-span unary chains (``A:c -> AT`` and stacked chains) are
    recorded node by node; their order is recoverable from the labels.
    """
    triples = []
    for node in tree.nodes():
        if node.span[0] >= node.span[1]:
            if node is tree and node.is_leaf:
                continue
            raise TreeError(f"zero-width node {node.label} in a pruned tree")
        triples.append((node.span[0], node.span[1], node.label))
    if _implied_sentence_filler(tree):
        triples.remove((tree.span[0], tree.span[1], "I"))
    out = frozenset(triples)
    if len(out) != len(triples):
        raise TreeError("duplicate labeled span; the tree builder produced a repeated chain label")
    return out


def _implied_sentence_filler(tree: OpinionTree) -> bool:
    return (
        tree.label == "S"
        and len(tree.children) == 1
        and tree.children[0].label == "I"
        and tree.children[0].span == tree.span
    )


def _chain_rank(label: str, group: set[str], order) -> tuple:
    kind = label_kind(label)
    if kind == "S":
        return (0, 0)
    if kind == "Q":
        return (1, 0)
    if kind in ("AT", "OT", "I"):
        return (9, 0)
    # the chain kind nearer the leaf goes lower
    a_first = "AT" not in group
    if kind == "A":
        return (2 if a_first else 3, order(label))
    return (3 if a_first else 2, order(label))


def spans_to_tree(spans, label_order=None) -> OpinionTree:
    """Inverse of :func:`tree_to_spans`.

    ``label_order`` maps a label to its id; stacked chains are ordered by it
    (top = smallest).  Defaults to lexicographic order.
    """
    if not spans:
        return OpinionTree("S", (0, 0))
    order = label_order or (lambda lab: lab)
    groups: dict[tuple[int, int], set[str]] = {}
    for i, j, lab in spans:
        groups.setdefault((i, j), set()).add(lab)
    items = sorted(
        spans,
        key=lambda t: (t[0], -t[1], _chain_rank(t[2], groups[(t[0], t[1])], order)),
    )
    # mutable build: [label, span, children]
    root = None
    stack: list[list] = []
    for i, j, lab in items:
        node = [lab, (i, j), []]
        while stack and not (stack[-1][1][0] <= i and j <= stack[-1][1][1]):
            stack.pop()
        if stack:
            stack[-1][2].append(node)
        elif root is None:
            root = node
        else:
            raise TreeError("labeled spans have more than one root")
        stack.append(node)

    def freeze(node) -> OpinionTree:
        label, span, children = node
        kids = tuple(freeze(c) for c in children)
        if label == "S" and not kids and span[0] < span[1]:
            kids = (OpinionTree("I", span),)
        return OpinionTree(label, span, kids)

    tree = freeze(root)
    _check_partition(tree)
    return tree


def _check_partition(node: OpinionTree):
    if node.is_leaf:
        return
    pos = node.start
    for c in node.children:
        if c.start != pos:
            raise TreeError(f"children of {node.label}{node.span} do not tile its span")
        _check_partition(c)
        pos = c.end
    if pos != node.end:
        raise TreeError(f"children of {node.label}{node.span} do not tile its span")
