"""Quadruples -> opinion trees.

The builder groups a sentence's quadruples into *units*, one per Q node:

* an explicit unit joins one "single" term (aspect or opinion) with one or
  more terms on the other side (one-to-many when there are several);
* an implicit unit carries a quad whose aspect or opinion is missing;
* a bi-implicit unit sits on the FA/FO pseudo tokens.

Category and polarity values that share a term are stacked as same-span
chains in ascending label order (cross-mapping).  :func:`pair_levels` is the
single pairing rule used both here and during recovery, so a sentence is
parseable exactly when its canonical chains pair back to the gold quads.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .grammar import FA, FO, POLARITIES, Grammar, label_kind
from .trees import OpinionTree

Span = tuple[int, int]


@dataclass(frozen=True)
class SentimentQuadruple:
    """(aspect term, category, opinion term, polarity); ``None`` marks an implicit term."""

    aspect: Span | None
    category: str
    opinion: Span | None
    polarity: str

    def __post_init__(self):
        for span in (self.aspect, self.opinion):
            if span is not None and not (0 <= span[0] < span[1]):
                raise ValueError(f"bad span {span}")
        if self.polarity not in POLARITIES:
            raise ValueError(f"unknown polarity {self.polarity!r}")

    @property
    def fully_implicit(self) -> bool:
        return self.aspect is None and self.opinion is None

    def sort_key(self):
        return (
            self.aspect or (-1, -1),
            self.category,
            self.opinion or (-1, -1),
            POLARITIES.index(self.polarity),
        )

    def shift(self, offset: int) -> "SentimentQuadruple":
        mv = lambda s: None if s is None else (s[0] + offset, s[1] + offset)  # noqa: E731
        return SentimentQuadruple(mv(self.aspect), self.category, mv(self.opinion), self.polarity)


class SituationTag(str, enum.Enum):
    BASIC = "basic"
    ONE_TO_MANY = "one_to_many"
    MONO_IMPLICIT = "mono_implicit"
    BI_IMPLICIT = "bi_implicit"
    CROSS_MAPPING = "cross_mapping"
    UNPARSEABLE = "unparseable"


# rarest family wins when a sentence mixes several
TAG_PRIORITY = (
    SituationTag.CROSS_MAPPING,
    SituationTag.BI_IMPLICIT,
    SituationTag.MONO_IMPLICIT,
    SituationTag.ONE_TO_MANY,
    SituationTag.BASIC,
)

UNPARSEABLE_REASONS = (
    "one_to_many_with_implicit",
    "nested_spans",
    "overlapped_spans",
    "crossing_quads",
    "duplicate_quads",
    "family_disabled",
    "unknown_category",
)


@dataclass(frozen=True)
class Unparseable:
    reason: str
    detail: str = ""

    tag = SituationTag.UNPARSEABLE

    def __bool__(self):
        return False


class UnparseableError(ValueError):
    def __init__(self, result: Unparseable):
        super().__init__(f"unparseable sentence: {result.reason} {result.detail}".strip())
        self.reason = result.reason
        self.result = result


# ---------------------------------------------------------------------------
# FA/FO augmentation


def has_implicit_prefix(tokens: Sequence[str]) -> bool:
    return len(tokens) >= 2 and tokens[0] == FA and tokens[1] == FO


def augment_tokens(tokens, quads):
    """Prepend FA/FO when some quad has neither term; rewrite those quads onto them."""
    tokens = list(tokens)
    quads = list(quads)
    if not any(q.fully_implicit for q in quads):
        return tokens, quads
    out = []
    for q in quads:
        if q.fully_implicit:
            out.append(SentimentQuadruple((0, 1), q.category, (1, 2), q.polarity))
        else:
            out.append(q.shift(2))
    return [FA, FO] + tokens, out


def strip_augmentation(quads, augmented: bool):
    """Undo :func:`augment_tokens` on a list of quads."""
    if not augmented:
        return list(quads)
    out = []
    for q in quads:
        aspect = None if q.aspect == (0, 1) else q.aspect
        opinion = None if q.opinion == (1, 2) else q.opinion
        q = SentimentQuadruple(aspect, q.category, opinion, q.polarity)
        out.append(q.shift(-2))
    return out


# ---------------------------------------------------------------------------
# pairing rule shared with recovery


def pair_levels(single: Sequence, multi: Sequence) -> list[tuple]:
    """Pair the chain values of the single term with the flattened multi-side levels.

    A length-1 side pairs with everything on the other side; equal lengths
    pair in parallel order; otherwise both sides are walked in parallel and
    the shorter one repeats its last value.
    """
    if not single or not multi:
        return []
    if len(single) == 1:
        return [(single[0], m) for m in multi]
    if len(multi) == 1:
        return [(s, multi[0]) for s in single]
    n = max(len(single), len(multi))
    return [(single[min(k, len(single) - 1)], multi[min(k, len(multi) - 1)]) for k in range(n)]


# ---------------------------------------------------------------------------
# analysis


@dataclass
class _Unit:
    kind: str  # "explicit" | "implicit_aspect" | "implicit_opinion" | "bi"
    extent: Span
    # explicit: single term, its chain values, and the multi side
    single_side: str = ""  # "A" or "O"
    single_span: Span | None = None
    single_values: tuple = ()
    multi: list = field(default_factory=list)  # [(span, values)] in text order
    single_first: bool = True
    # implicit / bi
    category: str = ""
    polarity: str = ""
    term: Span | None = None

    @property
    def tag(self) -> SituationTag:
        if self.kind == "bi":
            return SituationTag.BI_IMPLICIT
        if self.kind != "explicit":
            return SituationTag.MONO_IMPLICIT
        if len(self.single_values) > 1 or any(len(v) > 1 for _, v in self.multi):
            return SituationTag.CROSS_MAPPING
        if len(self.multi) > 1:
            return SituationTag.ONE_TO_MANY
        return SituationTag.BASIC


@dataclass
class _Plan:
    units: list
    tag: SituationTag


def _order_key(grammar: Grammar | None):
    cats = grammar.categories if grammar is not None else None

    def cat_key(c):
        return (cats.index(c), c) if cats and c in cats else (len(cats or ()), c)

    return cat_key, POLARITIES.index


def _relation(a: Span, b: Span) -> str:
    if a[1] <= b[0] or b[1] <= a[0]:
        return "disjoint"
    if a == b:
        return "equal"
    if (a[0] <= b[0] and b[1] <= a[1]) or (b[0] <= a[0] and a[1] <= b[1]):
        return "nested"
    return "overlapped"


def _analyze(tokens, quads, grammar: Grammar | None = None):
    n = len(tokens)
    for q in quads:
        for span in (q.aspect, q.opinion):
            if span is not None and span[1] > n:
                raise ValueError(f"span {span} out of range for {n} tokens")
    if len(set(quads)) != len(quads):
        dup = next(q for q in quads if quads.count(q) > 1)
        return Unparseable("duplicate_quads", f"{dup.aspect} {dup.category} {dup.opinion} {dup.polarity}")
    if grammar is not None:
        unknown = sorted({q.category for q in quads} - set(grammar.categories))
        if unknown:
            return Unparseable("unknown_category", ", ".join(unknown))

    prefix = has_implicit_prefix(tokens)
    cat_key, pol_key = _order_key(grammar)

    def is_bi(q):
        return prefix and q.aspect == (0, 1) and q.opinion == (1, 2)

    bi = [q for q in quads if is_bi(q)]
    rest = [q for q in quads if not is_bi(q)]
    if len(bi) > 1:
        return Unparseable("one_to_many_with_implicit", "several quads on FA/FO")
    if prefix:
        for q in rest:
            for span in (q.aspect, q.opinion):
                if span is not None and span[0] < 2:
                    return Unparseable("crossing_quads", "explicit term on FA/FO")

    aspects = sorted({q.aspect for q in rest if q.aspect is not None})
    opinions = sorted({q.opinion for q in rest if q.opinion is not None})
    terms = [(s, "A") for s in aspects] + [(s, "O") for s in opinions]
    for x in range(len(terms)):
        for y in range(x + 1, len(terms)):
            rel = _relation(terms[x][0], terms[y][0])
            if rel == "nested" or rel == "equal":
                return Unparseable("nested_spans", f"{terms[x][0]} / {terms[y][0]}")
            if rel == "overlapped":
                return Unparseable("overlapped_spans", f"{terms[x][0]} / {terms[y][0]}")

    units: list[_Unit] = []
    for q in bi:
        units.append(_Unit("bi", (0, 2), category=q.category, polarity=q.polarity))

    implicit = [q for q in rest if q.aspect is None or q.opinion is None]
    explicit = [q for q in rest if q.aspect is not None and q.opinion is not None]
    term_use = Counter()
    for q in rest:
        term_use.update(s for s in ((q.aspect, "A"), (q.opinion, "O")) if s[0] is not None)
    for q in implicit:
        span, side = (q.opinion, "O") if q.aspect is None else (q.aspect, "A")
        if term_use[(span, side)] > 1:
            return Unparseable("one_to_many_with_implicit", f"term {span}")
        kind = "implicit_aspect" if q.aspect is None else "implicit_opinion"
        units.append(_Unit(kind, span, category=q.category, polarity=q.polarity, term=span))

    # connected components of the aspect/opinion graph
    parent: dict = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for q in explicit:
        parent[find((q.aspect, "A"))] = find((q.opinion, "O"))
    comps: dict = {}
    for q in explicit:
        comps.setdefault(find((q.aspect, "A")), []).append(q)

    for comp in comps.values():
        a_spans = sorted({q.aspect for q in comp})
        o_spans = sorted({q.opinion for q in comp})
        if len(a_spans) > 1 and len(o_spans) > 1:
            return Unparseable("crossing_quads", "many-to-many term links")
        if len(a_spans) == 1:
            side, single, multi_spans = "A", a_spans[0], o_spans
        else:
            side, single, multi_spans = "O", o_spans[0], a_spans
        if all(s[0] >= single[1] for s in multi_spans):
            single_first = True
        elif all(s[1] <= single[0] for s in multi_spans):
            single_first = False
        else:
            return Unparseable("crossing_quads", "single term inside its group")
        if side == "A":
            single_vals = sorted({q.category for q in comp}, key=cat_key)
            multi = [(s, tuple(sorted({q.polarity for q in comp if q.opinion == s}, key=pol_key)))
                     for s in multi_spans]
        else:
            single_vals = sorted({q.polarity for q in comp}, key=pol_key)
            multi = [(s, tuple(sorted({q.category for q in comp if q.aspect == s}, key=cat_key)))
                     for s in multi_spans]
        unit = _Unit(
            "explicit",
            (min(single[0], multi_spans[0][0]), max(single[1], multi_spans[-1][1])),
            single_side=side,
            single_span=single,
            single_values=tuple(single_vals),
            multi=multi,
            single_first=single_first,
        )
        if Counter(_unit_quads(unit)) != Counter(comp):
            return Unparseable("crossing_quads", "category/opinion pairing not recoverable")
        units.append(unit)

    units.sort(key=lambda u: (u.extent, u.kind))
    for u, v in zip(units, units[1:]):
        if u.extent[1] > v.extent[0]:
            return Unparseable("crossing_quads", f"units {u.extent} and {v.extent} interleave")

    tags = {u.tag for u in units} or {SituationTag.BASIC}
    tag = next(t for t in TAG_PRIORITY if t in tags)
    plan = _Plan(units, tag)
    if grammar is not None:
        missing = _required_families(plan) - set(grammar.families)
        if missing:
            return Unparseable("family_disabled", f"needs {', '.join(sorted(missing))}")
    return plan


def _unit_quads(unit: _Unit) -> list[SentimentQuadruple]:
    if unit.kind == "bi":
        return [SentimentQuadruple((0, 1), unit.category, (1, 2), unit.polarity)]
    if unit.kind == "implicit_aspect":
        return [SentimentQuadruple(None, unit.category, unit.term, unit.polarity)]
    if unit.kind == "implicit_opinion":
        return [SentimentQuadruple(unit.term, unit.category, None, unit.polarity)]
    levels = [(span, v) for span, values in unit.multi for v in values]
    out = []
    for sval, (span, mval) in pair_levels(unit.single_values, levels):
        if unit.single_side == "A":
            out.append(SentimentQuadruple(unit.single_span, sval, span, mval))
        else:
            out.append(SentimentQuadruple(span, mval, unit.single_span, sval))
    return out


def validate_parseable(tokens, quads, grammar: Grammar | None = None):
    """Situation tag of a sentence, or an :class:`Unparseable` with its reason.

    Fully implicit quads are rewritten onto FA/FO first, so both raw and
    already-augmented input are accepted.
    """
    tokens, quads = augment_tokens(tokens, quads)
    plan = _analyze(tokens, quads, grammar)
    if isinstance(plan, Unparseable):
        return plan
    return plan.tag


# ---------------------------------------------------------------------------
# full (unpruned) trees


def _leaf(label, span):
    return OpinionTree(label, span)


def _gap(a: int, b: int) -> OpinionTree:
    """I node between two constituents; zero width when they touch."""
    return OpinionTree("I", (a, b))


def _aspect_node(span, categories):
    node = _leaf("AT", span)
    for c in reversed(categories):
        node = OpinionTree(f"C:{c}", span, (node,))
    return OpinionTree("A", span, (node,))


def _opinion_node(span, polarities):
    node = _leaf("OT", span)
    for p in reversed(polarities):
        node = OpinionTree(f"P:{p}", span, (node,))
    return OpinionTree("O", span, (node,))


def _group(label, items):
    """Left-branching ``X -> X I X`` grouping; successors attach to what precedes them."""
    node = items[0]
    for nxt in items[1:]:
        node = OpinionTree(label, (node.start, nxt.end), (node, _gap(node.end, nxt.start), nxt))
    return node


def _unit_tree(unit: _Unit) -> OpinionTree:
    if unit.kind == "bi":
        a = _aspect_node((0, 1), [unit.category])
        o = _opinion_node((1, 2), [unit.polarity])
        return OpinionTree("Q", (0, 2), (a, _gap(1, 1), o))
    if unit.kind == "implicit_aspect":
        o = _opinion_node(unit.term, [unit.polarity])
        c = OpinionTree(f"C:{unit.category}", unit.term, (o,))
        return OpinionTree("Q", unit.term, (c,))
    if unit.kind == "implicit_opinion":
        a = _aspect_node(unit.term, [unit.category])
        p = OpinionTree(f"P:{unit.polarity}", unit.term, (a,))
        return OpinionTree("Q", unit.term, (p,))
    if unit.single_side == "A":
        single = _aspect_node(unit.single_span, unit.single_values)
        items = [_opinion_node(s, v) for s, v in unit.multi]
        group = _group("O", items)
    else:
        single = _opinion_node(unit.single_span, unit.single_values)
        items = [_aspect_node(s, v) for s, v in unit.multi]
        group = _group("A", items)
    left, right = (single, group) if unit.single_first else (group, single)
    return OpinionTree("Q", unit.extent, (left, _gap(left.end, right.start), right))


def _required_families(plan: _Plan) -> set[str]:
    need = set()
    for u in plan.units:
        if u.kind == "bi":
            need.add("bi_implicit")
        elif u.kind != "explicit":
            need.add("mono_implicit")
        else:
            if len(u.multi) > 1:
                need.add("one_to_many")
            if len(u.single_values) > 1 or any(len(v) > 1 for _, v in u.multi):
                need.add("cross_mapping")
    return need


def build_tree(tokens, quads, grammar: Grammar) -> OpinionTree:
    """Full-grammar opinion tree for an (augmented) sentence.

    Raises :class:`UnparseableError` when the quads cannot be normalized, or
    when they need a rule family the grammar does not enable.
    """
    plan = _analyze(tokens, quads, grammar)
    if isinstance(plan, Unparseable):
        raise UnparseableError(plan)
    n = len(tokens)
    if not plan.units:
        return OpinionTree("S", (0, n), (_leaf("I", (0, n)), _leaf("Q", (n, n)), _leaf("I", (n, n))))
    qs = [_unit_tree(u) for u in plan.units]
    top = _group("Q", qs)
    return OpinionTree("S", (0, n), (_gap(0, top.start), top, _gap(top.end, n)))


# ---------------------------------------------------------------------------
# pruning


def prune_tree(tree: OpinionTree) -> OpinionTree:
    """Three pruning steps: fold C/P chains into A/O, drop empty chains, splice self-recursive groups."""
    tree = _integrate(tree)
    tree = _drop_empty(tree)
    return _splice(tree)


def _integrate(node: OpinionTree) -> OpinionTree:
    children = tuple(_integrate(c) for c in node.children)
    kind, _, value = node.label.partition(":")
    if kind == "C":
        return OpinionTree(f"A:{value}", node.span, children)
    if kind == "P":
        return OpinionTree(f"O:{value}", node.span, children)
    if node.label in ("A", "O") and len(children) == 1 and children[0].label.startswith(node.label + ":"):
        return children[0]
    return OpinionTree(node.label, node.span, children)


def _drop_empty(node: OpinionTree) -> OpinionTree:
    kids = tuple(_drop_empty(c) for c in node.children if c.start < c.end)
    return OpinionTree(node.label, node.span, kids)


def _splice(node: OpinionTree) -> OpinionTree:
    out = []
    for c in node.children:
        c = _splice(c)
        if c.label in ("A", "O", "Q") and any(label_kind(g.label) == c.label for g in c.children):
            out.extend(c.children)
        else:
            out.append(c)
    return OpinionTree(node.label, node.span, tuple(out))


# ---------------------------------------------------------------------------
# one-stop normalization


@dataclass(frozen=True)
class NormalizedSentence:
    tokens: tuple  # augmented when a quad is fully implicit
    quads: tuple  # original, un-augmented
    tree: OpinionTree  # pruned
    full_tree: OpinionTree
    tag: SituationTag
    augmented: bool


def normalize(tokens, quads, grammar: Grammar) -> NormalizedSentence:
    """augment -> validate -> build -> prune."""
    aug_tokens, aug_quads = augment_tokens(tokens, quads)
    plan = _analyze(aug_tokens, aug_quads, grammar)
    if isinstance(plan, Unparseable):
        raise UnparseableError(plan)
    full = build_tree(aug_tokens, aug_quads, grammar)
    return NormalizedSentence(
        tokens=tuple(aug_tokens),
        quads=tuple(quads),
        tree=prune_tree(full),
        full_tree=full,
        tag=plan.tag,
        augmented=len(aug_tokens) != len(tokens),
    )
