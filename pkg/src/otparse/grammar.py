"""Context-free opinion grammar.

Two grammar forms are used throughout the package:

* the *full* grammar returned by :func:`build_grammar`, whose symbols are the
  node kinds of an unpruned opinion tree (S, Q, I, A, O, C, P, AT, OT, W);
* the *pruned* grammar returned by :func:`pruned_grammar`, a binary grammar
  over the node shapes that survive pruning.  This is the grammar the chart
  decoder searches.

Both are plain :class:`Grammar` values.  Each grammar symbol carries a label
pattern saying which tree labels it may stand for (``"A:"`` matches every
``A:<category>`` label); symbols without a pattern are binarization
intermediates, which never appear as nodes of an n-ary tree.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

POLARITIES = ("positive", "negative", "neutral")
BASIC = "basic"
FAMILIES = ("one_to_many", "mono_implicit", "bi_implicit", "cross_mapping")
ALL_FAMILIES = frozenset(FAMILIES)

FA = "FA"
FO = "FO"
WORD = "W"
EPSILON = "<eps>"
GRAMMAR_FORMAT_VERSION = "otparse-grammar v1"


class GrammarError(ValueError):
    """Invalid grammar configuration or grammar file."""


class Kind(str, enum.Enum):
    S = "S"
    Q = "Q"
    I = "I"  # noqa: E741
    A = "A"
    O = "O"  # noqa: E741
    C = "C"
    P = "P"
    AT = "AT"
    OT = "OT"
    W = "W"
    FA = "FA"
    FO = "FO"
    INTERMEDIATE = "INTERMEDIATE"
    EMPTY = "EMPTY"


@dataclass(frozen=True)
class Symbol:
    """A node label split into its kind and optional category/polarity value."""

    kind: Kind
    category: str | None = None
    polarity: str | None = None

    def __post_init__(self):
        # A/O carry a value only in pruned (composite) form
        if self.category is not None and self.kind not in (Kind.C, Kind.A):
            raise GrammarError(f"category value not allowed on {self.kind.value}")
        if self.polarity is not None and self.kind not in (Kind.P, Kind.O):
            raise GrammarError(f"polarity value not allowed on {self.kind.value}")
        if self.kind is Kind.C and self.category is None:
            raise GrammarError("C symbol needs a category")
        if self.kind is Kind.P and self.polarity is None:
            raise GrammarError("P symbol needs a polarity")

    @property
    def label(self) -> str:
        value = self.category if self.category is not None else self.polarity
        return self.kind.value if value is None else f"{self.kind.value}:{value}"

    @classmethod
    def from_label(cls, label: str) -> "Symbol":
        kind, _, value = label.partition(":")
        if "|" in kind:
            return cls(Kind.INTERMEDIATE)
        k = Kind(kind)
        if not value:
            return cls(k)
        if k in (Kind.C, Kind.A):
            return cls(k, category=value)
        return cls(k, polarity=value)


def label_kind(label: str) -> str:
    """``"A:FOOD#QUALITY"`` -> ``"A"``."""
    return label.split(":", 1)[0]


def normalize_category(raw: str) -> str:
    """Upper-case a category id and join entity/attribute with ``#``.

    >>> normalize_category("food quality")
    'FOOD#QUALITY'
    >>> normalize_category("Laptop#Design_Features")
    'LAPTOP#DESIGN_FEATURES'
    """
    text = raw.strip().upper()
    if "#" not in text:
        text = re.sub(r"\s+", "#", text, count=1)
    text = re.sub(r"\s+", "_", text)
    if not text or "(" in text or ")" in text or ":" in text:
        raise GrammarError(f"unusable category id {raw!r}")
    return text


@dataclass(frozen=True)
class Rule:
    lhs: str
    rhs: tuple[str, ...]
    family: str = BASIC
    # child label must come strictly later in label order than the parent's
    ascending: bool = False

    def __str__(self):
        rhs = " ".join(self.rhs) if self.rhs else EPSILON
        return f"{self.lhs} -> {rhs}"


@dataclass(frozen=True)
class Grammar:
    """G = (N, Sigma, P, S) plus the label patterns of its symbols."""

    nonterminals: tuple[str, ...]
    terminals: tuple[str, ...]
    rules: tuple[Rule, ...]
    start: str
    categories: tuple[str, ...]
    polarities: tuple[str, ...]
    families: frozenset
    patterns: dict = field(compare=False, hash=False)
    form: str = "full"

    def __post_init__(self):
        if self.start not in self.nonterminals:
            raise GrammarError("start symbol must be a nonterminal")
        if set(self.nonterminals) & set(self.terminals):
            raise GrammarError("nonterminals and terminals overlap")

    @property
    def implicit_prefix(self) -> bool:
        """True when sentences carry the FA/FO pseudo-token prefix at decode time."""
        return "bi_implicit" in self.families

    def rules_for(self, lhs: str) -> list[Rule]:
        return [r for r in self.rules if r.lhs == lhs]

    def is_intermediate(self, symbol: str) -> bool:
        return symbol in self.patterns and self.patterns[symbol] is None

    def label_order(self, label: str) -> int:
        kind, _, value = label.partition(":")
        if kind in ("A", "C"):
            return self.categories.index(value)
        if kind in ("O", "P"):
            return self.polarities.index(value)
        return -1

    def is_binary(self) -> bool:
        return all(len(r.rhs) <= 2 for r in self.rules)


# ---------------------------------------------------------------------------
# construction


_FULL_PATTERNS = {
    "S": "S", "Q": "Q", "I": "I", "A": "A", "O": "O",
    "C": "C:", "P": "P:", "AT": "AT", "OT": "OT", "W": "W",
}


def _check_categories(categories: Sequence[str]) -> tuple[str, ...]:
    cats = tuple(normalize_category(c) for c in categories)
    if not cats:
        raise GrammarError("at least one category is required")
    if len(set(cats)) != len(cats):
        dup = sorted({c for c in cats if cats.count(c) > 1})
        raise GrammarError(f"duplicate category ids: {dup}")
    return cats


def _check_families(families: Iterable[str]) -> frozenset:
    fams = frozenset(families) - {BASIC}
    unknown = fams - ALL_FAMILIES
    if unknown:
        raise GrammarError(f"unknown rule families: {sorted(unknown)}")
    return fams


def build_grammar(categories: Sequence[str], enabled_families: Iterable[str] = ALL_FAMILIES) -> Grammar:
    """Full opinion grammar: the basic rules plus each enabled conditional family."""
    cats = _check_categories(categories)
    fams = _check_families(enabled_families)
    rules = [
        Rule("S", ("I", "Q", "I")),
        Rule("Q", ("A", "I", "O")),
        Rule("Q", ("O", "I", "A")),
        Rule("Q", ()),
        Rule("Q", ("Q", "I", "Q")),
        Rule("A", ("C",)),
        Rule("C", ("AT",)),
        Rule("O", ("P",)),
        Rule("P", ("OT",)),
        Rule("AT", (WORD,)),
        Rule("OT", (WORD,)),
        Rule("I", (WORD,)),
        Rule(WORD, (WORD, WORD)),
        Rule(WORD, ()),
    ]
    if "one_to_many" in fams:
        rules += [Rule("A", ("A", "I", "A"), "one_to_many"), Rule("O", ("O", "I", "O"), "one_to_many")]
    if "mono_implicit" in fams:
        rules += [
            Rule("Q", ("C",), "mono_implicit"),
            Rule("C", ("O",), "mono_implicit"),
            Rule("Q", ("P",), "mono_implicit"),
            Rule("P", ("A",), "mono_implicit"),
        ]
    # bi_implicit contributes the FA/FO terminals only; they are derived through W
    if "cross_mapping" in fams:
        rules += [Rule("C", ("C",), "cross_mapping"), Rule("P", ("P",), "cross_mapping")]
    terminals = ("<word>",) + ((FA, FO) if "bi_implicit" in fams else ())
    return Grammar(
        nonterminals=("S", "Q", "I", "A", "O", "C", "P", "AT", "OT", WORD),
        terminals=terminals,
        rules=tuple(rules),
        start="S",
        categories=cats,
        polarities=POLARITIES,
        families=fams,
        patterns=dict(_FULL_PATTERNS),
        form="full",
    )


def pruned_grammar(grammar: Grammar) -> Grammar:
    """Binary grammar over pruned opinion trees, as searched by the chart decoder.

    Symbols ``At``/``Ot`` are aspect/opinion nodes anchored on an explicit
    term (optionally a stacked chain when cross-mapping is enabled);
    ``Ai``/``Oi`` are the implicit-term forms; ``At1``/``Ot1`` are single,
    unstacked term nodes.  Names containing ``|`` are right-branching
    intermediates.
    """
    fams = grammar.families
    rules: list[Rule] = []

    def add(lhs, *rhs, family=BASIC, ascending=False):
        rules.append(Rule(lhs, tuple(rhs), family, ascending))

    add("S")
    add("S", "I")
    add("S", "S|Q")
    add("S", "I", "S|Q")
    add("S|Q", "Q")
    add("S|Q", "Q", "I")
    add("S|Q", "Q", "S|Q")
    add("S|Q", "Q", "S|I.Q")
    add("S|I.Q", "I", "S|Q")

    add("Q", "At", "Ot")
    add("Q", "At", "Q|I.O")
    add("Q|I.O", "I", "Ot")
    add("Q", "Ot", "At")
    add("Q", "Ot", "Q|I.A")
    add("Q|I.A", "I", "At")

    if "one_to_many" in fams:
        f = "one_to_many"
        for x, y in (("A", "O"), ("O", "A")):
            xt, yt = x + "t", y + "t"
            # one x followed by two or more y
            add("Q", xt, f"Q|{y}.{y}+", family=f)
            add("Q", xt, f"Q|I.{y}.{y}+", family=f)
            add(f"Q|I.{y}.{y}+", "I", f"Q|{y}.{y}+", family=f)
            add(f"Q|{y}.{y}+", yt, f"Q|{y}+", family=f)
            add(f"Q|{y}.{y}+", yt, f"Q|I.{y}+", family=f)
            add(f"Q|{y}+", yt, family=f)
            add(f"Q|{y}+", yt, f"Q|{y}+", family=f)
            add(f"Q|{y}+", yt, f"Q|I.{y}+", family=f)
            add(f"Q|I.{y}+", "I", f"Q|{y}+", family=f)
            # two or more x followed by one y
            add("Q", xt, f"Q|{x}+.{y}", family=f)
            add("Q", xt, f"Q|I.{x}+.{y}", family=f)
            add(f"Q|I.{x}+.{y}", "I", f"Q|{x}+.{y}", family=f)
            add(f"Q|{x}+.{y}", xt, yt, family=f)
            add(f"Q|{x}+.{y}", xt, f"Q|I.{y}", family=f)
            add(f"Q|{x}+.{y}", xt, f"Q|{x}+.{y}", family=f)
            add(f"Q|{x}+.{y}", xt, f"Q|I.{x}+.{y}", family=f)

    if "mono_implicit" in fams:
        add("Q", "Ai", family="mono_implicit")
        add("Q", "Oi", family="mono_implicit")
        add("Ai", "Ot1", family="mono_implicit")
        add("Oi", "At1", family="mono_implicit")

    if "cross_mapping" in fams:
        add("At", "At", family="cross_mapping", ascending=True)
        add("Ot", "Ot", family="cross_mapping", ascending=True)

    add("At", "AT")
    add("Ot", "OT")
    if fams & {"mono_implicit", "bi_implicit"}:
        add("At1", "AT")
        add("Ot1", "OT")
    add("AT", WORD)
    add("OT", WORD)
    add("I", WORD)

    patterns: dict[str, str | None] = {}
    for r in rules:
        for sym in (r.lhs,) + r.rhs:
            if sym == WORD or sym in patterns:
                continue
            patterns[sym] = _pruned_pattern(sym)
    nonterminals = tuple(patterns)
    return Grammar(
        nonterminals=nonterminals,
        terminals=grammar.terminals,
        rules=tuple(rules),
        start="S",
        categories=grammar.categories,
        polarities=grammar.polarities,
        families=grammar.families,
        patterns=patterns,
        form="pruned",
    )


def _pruned_pattern(sym: str) -> str | None:
    if "|" in sym:
        return None
    if sym in ("At", "At1", "Ai"):
        return "A:"
    if sym in ("Ot", "Ot1", "Oi"):
        return "O:"
    return sym


def binarize(grammar: Grammar) -> Grammar:
    """Right-branching binarization with named intermediates.

    ``S -> I Q I`` becomes ``S -> I S|Q.I`` and ``S|Q.I -> Q I``.
    """
    rules: list[Rule] = []
    seen: set[Rule] = set()
    patterns = dict(grammar.patterns)
    nonterminals = list(grammar.nonterminals)

    def emit(rule):
        if rule not in seen:
            seen.add(rule)
            rules.append(rule)

    for rule in grammar.rules:
        if len(rule.rhs) <= 2:
            emit(rule)
            continue
        lhs = rule.lhs
        rest = rule.rhs
        while len(rest) > 2:
            kind = label_kind(rule.lhs.split("|", 1)[0])
            name = f"{kind}|{'.'.join(rest[1:])}"
            emit(Rule(lhs, (rest[0], name), rule.family))
            if name not in patterns:
                patterns[name] = None
                nonterminals.append(name)
            lhs, rest = name, rest[1:]
        emit(Rule(lhs, rest, rule.family))
    return Grammar(
        nonterminals=tuple(nonterminals),
        terminals=grammar.terminals,
        rules=tuple(rules),
        start=grammar.start,
        categories=grammar.categories,
        polarities=grammar.polarities,
        families=grammar.families,
        patterns=patterns,
        form=grammar.form if grammar.form != "full" else "binarized",
    )


# ---------------------------------------------------------------------------
# labels


@dataclass(frozen=True)
class LabelSet:
    """Scored node labels of pruned trees and their integer ids.

    ``EMPTY`` (a span carrying no constituent) and ``INTERMEDIATE``
    (binarization artifacts) are zero-score sentinels kept outside the index.
    """

    labels: tuple[str, ...]

    EMPTY = "EMPTY"
    INTERMEDIATE = "INTERMEDIATE"

    def __post_init__(self):
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(self.labels)})
        if len(self._index) != len(self.labels):
            raise GrammarError("duplicate labels")

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, label):
        return label in self._index

    def index(self, label: str) -> int:
        return self._index[label]

    def label(self, idx: int) -> str:
        return self.labels[idx]

    def ids_with_prefix(self, prefix: str) -> list[int]:
        return [i for i, lab in enumerate(self.labels) if lab.startswith(prefix)]


STRUCTURAL_LABELS = ("S", "Q", "I", "AT", "OT")


def build_label_set(grammar: Grammar) -> LabelSet:
    labels = list(STRUCTURAL_LABELS)
    labels += [f"A:{c}" for c in grammar.categories]
    labels += [f"O:{p}" for p in grammar.polarities]
    return LabelSet(tuple(labels))


# ---------------------------------------------------------------------------
# tree validity


def _matches(pattern: str | None, label: str) -> bool:
    if pattern is None:
        return False
    if pattern.endswith(":"):
        return label.startswith(pattern) and len(label) > len(pattern)
    return label == pattern


class _Deriver:
    """Checks whether a tree is derivable, treating intermediates as implicit or explicit nodes."""

    def __init__(self, grammar: Grammar):
        self.g = grammar
        self.by_lhs: dict[str, list[Rule]] = {}
        for r in grammar.rules:
            self.by_lhs.setdefault(r.lhs, []).append(r)
        self.eps_words = Rule(WORD, ()) in set(grammar.rules)
        self.memo: dict = {}

    def node(self, sym: str, node) -> bool:
        key = (sym, id(node))
        if key not in self.memo:
            self.memo[key] = False  # guards against unary cycles
            pat = self.g.patterns.get(sym)
            if pat is None:
                ok = node.label == sym and self.seq(sym, node, 0)
            else:
                ok = _matches(pat, node.label) and self.seq(sym, node, 0)
            self.memo[key] = ok
        return self.memo[key]

    def seq(self, sym: str, node, start: int) -> bool:
        """Can ``sym`` derive ``node.children[start:]`` (as children of ``node``)?"""
        children = node.children
        for rule in self.by_lhs.get(sym, ()):
            rhs = rule.rhs
            if rhs == ():
                if start == 0 and not children and node.span[0] == node.span[1]:
                    return True
                continue
            if rhs == (WORD,):
                width = node.span[1] - node.span[0]
                if start == 0 and not children and (width > 0 or self.eps_words):
                    return True
                continue
            if self._match_rhs(rule, node, start):
                return True
        return False

    def _match_rhs(self, rule: Rule, node, start: int) -> bool:
        children = node.children
        rhs = rule.rhs
        pos = start
        for sym in rhs[:-1]:
            if pos >= len(children) or not self._child(rule, sym, node, children[pos]):
                return False
            pos += 1
        last = rhs[-1]
        if self.g.is_intermediate(last):
            if pos < len(children) and self.seq(last, node, pos):
                return True
            # explicit intermediate node (binarized tree)
            return (
                pos == len(children) - 1
                and children[pos].label == last
                and self.node(last, children[pos])
            )
        return pos == len(children) - 1 and self._child(rule, last, node, children[pos])

    def _child(self, rule: Rule, sym: str, parent, child) -> bool:
        if not self.node(sym, child):
            return False
        if rule.ascending:
            return self.g.label_order(child.label) > self.g.label_order(parent.label)
        return True


def is_valid_tree(tree, grammar: Grammar) -> bool:
    """True iff the root is the start symbol and every node is derivable by a grammar rule."""
    if tree is None or tree.label != grammar.start:
        return False
    if not _spans_tile(tree):
        return False
    return _Deriver(grammar).node(grammar.start, tree)


def _spans_tile(node) -> bool:
    if not node.children:
        return node.span[0] <= node.span[1]
    pos = node.span[0]
    for c in node.children:
        if c.span[0] != pos:
            return False
        pos = c.span[1]
        if not _spans_tile(c):
            return False
    return pos == node.span[1]


# ---------------------------------------------------------------------------
# tree binarization


def binarize_tree(tree):
    """Right-branching binarization of a tree, mirroring :func:`binarize`."""
    from .trees import OpinionTree

    children = [binarize_tree(c) for c in tree.children]
    kind = label_kind(tree.label)
    if len(children) <= 2:
        return OpinionTree(tree.label, tree.span, tuple(children))

    def fold(items):
        if len(items) == 2:
            return list(items)
        tail = items[1:]
        name = f"{kind}|{'.'.join(label_kind(c.label) for c in tail)}"
        node = OpinionTree(name, (tail[0].span[0], tail[-1].span[1]), tuple(fold(tail)))
        return [items[0], node]

    return OpinionTree(tree.label, tree.span, tuple(fold(children)))


def collapse_tree(tree):
    """Splice out intermediate (``|``-named) nodes."""
    from .trees import OpinionTree

    out = []
    for c in tree.children:
        c = collapse_tree(c)
        if "|" in c.label:
            out.extend(c.children)
        else:
            out.append(c)
    return OpinionTree(tree.label, tree.span, tuple(out))


# ---------------------------------------------------------------------------
# text format


def dump_grammar(grammar: Grammar) -> str:
    """Serialize to the versioned text format (see docs/formats.md)."""
    lines = [
        f"# {GRAMMAR_FORMAT_VERSION}",
        f"form: {grammar.form}",
        f"start: {grammar.start}",
        f"categories: {' '.join(grammar.categories)}",
        f"polarities: {' '.join(grammar.polarities)}",
        f"families: {' '.join(f for f in FAMILIES if f in grammar.families)}",
        f"terminals: {' '.join(grammar.terminals)}",
    ]
    for sym in grammar.nonterminals:
        pat = grammar.patterns.get(sym)
        lines.append(f"symbol: {sym} {pat if pat is not None else '-'}")
    lines.append("---")
    for r in grammar.rules:
        tag = r.family + (" ascending" if r.ascending else "")
        lines.append(f"{r} # {tag}")
    return "\n".join(lines) + "\n"


def load_grammar(text: str) -> Grammar:
    lines = text.splitlines()
    if not lines or lines[0] != f"# {GRAMMAR_FORMAT_VERSION}":
        raise GrammarError("missing or unsupported grammar header")
    header: dict[str, str] = {}
    patterns: dict[str, str | None] = {}
    nonterminals: list[str] = []
    rules: list[Rule] = []
    body = False
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if not body:
            if line == "---":
                body = True
                continue
            key, _, value = line.partition(": ")
            if key == "symbol":
                sym, pat = value.split(" ")
                patterns[sym] = None if pat == "-" else pat
                nonterminals.append(sym)
            elif key in ("form", "start", "categories", "polarities", "families", "terminals"):
                header[key] = value
            else:
                raise GrammarError(f"line {lineno}: unknown header key {key!r}")
            continue
        m = re.fullmatch(r"(\S+) -> (.+?) # (\S+)( ascending)?", line)
        if not m:
            raise GrammarError(f"line {lineno}: malformed rule {line!r}")
        rhs = () if m.group(2) == EPSILON else tuple(m.group(2).split(" "))
        rules.append(Rule(m.group(1), rhs, m.group(3), bool(m.group(4))))
    return Grammar(
        nonterminals=tuple(nonterminals),
        terminals=tuple(header.get("terminals", "").split()),
        rules=tuple(rules),
        start=header["start"],
        categories=tuple(header["categories"].split()),
        polarities=tuple(header["polarities"].split()),
        families=frozenset(header.get("families", "").split()),
        patterns=patterns,
        form=header["form"],
    )
