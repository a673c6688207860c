"""Synthetic review sentences covering every situation tag.

Each sentence is assembled from small word banks: aspect nouns per category,
opinion words per polarity, and filler words.  The generator asks for a tag,
builds quads of that shape, and keeps the sentence only if the validator
agrees on the tag, so the corpus is correct by construction.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .builder import SentimentQuadruple, SituationTag, validate_parseable
from .grammar import Grammar, build_grammar

CATEGORIES = ("FOOD#QUALITY", "FOOD#PRICES", "SERVICE#GENERAL", "AMBIENCE#GENERAL", "RESTAURANT#GENERAL")

ASPECT_WORDS = {
    "FOOD#QUALITY": ["pizza", "sushi", "pasta", "soup", "dessert", "fish tacos"],
    "FOOD#PRICES": ["prices", "bill", "menu prices", "cost"],
    "SERVICE#GENERAL": ["waiter", "staff", "service", "hostess"],
    "AMBIENCE#GENERAL": ["decor", "music", "patio", "lighting"],
    "RESTAURANT#GENERAL": ["place", "restaurant", "bar", "spot"],
}
OPINION_WORDS = {
    "positive": ["great", "delicious", "friendly", "lovely", "amazing", "fresh"],
    "negative": ["awful", "rude", "bland", "overpriced", "slow", "noisy"],
    "neutral": ["okay", "average", "standard", "fine"],
}
# implicit values are signaled by a cue word elsewhere in the sentence
CATEGORY_CUES = {
    "FOOD#QUALITY": ["ate", "tasted"],
    "FOOD#PRICES": ["paid", "spent"],
    "SERVICE#GENERAL": ["waited", "served"],
    "AMBIENCE#GENERAL": ["sat", "listened"],
    "RESTAURANT#GENERAL": ["visited", "partied"],
}
POLARITY_CUES = {
    "positive": ["loved", "enjoyed"],
    "negative": ["hated", "regretted"],
    "neutral": ["noticed", "considered"],
}
FILLERS = ["the", "was", "and", "but", "we", "really", "so", "here", "very", "quite", "a", "it", "is", "too"]

TAGS = (
    SituationTag.BASIC,
    SituationTag.ONE_TO_MANY,
    SituationTag.MONO_IMPLICIT,
    SituationTag.BI_IMPLICIT,
    SituationTag.CROSS_MAPPING,
)


@dataclass(frozen=True)
class FixtureSentence:
    tokens: tuple
    quads: tuple
    tag: SituationTag


class _Writer:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.tokens: list[str] = []

    def filler(self, lo=0, hi=2):
        self.tokens += [self.rng.choice(FILLERS) for _ in range(self.rng.randint(lo, hi))]

    def cue(self, bank, value):
        self.tokens.append(self.rng.choice(bank[value]))
        self.filler(0, 1)

    def term(self, words) -> tuple[int, int]:
        start = len(self.tokens)
        self.tokens += self.rng.choice(words).split()
        return (start, len(self.tokens))


def _explicit_unit(w: _Writer, rng, cats, n_multi=1, single="A", values=1):
    """One aspect/opinion group; returns its quads."""
    single_first = rng.random() < 0.5
    if single == "A":
        chosen = sorted(rng.sample(range(len(cats)), values))
        s_vals = [cats[c] for c in chosen]
        m_vals = [rng.choice(list(OPINION_WORDS)) for _ in range(max(n_multi, values))]
    else:
        pols = list(OPINION_WORDS)
        s_vals = sorted(rng.sample(pols, values), key=pols.index)
        m_vals = [rng.choice(cats) for _ in range(max(n_multi, values))]
    spans = []

    def single_term():
        words = ASPECT_WORDS[s_vals[0]] if single == "A" else OPINION_WORDS[s_vals[0]]
        return w.term(words)

    def multi_terms():
        for k in range(len(m_vals)):
            words = OPINION_WORDS[m_vals[k]] if single == "A" else ASPECT_WORDS[m_vals[k]]
            spans.append(w.term(words))
            if k < len(m_vals) - 1:
                w.filler(0, 1)

    if single_first:
        s_span = single_term()
        w.filler(0, 2)
        multi_terms()
    else:
        multi_terms()
        w.filler(0, 2)
        s_span = single_term()
    quads = []
    if values == 1:
        for span, mv in zip(spans, m_vals):
            if single == "A":
                quads.append(SentimentQuadruple(s_span, s_vals[0], span, mv))
            else:
                quads.append(SentimentQuadruple(span, mv, s_span, s_vals[0]))
    else:
        # cross-mapping: the k-th chained value goes with the k-th multi term
        for sv, span, mv in zip(s_vals, spans, m_vals):
            if single == "A":
                quads.append(SentimentQuadruple(s_span, sv, span, mv))
            else:
                quads.append(SentimentQuadruple(span, mv, s_span, sv))
    return quads


def _implicit_unit(w: _Writer, rng, cats):
    cat = rng.choice(cats)
    pol = rng.choice(list(OPINION_WORDS))
    if rng.random() < 0.5:
        w.cue(CATEGORY_CUES, cat)
        return [SentimentQuadruple(None, cat, w.term(OPINION_WORDS[pol]), pol)]
    w.cue(POLARITY_CUES, pol)
    return [SentimentQuadruple(w.term(ASPECT_WORDS[cat]), cat, None, pol)]


def make_sentence(tag: SituationTag, rng: random.Random, categories=CATEGORIES) -> FixtureSentence:
    cats = list(categories)
    w = _Writer(rng)
    quads: list[SentimentQuadruple] = []
    w.filler(0, 2)
    if tag is SituationTag.BASIC:
        for _ in range(rng.choice((1, 1, 2))):
            quads += _explicit_unit(w, rng, cats, single=rng.choice("AO"))
            w.filler(1, 2)
    elif tag is SituationTag.ONE_TO_MANY:
        quads += _explicit_unit(w, rng, cats, n_multi=rng.choice((2, 2, 3)), single=rng.choice("AO"))
        w.filler(0, 2)
    elif tag is SituationTag.MONO_IMPLICIT:
        quads += _implicit_unit(w, rng, cats)
        w.filler(1, 2)
        if rng.random() < 0.3:
            quads += _explicit_unit(w, rng, cats)
    elif tag is SituationTag.BI_IMPLICIT:
        cat, pol = rng.choice(cats), rng.choice(list(OPINION_WORDS))
        quads.append(SentimentQuadruple(None, cat, None, pol))
        w.cue(POLARITY_CUES, pol)
        w.cue(CATEGORY_CUES, cat)
        w.filler(0, 2)
        if rng.random() < 0.3:
            quads += _explicit_unit(w, rng, cats)
    elif tag is SituationTag.CROSS_MAPPING:
        single = rng.choice("AO")
        if single == "A" and len(cats) < 2:
            single = "O"
        quads += _explicit_unit(w, rng, cats, single=single, values=2)
        w.filler(0, 2)
    else:
        raise ValueError(f"cannot generate {tag}")
    if not w.tokens:
        w.tokens.append(rng.choice(FILLERS))
    return FixtureSentence(tuple(w.tokens), tuple(quads), tag)


def generate_corpus(size: int, seed: int = 0, categories=CATEGORIES, tags=TAGS,
                    grammar: Grammar | None = None) -> list[FixtureSentence]:
    """``size`` sentences cycling through ``tags``; every sentence validates with its tag."""
    rng = random.Random(seed)
    grammar = grammar or build_grammar(categories)
    out = []
    while len(out) < size:
        tag = tags[len(out) % len(tags)]
        sent = make_sentence(tag, rng, categories)
        if validate_parseable(sent.tokens, sent.quads, grammar) == tag:
            out.append(sent)
    return out


def great_bar_sentence() -> FixtureSentence:
    """"So happy to have a great bar": one aspect, two opinions."""
    toks = tuple("So happy to have a great bar".split())
    quads = (
        SentimentQuadruple((6, 7), "RESTAURANT#GENERAL", (1, 2), "positive"),
        SentimentQuadruple((6, 7), "RESTAURANT#GENERAL", (5, 6), "positive"),
    )
    return FixtureSentence(toks, quads, SituationTag.ONE_TO_MANY)


GREAT_BAR_GOLDEN = (
    "(S (I So) (Q (O:positive (OT happy)) (I to have a) (O:positive (OT great)) "
    "(A:RESTAURANT#GENERAL (AT bar))))"
)


def case_study_sentences() -> list[FixtureSentence]:
    """Worked examples, one per situation."""
    Q = SentimentQuadruple
    return [
        FixtureSentence(tuple("The pizza was delicious".split()),
                        (Q((1, 2), "FOOD#QUALITY", (3, 4), "positive"),), SituationTag.BASIC),
        great_bar_sentence(),
        FixtureSentence(("Yum",), (Q(None, "FOOD#QUALITY", (0, 1), "positive"),), SituationTag.MONO_IMPLICIT),
        FixtureSentence(tuple("Had a party here".split()),
                        (Q(None, "RESTAURANT#GENERAL", None, "positive"),), SituationTag.BI_IMPLICIT),
        FixtureSentence(tuple("Great but expensive laptop".split()), (
            Q((3, 4), "LAPTOP#GENERAL", (0, 1), "positive"),
            Q((3, 4), "LAPTOP#PRICE", (2, 3), "negative"),
        ), SituationTag.CROSS_MAPPING),
    ]


CASE_STUDY_CATEGORIES = ("RESTAURANT#GENERAL", "FOOD#QUALITY", "LAPTOP#GENERAL", "LAPTOP#PRICE")


def as_records(sentences, split: str = "train") -> list:
    """Fixture sentences as corpus records (``source_line`` counts from 1)."""
    from .corpus import CorpusRecord
    return [CorpusRecord(s.tokens, s.quads, split, k) for k, s in enumerate(sentences, start=1)]
