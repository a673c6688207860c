from collections import Counter

import pytest

from otparse.builder import (SentimentQuadruple as Q, SituationTag, Unparseable, UnparseableError,
                             augment_tokens, build_tree, normalize, prune_tree, strip_augmentation,
                             validate_parseable)
from otparse.fixtures import (CASE_STUDY_CATEGORIES, GREAT_BAR_GOLDEN, case_study_sentences, great_bar_sentence,
                              generate_corpus)
from otparse.grammar import FA, FO, build_grammar, is_valid_tree, pruned_grammar
from otparse.trees import to_bracket

TOKS = "a b c d e f".split()


@pytest.fixture(scope="module")
def case_grammar():
    return build_grammar(list(CASE_STUDY_CATEGORIES))


def case(tag):
    return next(s for s in case_study_sentences() if s.tag == tag)


def test_augment_fully_implicit():
    s = case(SituationTag.BI_IMPLICIT)
    toks, quads = augment_tokens(s.tokens, s.quads)
    assert toks == [FA, FO, "Had", "a", "party", "here"]
    assert quads == [Q((0, 1), "RESTAURANT#GENERAL", (1, 2), "positive")]
    assert strip_augmentation(quads, True) == list(s.quads)


def test_augment_explicit_unchanged():
    quads = [Q((1, 2), "X", (3, 4), "negative")]
    assert augment_tokens(TOKS, quads) == (TOKS, quads)


def test_augment_shifts_explicit_terms():
    quads = [Q(None, "X", None, "positive"), Q((1, 2), "X", (3, 4), "negative")]
    toks, out = augment_tokens(TOKS, quads)
    assert toks[:2] == [FA, FO]
    assert out[1] == Q((3, 4), "X", (5, 6), "negative")


def test_two_fully_implicit_quads_unparseable():
    quads = [Q(None, "X", None, "positive"), Q(None, "Y", None, "negative")]
    toks, out = augment_tokens(TOKS, quads)
    assert out[0].aspect == out[1].aspect == (0, 1)
    result = validate_parseable(toks, out)
    assert isinstance(result, Unparseable) and result.reason == "one_to_many_with_implicit"


def test_great_bar_is_one_to_many():
    s = great_bar_sentence()
    assert validate_parseable(s.tokens, s.quads) is SituationTag.ONE_TO_MANY


def test_single_quad_is_basic():
    assert validate_parseable(TOKS, [Q((0, 1), "X", (2, 3), "positive")]) is SituationTag.BASIC


@pytest.mark.parametrize("quads,reason", [
    ([Q((0, 2), "X", (4, 5), "positive"), Q((1, 3), "X", (4, 5), "positive")], "overlapped_spans"),
    ([Q((0, 3), "X", (4, 5), "positive"), Q((1, 2), "X", (4, 5), "positive")], "nested_spans"),
    ([Q((0, 1), "X", (2, 3), "positive"), Q((1, 2), "X", (3, 4), "positive")], "crossing_quads"),
    ([Q(None, "X", (2, 3), "positive"), Q((0, 1), "X", (2, 3), "negative")], "one_to_many_with_implicit"),
    ([Q((0, 1), "X", (2, 3), "positive")] * 2, "duplicate_quads"),
])
def test_unparseable_reasons(quads, reason):
    result = validate_parseable(TOKS, quads)
    assert isinstance(result, Unparseable)
    assert result.reason == reason
    assert not result


def test_unknown_category_needs_grammar(grammar):
    quads = [Q((0, 1), "NOPE#NOPE", (2, 3), "positive")]
    assert validate_parseable(TOKS, quads) is SituationTag.BASIC
    res = validate_parseable(TOKS, quads, grammar)
    assert res.reason == "unknown_category" and res.detail == "NOPE#NOPE"


def test_overlap_oracle_pairwise():
    # oracle: two aspect spans partially overlap iff a1 < b0 < a1... checked directly
    for a in [(0, 2), (1, 3), (2, 4), (0, 3)]:
        for b in [(1, 2), (1, 4), (3, 5), (2, 3)]:
            res = validate_parseable(TOKS, [Q(a, "X", (5, 6), "positive"), Q(b, "X", (5, 6), "positive")])
            overlap = a[0] < b[1] and b[0] < a[1]
            nested = overlap and (a[0] <= b[0] and b[1] <= a[1] or b[0] <= a[0] and a[1] <= b[1])
            if nested:
                assert res.reason == "nested_spans"
            elif overlap:
                assert res.reason == "overlapped_spans"
            else:
                assert res is SituationTag.ONE_TO_MANY


def test_disabled_family_is_reported():
    g = build_grammar(["X"], ())
    s = [Q((0, 1), "X", (1, 2), "positive"), Q((0, 1), "X", (2, 3), "negative")]
    res = validate_parseable(TOKS, s, g)
    assert res.reason == "family_disabled"
    with pytest.raises(UnparseableError):
        build_tree(TOKS, s, g)


def test_tag_priority():
    quads = [Q(None, "X", None, "positive"), Q((2, 3), "X", (4, 5), "positive"),
             Q((2, 3), "Y", (5, 6), "negative")]
    assert validate_parseable(TOKS, quads) is SituationTag.CROSS_MAPPING
    assert validate_parseable(TOKS, quads[:2]) is SituationTag.BI_IMPLICIT


def test_yum(case_grammar):
    ns = normalize(("Yum",), case(SituationTag.MONO_IMPLICIT).quads, case_grammar)
    assert to_bracket(ns.tree, ns.tokens) == "(S (Q (A:FOOD#QUALITY (O:positive (OT Yum)))))"
    assert to_bracket(ns.full_tree, ns.tokens) == (
        "(S (I) (Q (C:FOOD#QUALITY (O (P:positive (OT Yum))))) (I))"
    )


def test_laptop_cross_mapping(case_grammar):
    s = case(SituationTag.CROSS_MAPPING)
    ns = normalize(s.tokens, s.quads, case_grammar)
    assert ns.tag is SituationTag.CROSS_MAPPING
    assert to_bracket(ns.tree, ns.tokens) == (
        "(S (Q (O:positive (OT Great)) (I but) (O:negative (OT expensive)) "
        "(A:LAPTOP#GENERAL (A:LAPTOP#PRICE (AT laptop)))))"
    )


def test_had_a_party_here(case_grammar):
    s = case(SituationTag.BI_IMPLICIT)
    ns = normalize(s.tokens, s.quads, case_grammar)
    assert ns.augmented
    assert to_bracket(ns.tree, ns.tokens) == (
        "(S (Q (A:RESTAURANT#GENERAL (AT FA)) (O:positive (OT FO))) (I Had a party here))"
    )


def test_zero_quads(grammar, pruned):
    ns = normalize(["nice", "day"], [], grammar)
    assert to_bracket(ns.tree, ns.tokens) == "(S (I nice day))"
    assert is_valid_tree(ns.full_tree, grammar) and is_valid_tree(ns.tree, pruned)


def test_great_bar_golden(grammar):
    s = great_bar_sentence()
    ns = normalize(s.tokens, s.quads, grammar)
    assert to_bracket(ns.tree, ns.tokens) == GREAT_BAR_GOLDEN
    assert prune_tree(ns.tree) == ns.tree


def test_all_fixture_trees_valid(grammar, pruned):
    for s in generate_corpus(300, seed=11, grammar=grammar):
        ns = normalize(s.tokens, s.quads, grammar)
        assert ns.tag == s.tag
        assert is_valid_tree(ns.full_tree, grammar)
        assert is_valid_tree(ns.tree, pruned)


def test_fa_fo_hygiene(grammar):
    for s in generate_corpus(200, seed=5, grammar=grammar):
        ns = normalize(s.tokens, s.quads, grammar)
        has_bi = any(q.fully_implicit for q in s.quads)
        assert ns.augmented == has_bi
        assert (FA in ns.tokens) == has_bi and (FO in ns.tokens) == has_bi
        if has_bi:
            assert ns.tokens[:2] == (FA, FO)
            assert FA not in ns.tokens[2:] and FO not in ns.tokens[2:]


def naive_tag(quads):
    """Independent recount: rarest situation present wins."""
    found = set()
    for q in quads:
        if q.aspect is None and q.opinion is None:
            found.add("bi_implicit")
        elif q.aspect is None or q.opinion is None:
            found.add("mono_implicit")
    aspects, opinions = Counter(), Counter()
    cats, pols = {}, {}
    for q in quads:
        if q.aspect is not None and q.opinion is not None:
            aspects[q.aspect] += 1
            opinions[q.opinion] += 1
            cats.setdefault(q.aspect, set()).add(q.category)
            pols.setdefault(q.opinion, set()).add(q.polarity)
    if any(len(v) > 1 for v in cats.values()) or any(len(v) > 1 for v in pols.values()):
        found.add("cross_mapping")
    if any(c > 1 for c in aspects.values()) or any(c > 1 for c in opinions.values()):
        found.add("one_to_many")
    for tag in ("cross_mapping", "bi_implicit", "mono_implicit", "one_to_many"):
        if tag in found:
            return tag
    return "basic"


def test_situation_tags_match_naive_recount(grammar):
    corpus = generate_corpus(400, seed=21, grammar=grammar)
    ours = Counter(validate_parseable(s.tokens, s.quads, grammar).value for s in corpus)
    naive = Counter(naive_tag(s.quads) for s in corpus)
    assert ours == naive
    assert set(ours) == {"basic", "one_to_many", "mono_implicit", "bi_implicit", "cross_mapping"}
