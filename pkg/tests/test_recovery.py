from collections import Counter

import pytest

from otparse.builder import SentimentQuadruple as Q, augment_tokens, build_tree, prune_tree
from otparse.fixtures import generate_corpus
from otparse.recovery import MalformedTreeError, recover_quads
from otparse.trees import from_bracket


def test_great_but_expensive_laptop():
    tree, _ = from_bracket(
        "(S (Q (O:positive (OT Great)) (I but) (O:negative (OT expensive)) "
        "(A:LAPTOP#GENERAL (A:LAPTOP#PRICE (AT laptop)))))"
    )
    assert set(recover_quads(tree)) == {
        Q((3, 4), "LAPTOP#GENERAL", (0, 1), "positive"),
        Q((3, 4), "LAPTOP#PRICE", (2, 3), "negative"),
    }


def test_basic_quad():
    tree, _ = from_bracket("(S (I The) (Q (A:FOOD#QUALITY (AT pizza)) (I was) (O:positive (OT delicious))))")
    assert recover_quads(tree) == [Q((1, 2), "FOOD#QUALITY", (3, 4), "positive")]


def test_one_to_many_cross_product():
    tree, _ = from_bracket(
        "(S (Q (A:FOOD#QUALITY (AT soup)) (O:positive (OT hot)) (I and) (O:negative (OT salty))))"
    )
    assert Counter(recover_quads(tree)) == Counter([
        Q((0, 1), "FOOD#QUALITY", (1, 2), "positive"),
        Q((0, 1), "FOOD#QUALITY", (3, 4), "negative"),
    ])


def test_implicit_terms():
    tree, _ = from_bracket("(S (Q (O:negative (A:SERVICE#GENERAL (AT waiter)))) (I again))")
    assert recover_quads(tree) == [Q((0, 1), "SERVICE#GENERAL", None, "negative")]
    tree, _ = from_bracket("(S (Q (A:FOOD#QUALITY (O:positive (OT Yum)))))")
    assert recover_quads(tree) == [Q(None, "FOOD#QUALITY", (0, 1), "positive")]


def test_bi_implicit_prefix():
    tree, toks = from_bracket("(S (Q (A:RESTAURANT#GENERAL (AT FA)) (O:positive (OT FO))) (I Had a party here))")
    assert recover_quads(tree, implicit_prefix=True) == [Q(None, "RESTAURANT#GENERAL", None, "positive")]


def test_prefix_tree_without_bi_quad_is_shifted_back():
    tree, _ = from_bracket("(S (Q (A:FOOD#QUALITY (AT pizza)) (O:positive (OT great))))", offset=2)
    assert recover_quads(tree, implicit_prefix=True) == [Q((0, 1), "FOOD#QUALITY", (1, 2), "positive")]


def test_fa_fo_outside_prefix_is_malformed():
    tree, _ = from_bracket("(S (I x) (Q (A:FOOD#QUALITY (AT FA)) (O:positive (OT FO))))")
    with pytest.raises(MalformedTreeError):
        recover_quads(tree, implicit_prefix=True)


def test_root_must_be_s():
    tree, _ = from_bracket("(Q (A:FOOD#QUALITY (AT a)) (O:positive (OT b)))")
    with pytest.raises(MalformedTreeError):
        recover_quads(tree)


def test_round_trip_identity(grammar):
    for s in generate_corpus(500, seed=1, grammar=grammar):
        toks, quads = augment_tokens(s.tokens, s.quads)
        tree = prune_tree(build_tree(toks, quads, grammar))
        got = recover_quads(tree, len(toks) != len(s.tokens))
        assert Counter(got) == Counter(s.quads), (s.tokens, s.quads)
        assert recover_quads(tree, len(toks) != len(s.tokens)) == got
