import numpy as np
import pytest

from otparse.grammar import build_grammar, build_label_set, is_valid_tree, pruned_grammar
from otparse.oracle import BruteForce, TreeEnumerator
from otparse.trees import spans_to_tree


def enum(cats, families, n):
    return list(TreeEnumerator(build_grammar(cats, families)).trees(n))


@pytest.mark.parametrize("n,count", [(1, 1), (2, 7), (3, 31)])
def test_hand_counts_basic_grammar(n, count):
    # n=3: S alone; Q over all three tokens (AIO, OIA and the four two-part shapes) x 3 polarities;
    # I+Q and Q+I with two-token Qs
    assert len(enum(["X"], (), n)) == count


def test_trees_are_distinct():
    trees = enum(["X", "Y"], ("one_to_many", "mono_implicit", "cross_mapping"), 4)
    assert len(set(trees)) == len(trees)


@pytest.mark.parametrize("families,n", [
    ((), 4),
    (("one_to_many",), 4),
    (("mono_implicit",), 3),
    (("cross_mapping",), 3),
    (None, 4),
])
def test_every_enumerated_tree_is_grammatical(families, n):
    cats = ["X", "Y"]
    g = build_grammar(cats, families) if families is not None else build_grammar(cats)
    p = pruned_grammar(g)
    order = {lab: k for k, lab in enumerate(build_label_set(g).labels)}
    for spans in TreeEnumerator(g).trees(n):
        assert is_valid_tree(spans_to_tree(spans, order.get), p)


def test_prefix_needs_two_tokens():
    with pytest.raises(ValueError):
        list(TreeEnumerator(build_grammar(["X"])).trees(1))


def test_best_reports_exact_score():
    g = pruned_grammar(build_grammar(["X"], ()))
    bf = BruteForce(g, 3)
    table = np.random.default_rng(0).normal(size=(4, 4, len(bf.labels)))
    spans, score, winners = bf.best(table)
    scores = [sum(table[i, j, bf.labels.index(lab)] for i, j, lab in t) for t in bf.trees]
    assert np.isclose(score, max(scores))
    assert winners == 1
