"""Build opinion trees for a few hand-written sentences and read the quads back.

    python3 demos/trees_and_recovery.py
"""

from otparse import build_grammar, normalize, recover_quads, to_bracket
from otparse.fixtures import CASE_STUDY_CATEGORIES, case_study_sentences


def main():
    grammar = build_grammar(list(CASE_STUDY_CATEGORIES))
    for s in case_study_sentences():
        ns = normalize(s.tokens, s.quads, grammar)
        print(" ".join(s.tokens))
        print("  situation:", ns.tag.value)
        print("  full  :", to_bracket(ns.full_tree, ns.tokens))
        print("  pruned:", to_bracket(ns.tree, ns.tokens))
        for q in recover_quads(ns.tree, ns.augmented):
            print("  quad  :", q.aspect, q.category, q.opinion, q.polarity)
        print()


if __name__ == "__main__":
    main()
