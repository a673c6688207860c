"""Compare the CKY decoder with exhaustive search on random score tables.

    python3 demos/decoder_vs_brute_force.py
"""

import numpy as np

from otparse import Decoder, build_grammar, pruned_grammar
from otparse.oracle import BruteForce
from otparse.trees import tree_to_spans

grammar = pruned_grammar(build_grammar(["FOOD#QUALITY", "SERVICE#GENERAL"]))
decoder = Decoder(grammar)
rng = np.random.default_rng(0)

for n in range(2, 7):
    bf = BruteForce(grammar, n, decoder.labels)
    agree = 0
    for _ in range(20):
        table = rng.normal(size=(n + 1, n + 1, len(decoder.labels)))
        tree, score = decoder.decode(table)
        spans, best, _ = bf.best(table)
        agree += score == best and frozenset(tree_to_spans(tree)) == spans
    print(f"n={n}: {len(bf):6d} trees in the space, decoder matched {agree}/20 tables")
