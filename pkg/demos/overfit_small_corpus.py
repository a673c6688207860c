"""Train the span scorer on a small synthetic corpus until it fits.

    python3 demos/overfit_small_corpus.py [--size 20] [--seed 7]
"""

import argparse

from otparse import Decoder, TrainConfig, build_grammar, fit, normalize, pruned_grammar
from otparse.fixtures import CATEGORIES, generate_corpus
from otparse.trainer import ScorerConfig, predict_quads


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=20)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    grammar = build_grammar(list(CATEGORIES))
    decoder = Decoder(pruned_grammar(grammar))
    corpus = generate_corpus(args.size, seed=args.seed, grammar=grammar)
    pairs = []
    for s in corpus:
        ns = normalize(s.tokens, s.quads, grammar)
        pairs.append((ns.tokens, ns.tree))

    def report(rec):
        if rec.epoch % 10 == 0 or rec.loss == 0.0:
            print(f"epoch {rec.epoch:4d}  loss {rec.loss:9.4f}  train F1 {rec.f1:.3f}")

    cfg = TrainConfig(epochs=300, stop_when_fit=True, seed=args.seed)
    res = fit(pairs, cfg, decoder, scorer_config=ScorerConfig(d=32, hidden=64), on_epoch=report)

    s = corpus[0]
    tree, quads = predict_quads(res.scorer, decoder, s.tokens)
    print("\nsentence:", " ".join(s.tokens))
    print("gold    :", sorted(q.sort_key() for q in s.quads))
    print("decoded :", sorted(q.sort_key() for q in quads))


if __name__ == "__main__":
    main()
