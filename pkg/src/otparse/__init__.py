"""Opinion-tree parsing: sentiment quadruples as grammar-valid trees, decoded with CKY."""

__version__ = "0.1.0"

from .builder import (NormalizedSentence, SentimentQuadruple, SituationTag, Unparseable, augment_tokens,
                      build_tree, normalize, prune_tree, validate_parseable)
from .decoder import Decoder, decode, hamming, loss_augmented_decode, score_tree
from .evaluate import EvalReport, bench_decode, completeness, eval_corpus, eval_quads, situation_histogram
from .grammar import (Grammar, LabelSet, binarize, build_grammar, build_label_set, is_valid_tree,
                      pruned_grammar)
from .recovery import recover_quads
from .scorer import Scorer, ScorerParams, Vocab, encode, score_all_spans, score_span, span_repr
from .trainer import ScorerConfig, TrainConfig, fit, hinge_loss, loss_gradient
from .trees import OpinionTree, from_bracket, spans_to_tree, to_bracket, tree_to_spans

__all__ = [
    "Decoder", "EvalReport", "Grammar", "LabelSet", "NormalizedSentence", "OpinionTree", "Scorer",
    "ScorerConfig", "ScorerParams", "SentimentQuadruple", "SituationTag", "TrainConfig", "Unparseable",
    "Vocab", "augment_tokens", "bench_decode", "binarize", "build_grammar", "build_label_set", "build_tree",
    "completeness", "decode", "encode", "eval_corpus", "eval_quads", "fit", "from_bracket", "hamming",
    "hinge_loss", "is_valid_tree", "loss_augmented_decode", "loss_gradient", "normalize", "prune_tree",
    "pruned_grammar", "recover_quads", "score_all_spans", "score_span", "score_tree", "situation_histogram",
    "span_repr", "spans_to_tree", "to_bracket", "tree_to_spans", "validate_parseable",
]
