"""Structured max-margin training of the span scorer.

For a sentence with gold tree ``T*`` the loss is

    max(0, max_T [s(T) + hamming(T, T*)] - s(T*))

where the inner max comes from loss-augmented decoding.  Its subgradient
puts +1 on every span of the violating tree and -1 on every gold span; the
scorer backpropagates that through the table.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .decoder import Decoder, score_tree
from .evaluate import eval_corpus
from .grammar import FA, FO, Grammar, build_label_set
from .recovery import recover_quads
from .scorer import Scorer, ScorerParams, Vocab, backward, score_all_spans
from .trees import LabeledSpanSet, OpinionTree, tree_to_spans

log = logging.getLogger(__name__)

OPTIMIZERS = ("sgd", "adam")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 500
    batch_size: int = 8
    seed: int = 0
    shuffle: bool = True
    optimizer: str = "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    # rescale the batch gradient when its global L2 norm exceeds this; None disables
    clip_norm: float | None = 5.0
    # stop once an epoch ends with zero loss and training F1 of 1
    stop_when_fit: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive or null")


@dataclass
class ScorerConfig:
    d: int = 64
    hidden: int = 128
    hash_buckets: int = 0

    def __post_init__(self):
        if self.d <= 0 or self.hidden <= 0 or self.hash_buckets < 0:
            raise ValueError("scorer dimensions must be positive")


@dataclass(frozen=True)
class Example:
    """A sentence in decoder coordinates (FA/FO prepended when the grammar uses them)."""

    tokens: tuple
    tree: OpinionTree
    gold: LabeledSpanSet


def make_example(tokens: Sequence[str], tree: OpinionTree, grammar: Grammar) -> Example:
    """Put a pruned gold tree into the decoder's frame.

    With FA/FO enabled every input starts with the two pseudo tokens; a tree
    built without them is shifted right by 2.
    """
    tokens = tuple(tokens)
    if grammar.implicit_prefix and tokens[:2] != (FA, FO):
        tokens = (FA, FO) + tokens
        tree = tree.shift(2)
    return Example(tokens, tree, tree_to_spans(tree))


def decoder_tokens(tokens: Sequence[str], grammar: Grammar) -> tuple:
    tokens = tuple(tokens)
    if grammar.implicit_prefix and tokens[:2] != (FA, FO):
        return (FA, FO) + tokens
    return tokens


def hinge_loss(table: np.ndarray, decoder: Decoder, gold: LabeledSpanSet) -> tuple[float, OpinionTree]:
    """(loss, loss-augmented argmax)."""
    viol, augmented = decoder.loss_augmented_decode(table, gold)
    gold_score = math.fsum(float(table[i, j, decoder.labels.index(lab)]) for i, j, lab in gold)
    return max(0.0, augmented - gold_score), viol


def span_gradient(table_shape, viol: LabeledSpanSet, gold: LabeledSpanSet, labels) -> np.ndarray:
    """d(s(T_viol) - s(T*)) / d table."""
    d = np.zeros(table_shape)
    for i, j, lab in viol:
        d[i, j, labels.index(lab)] += 1.0
    for i, j, lab in gold:
        d[i, j, labels.index(lab)] -= 1.0
    return d


def loss_gradient(params: ScorerParams, ids: np.ndarray, gold: LabeledSpanSet, decoder: Decoder):
    """(loss, parameter gradients, violating tree) for one sentence."""
    table, cache = score_all_spans(ids, params, keep=True)
    if not np.all(np.isfinite(table)):
        raise TrainingDiverged("non-finite span scores; lower the learning rate")
    loss, viol = hinge_loss(table, decoder, gold)
    if not math.isfinite(loss):
        raise TrainingDiverged(f"non-finite hinge loss {loss}; lower the learning rate")
    if loss == 0.0:
        return loss, params.zeros_like(), viol
    dtable = span_gradient(table.shape, tree_to_spans(viol), gold, decoder.labels)
    return loss, backward(cache, dtable, params), viol


class _Optimizer:
    def __init__(self, params: ScorerParams, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        if cfg.optimizer == "adam":
            self.m = params.zeros_like()
            self.v = params.zeros_like()

    def step(self, params: ScorerParams, grads: dict):
        cfg = self.cfg
        self.t += 1
        if cfg.clip_norm is not None:
            norm = math.sqrt(math.fsum(float(np.vdot(g, g)) for g in grads.values()))
            if not math.isfinite(norm):
                raise TrainingDiverged("non-finite gradient")
            if norm > cfg.clip_norm:
                grads = {k: g * (cfg.clip_norm / norm) for k, g in grads.items()}
        for name, p in params.arrays().items():
            g = grads[name]
            if cfg.weight_decay:
                g = g + cfg.weight_decay * p
            if cfg.optimizer == "sgd":
                p -= cfg.learning_rate * g
                continue
            m, v = self.m[name], self.v[name]
            m *= cfg.beta1
            m += (1 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1 - cfg.beta2) * g * g
            mhat = m / (1 - cfg.beta1 ** self.t)
            vhat = v / (1 - cfg.beta2 ** self.t)
            p -= cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    f1: float


@dataclass
class FitResult:
    scorer: Scorer
    history: list[EpochRecord] = field(default_factory=list)


def predict_quads(scorer: Scorer, decoder: Decoder, tokens: Sequence[str]):
    """Decode one sentence and read its quads back (un-augmented positions)."""
    toks = decoder_tokens(tokens, decoder.grammar)
    table = score_all_spans(scorer.vocab.ids(toks), scorer.params)
    tree, _ = decoder.decode(table)
    return tree, recover_quads(tree, decoder.prefix)


def training_f1(scorer: Scorer, decoder: Decoder, examples: Sequence[Example]) -> float:
    preds, golds = [], []
    for ex in examples:
        table = score_all_spans(scorer.vocab.ids(ex.tokens), scorer.params)
        if not np.all(np.isfinite(table)):
            raise TrainingDiverged("non-finite span scores; lower the learning rate")
        tree, _ = decoder.decode(table)
        preds.append(recover_quads(tree, decoder.prefix))
        golds.append(recover_quads(ex.tree, decoder.prefix))
    return eval_corpus(preds, golds).f1


def fit(corpus: Sequence[tuple], config: TrainConfig, decoder: Decoder,
        scorer: Scorer | None = None, scorer_config: ScorerConfig | None = None,
        on_epoch: Callable[[EpochRecord], None] | None = None) -> FitResult:
    """Train on ``(tokens, pruned gold tree)`` pairs.

    A fresh scorer is initialized from ``config.seed`` unless one is passed in
    (it is then updated in place).  Returns the scorer and one record per epoch.
    """
    grammar = decoder.grammar
    examples = [make_example(toks, tree, grammar) for toks, tree in corpus]
    if scorer is None:
        sc = scorer_config or ScorerConfig()
        vocab = Vocab.from_corpus((ex.tokens for ex in examples), buckets=sc.hash_buckets)
        labels = build_label_set(grammar)
        params = ScorerParams.init(len(vocab), sc.d, sc.hidden, len(labels), seed=config.seed)
        scorer = Scorer(params, vocab)
    params = scorer.params
    ids = [scorer.vocab.ids(ex.tokens) for ex in examples]
    opt = _Optimizer(params, config)
    rng = random.Random(config.seed)
    order = list(range(len(examples)))
    history: list[EpochRecord] = []
    for epoch in range(1, config.epochs + 1):
        if config.shuffle:
            rng.shuffle(order)
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            total = params.zeros_like()
            for idx in batch:
                loss, grads, _ = loss_gradient(params, ids[idx], examples[idx].gold, decoder)
                losses.append(loss)
                if loss > 0.0:
                    for k in total:
                        total[k] += grads[k]
            if any(np.any(g) for g in total.values()) or config.weight_decay:
                opt.step(params, {k: g / len(batch) for k, g in total.items()})
        if not all(np.all(np.isfinite(a)) for a in params.arrays().values()):
            raise TrainingDiverged(f"epoch {epoch}: non-finite parameters; lower the learning rate")
        mean_loss = float(np.mean(losses)) if losses else 0.0
        if not math.isfinite(mean_loss):
            raise TrainingDiverged(f"epoch {epoch}: mean loss {mean_loss}")
        f1 = training_f1(scorer, decoder, examples)
        rec = EpochRecord(epoch, mean_loss, f1)
        history.append(rec)
        log.info("epoch %d loss %.6f f1 %.4f", epoch, mean_loss, f1)
        if on_epoch:
            on_epoch(rec)
        if config.stop_when_fit and mean_loss == 0.0 and f1 == 1.0:
            break
    return FitResult(scorer, history)


def tree_score(scorer: Scorer, decoder: Decoder, tokens, tree) -> float:
    table = score_all_spans(scorer.vocab.ids(tokens), scorer.params)
    return score_tree(tree, table, decoder.labels)
