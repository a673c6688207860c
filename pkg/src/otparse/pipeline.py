"""Glue between corpus records, trees, the scorer and the decoder."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .builder import NormalizedSentence, Unparseable, UnparseableError, normalize
from .corpus import CorpusRecord, categories_of
from .decoder import Decoder, get_decoder
from .evaluate import bench_decode
from .grammar import ALL_FAMILIES, FA, FO, Grammar, build_grammar, pruned_grammar
from .recovery import recover_quads
from .scorer import Scorer, score_all_spans
from .trainer import decoder_tokens


@dataclass(frozen=True)
class Parser:
    grammar: Grammar  # full form
    pruned: Grammar
    decoder: Decoder


def make_parser(grammar: Grammar) -> Parser:
    pruned = pruned_grammar(grammar)
    return Parser(grammar, pruned, get_decoder(pruned))


def grammar_for(records: Sequence[CorpusRecord], categories=None, families=ALL_FAMILIES) -> Grammar:
    return build_grammar(list(categories) if categories else categories_of(records), families)


def normalize_records(records: Iterable[CorpusRecord], grammar: Grammar):
    """``(record, NormalizedSentence | Unparseable)`` pairs in input order."""
    out = []
    for rec in records:
        try:
            out.append((rec, normalize(rec.tokens, rec.quads, grammar)))
        except UnparseableError as exc:
            out.append((rec, exc.result))
    return out


def training_pairs(normalized) -> list[tuple]:
    return [(ns.tokens, ns.tree) for _, ns in normalized if isinstance(ns, NormalizedSentence)]


@dataclass(frozen=True)
class Parse:
    tokens: tuple  # as given, without FA/FO
    tree: object  # pruned tree over the decoder's tokens
    quads: list
    score: float


def parse_tokens(tokens: Sequence[str], scorer: Scorer, parser: Parser, chart_sink=None) -> Parse:
    toks = decoder_tokens(tokens, parser.pruned)
    table = score_all_spans(scorer.vocab.ids(toks), scorer.params)
    tree, score, chart = parser.decoder.decode_with_chart(table)
    if chart_sink is not None:
        chart_sink(chart)
    return Parse(tuple(tokens), tree, recover_quads(tree, parser.decoder.prefix), score)


def output_tree(tree, tokens: Sequence[str], prefix: bool):
    """(tree, tokens) to print: FA/FO are shown only when the tree uses them."""
    tokens = tuple(tokens)
    if prefix and tree.span[0] == 2:
        return tree.shift(-2), tokens[2:]
    return tree, tokens


def tree_uses_prefix(tokens: Sequence[str]) -> bool:
    return tuple(tokens[:2]) == (FA, FO)


def bench_corpus(sentences: Sequence[Sequence[str]], scorer: Scorer, parser: Parser, repeats: int = 3) -> dict:
    """Decode timing over a corpus; score tables are built up front and not timed."""
    tables = [score_all_spans(scorer.vocab.ids(decoder_tokens(t, parser.pruned)), scorer.params)
              for t in sentences]
    return bench_decode(tables, parser.decoder, repeats=repeats)


def is_unparseable(result) -> bool:
    return isinstance(result, Unparseable)
