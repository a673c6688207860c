"""Command-line entry point: ``python3 -m otparse <command>``.

Exit status is 0 on success, 1 for bad input (files, config, corpus lines,
checkpoints) and 2 when an internal consistency check fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .builder import UnparseableError
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint, write_metrics
from .config import ConfigError, RunConfig, load_config
from .corpus import (SPLITS, CorpusFormatError, CorpusRecord, import_acos_tsv, read_corpus,
                     write_corpus)
from .decoder import DecodeError, decode_unconstrained
from .evaluate import eval_corpus, is_complete, situation_histogram
from .grammar import ALL_FAMILIES, FAMILIES, GrammarError
from .pipeline import (bench_corpus, grammar_for, make_parser, normalize_records, output_tree, parse_tokens,
                       training_pairs, tree_uses_prefix)
from .recovery import recover_quads
from .scorer import score_all_spans
from .selfcheck import builtin_checks
from .trainer import ScorerConfig, TrainConfig, TrainingDiverged, decoder_tokens, fit
from .trees import from_bracket, to_bracket

log = logging.getLogger("otparse")

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2


class UsageError(ValueError):
    pass


def _read_records(path, fmt: str, split: str, polarity_codes=None):
    """(records, skip report or None)."""
    if fmt == "auto":
        fmt = "acos" if Path(path).suffix in (".tsv", ".txt") else "jsonl"
    if fmt == "acos":
        return import_acos_tsv(path, split, polarity_codes)
    return read_corpus(path), None


def _families(values):
    if values is None:
        return ALL_FAMILIES
    fams = [] if values == ["none"] else values
    bad = sorted(set(fams) - set(FAMILIES))
    if bad:
        raise UsageError(f"unknown rule families: {', '.join(bad)}")
    return frozenset(fams)


def _categories_arg(path):
    if path is None:
        return None
    from .config import read_categories
    return read_categories(path)


def _write_text(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def cmd_normalize(args) -> int:
    records, skips = _read_records(args.corpus, args.format, args.split)
    grammar = grammar_for(records, _categories_arg(args.categories), _families(args.families))
    normalized = normalize_records(records, grammar)
    lines = []
    for rec, ns in normalized:
        if hasattr(ns, "tree"):
            lines.append(f"{rec.source_line}\t{ns.tag.value}\t{to_bracket(ns.tree, ns.tokens)}")
        else:
            lines.append(f"{rec.source_line}\tunparseable:{ns.reason}\t-")
    if args.trees:
        Path(args.trees).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    if args.skips and skips is not None:
        Path(args.skips).write_text(skips.to_text(), encoding="utf-8")
    hist = situation_histogram(((r.tokens, r.quads) for r in records), grammar)
    if skips is not None:
        hist["skipped_on_import"] = len(skips.skipped)
    if args.json:
        print(json.dumps(hist, sort_keys=False))
    else:
        for tag, count in hist.items():
            print(f"{tag}\t{count}")
    return EXIT_OK


def _train_settings(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.train.seed = args.seed
    overrides = {k: v for k, v in {
        "epochs": args.epochs, "learning_rate": args.lr, "batch_size": args.batch_size,
        "optimizer": args.optimizer, "clip_norm": args.clip_norm,
    }.items() if v is not None}
    if args.no_clip:
        overrides["clip_norm"] = None
    if args.stop_when_fit:
        overrides["stop_when_fit"] = True
    if overrides:
        cfg.train = TrainConfig(**{**cfg.train.__dict__, **overrides})
    if args.d or args.hidden:
        cfg.scorer = ScorerConfig(args.d or cfg.scorer.d, args.hidden or cfg.scorer.hidden, cfg.scorer.hash_buckets)
    for key in ("corpus", "checkpoint", "metrics"):
        value = getattr(args, key)
        if value:
            cfg.paths["train" if key == "corpus" else key] = Path(value)
    for key in ("train", "checkpoint"):
        if key not in cfg.paths:
            raise UsageError(f"no {key} path: pass --{'corpus' if key == 'train' else key} or set paths.{key}")
    if args.families is not None:
        cfg.grammar.families = _families(args.families)
    if args.categories:
        cfg.grammar.categories = _categories_arg(args.categories)
    return cfg


def cmd_train(args) -> int:
    cfg = _train_settings(args)
    records, _ = _read_records(cfg.paths["train"], args.format, "train", cfg.polarity_codes)
    records = [r for r in records if r.split == "train"] or records
    grammar = grammar_for(records, cfg.grammar.categories, cfg.grammar.families)
    normalized = normalize_records(records, grammar)
    pairs = training_pairs(normalized)
    dropped = len(normalized) - len(pairs)
    if dropped:
        log.warning("%d of %d training sentences are not representable and were left out", dropped, len(normalized))
    if not pairs:
        raise UsageError("no usable training sentences")
    parser = make_parser(grammar)
    result = fit(pairs, cfg.train, parser.decoder, scorer_config=cfg.scorer)
    save_checkpoint(cfg.paths["checkpoint"], result.scorer, grammar,
                    {"train_config": cfg.train.__dict__, "epochs_run": len(result.history)})
    if "metrics" in cfg.paths:
        write_metrics(cfg.paths["metrics"], result.history)
    last = result.history[-1] if result.history else None
    summary = {"sentences": len(pairs), "epochs": len(result.history),
               "loss": last.loss if last else None, "f1": last.f1 if last else None,
               "checkpoint": str(cfg.paths["checkpoint"])}
    print(json.dumps(summary))
    return EXIT_OK


def _raw_sentences(path):
    fh = sys.stdin if path == "-" else open(path, encoding="utf-8")
    with fh:
        for lineno, line in enumerate(fh, start=1):
            toks = line.split()
            if toks:
                yield lineno, toks


def cmd_parse(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    parser = make_parser(ckpt.grammar)
    scorer = ckpt.scorer
    out_lines, preds, charts = [], [], []
    for lineno, toks in _raw_sentences(args.input):
        if args.unconstrained:
            dtoks = decoder_tokens(toks, parser.pruned)
            table = score_all_spans(scorer.vocab.ids(dtoks), scorer.params)
            tree = decode_unconstrained(table, parser.decoder.labels)
            try:
                quads = recover_quads(tree, parser.decoder.prefix)
            except ValueError:
                quads = []
        else:
            sink = charts.append if args.dump_chart else None
            p = parse_tokens(toks, scorer, parser, chart_sink=sink)
            tree, quads, dtoks = p.tree, p.quads, decoder_tokens(toks, parser.pruned)
        preds.append(CorpusRecord(tuple(toks), tuple(quads), args.split, lineno))
        out_lines.append(to_bracket(*output_tree(tree, dtoks, parser.decoder.prefix)))
    _write_text(args.trees, "\n".join(out_lines) + ("\n" if out_lines else ""))
    if args.out:
        write_corpus(preds, args.out)
    if args.dump_chart:
        Path(args.dump_chart).write_text("\n".join(c.dump() for c in charts), encoding="utf-8")
    return EXIT_OK


def cmd_eval(args) -> int:
    preds, _ = _read_records(args.pred, "jsonl", "test")
    golds, _ = _read_records(args.gold, args.format, "test")
    if len(preds) != len(golds):
        raise UsageError(f"{len(preds)} predictions for {len(golds)} gold sentences")
    for p, g in zip(preds, golds):
        if p.tokens != g.tokens:
            raise UsageError(f"token mismatch at gold line {g.source_line}")
    report = eval_corpus([p.quads for p in preds], [g.quads for g in golds])
    report.situation_histogram = situation_histogram((g.tokens, g.quads) for g in golds)
    if args.trees:
        if not args.checkpoint:
            raise UsageError("--trees needs --checkpoint for the grammar")
        parser = make_parser(load_checkpoint(args.checkpoint).grammar)
        ok = []
        for line in Path(args.trees).read_text(encoding="utf-8").splitlines():
            try:
                tree, toks = from_bracket(line)
            except ValueError:
                ok.append(False)
                continue
            ok.append(is_complete(tree, parser.pruned, tree_uses_prefix(toks)))
        report.completeness = sum(ok) / len(ok) if ok else 1.0
    _write_text(args.out, report.to_json() + "\n" if args.json else report.to_text())
    return EXIT_OK


def _synthetic_sentences(vocab_words, lengths, per_length, seed):
    rng = np.random.default_rng(seed)
    words = [w for w in vocab_words if w not in ("<unk>", "FA", "FO")] or ["x"]
    return [[words[int(k)] for k in rng.integers(len(words), size=n)] for n in lengths for _ in range(per_length)]


def cmd_bench(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    parser = make_parser(ckpt.grammar)
    if args.corpus:
        records, _ = _read_records(args.corpus, args.format, "test")
        sentences = [list(r.tokens) for r in records]
    else:
        lengths = [int(x) for x in args.lengths.split(",")]
        sentences = _synthetic_sentences(ckpt.scorer.vocab.words, lengths, args.per_length, args.seed or 0)
    stats = bench_corpus(sentences, ckpt.scorer, parser, repeats=args.repeats)
    if args.json:
        print(json.dumps(stats))
    else:
        for k, v in stats.items():
            print(f"{k}\t{v}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    results = builtin_checks()
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "some checks FAILED")
    return EXIT_OK if ok else EXIT_INTERNAL


# ---------------------------------------------------------------------------


class _ArgParser(argparse.ArgumentParser):
    # bad arguments are a validation error (1); argparse would use 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _ArgParser(prog="otparse", description="Opinion-tree parsing of sentiment quadruples.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="random seed (runs are reproducible given it)")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    def fmt(p):
        p.add_argument("--format", choices=("auto", "jsonl", "acos"), default="auto",
                       help="corpus format; auto picks acos for .tsv/.txt")

    def grammar_opts(p):
        p.add_argument("--categories", help="file with one category per line (default: taken from the corpus)")
        p.add_argument("--families", nargs="+", metavar="FAMILY",
                       help=f"conditional rule families to enable ({', '.join(FAMILIES)}, or 'none'); default all")

    p = common(sub.add_parser("normalize", help="corpus -> bracketed trees and a situation histogram"))
    p.add_argument("corpus")
    fmt(p)
    grammar_opts(p)
    p.add_argument("--split", choices=SPLITS, default="train", help="split assigned to ACOS imports")
    p.add_argument("--trees", help="write 'line<TAB>tag<TAB>tree' rows here")
    p.add_argument("--skips", help="write the import skip report here (ACOS input only)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_normalize)

    p = common(sub.add_parser("train", help="corpus + config -> checkpoint and metrics log"))
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--corpus", help="training corpus (overrides paths.train)")
    p.add_argument("--checkpoint", help="output checkpoint (overrides paths.checkpoint)")
    p.add_argument("--metrics", help="output metrics log (overrides paths.metrics)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--optimizer", choices=("sgd", "adam"))
    p.add_argument("--clip-norm", type=float, help="gradient norm clip (default 5.0)")
    p.add_argument("--no-clip", action="store_true", help="disable gradient clipping")
    p.add_argument("--d", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--stop-when-fit", action="store_true", help="stop at zero loss and training F1 1")
    fmt(p)
    grammar_opts(p)
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("parse", help="checkpoint + raw sentences -> trees and quads"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("input", help="one space-tokenized sentence per line, '-' for stdin")
    p.add_argument("--trees", default="-", help="bracketed trees (default stdout)")
    p.add_argument("--out", help="predicted quads in the canonical corpus format")
    p.add_argument("--split", choices=SPLITS, default="test")
    p.add_argument("--dump-chart", help="debug: write every chart cell as 'i j label score split'")
    p.add_argument("--unconstrained", action="store_true", help="ablation: ignore the grammar while decoding")
    p.set_defaults(func=cmd_parse)

    p = common(sub.add_parser("eval", help="predictions + gold -> precision/recall/F1"))
    p.add_argument("pred", help="predictions, canonical format")
    p.add_argument("gold", help="gold corpus")
    fmt(p)
    p.add_argument("--trees", help="bracketed predicted trees, for completeness")
    p.add_argument("--checkpoint", help="grammar source for --trees")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("bench", help="checkpoint + corpus -> decode timing"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("corpus", nargs="?", help="corpus to time; default: random sentences of --lengths")
    fmt(p)
    p.add_argument("--lengths", default="8,16,32,64")
    p.add_argument("--per-length", type=int, default=3)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = common(sub.add_parser("oracle-check", help="run the brute-force reference checks on small instances"))
    p.set_defaults(func=cmd_oracle_check)
    return ap


INVALID_INPUT = (UsageError, ConfigError, CorpusFormatError, CheckpointError, GrammarError,
                 UnparseableError, TrainingDiverged, OSError, json.JSONDecodeError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (AssertionError, DecodeError) as exc:
        print(f"otparse: internal check failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except INVALID_INPUT as exc:
        print(f"otparse: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"otparse: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
