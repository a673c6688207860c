"""Corpus records: the canonical JSONL format and the ACOS TSV importer.

Canonical line (keys in this order, no spaces, UTF-8)::

    {"split":"train","source_line":12,"tokens":["the","pizza"],"quads":[[1,2,"FOOD#QUALITY","positive",null,null]]}

Each quad is ``[a_start, a_end, CATEGORY, polarity, o_start, o_end]`` with
``null`` pairs for implicit terms.  Spans are fenceposts into ``tokens``
(never FA/FO-augmented).  Writing a parsed file back gives identical bytes.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .builder import SentimentQuadruple, Unparseable, validate_parseable
from .grammar import POLARITIES, Grammar, normalize_category

log = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test")
RECORD_KEYS = ("split", "source_line", "tokens", "quads")
# public ACOS release convention
DEFAULT_POLARITY_CODES = {"0": "negative", "1": "neutral", "2": "positive"}


class CorpusFormatError(ValueError):
    """Bad input line; ``line`` is 1-based."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


@dataclass(frozen=True)
class CorpusRecord:
    tokens: tuple
    quads: tuple
    split: str = "train"
    source_line: int = 0

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        n = len(self.tokens)
        for q in self.quads:
            for span in (q.aspect, q.opinion):
                if span is not None and span[1] > n:
                    raise ValueError(f"span {span} out of range for {n} tokens")


def quad_to_list(q: SentimentQuadruple) -> list:
    a = list(q.aspect) if q.aspect is not None else [None, None]
    o = list(q.opinion) if q.opinion is not None else [None, None]
    return [a[0], a[1], q.category, q.polarity, o[0], o[1]]


def _span(a, b, what: str):
    if a is None and b is None:
        return None
    if not (isinstance(a, int) and isinstance(b, int)) or isinstance(a, bool) or isinstance(b, bool):
        raise ValueError(f"{what} span must be two integers or two nulls")
    return (a, b)


def quad_from_list(item) -> SentimentQuadruple:
    if not isinstance(item, list) or len(item) != 6:
        raise ValueError("a quad is a 6-element list")
    a0, a1, cat, pol, o0, o1 = item
    if not isinstance(cat, str) or not isinstance(pol, str):
        raise ValueError("category and polarity must be strings")
    return SentimentQuadruple(_span(a0, a1, "aspect"), cat, _span(o0, o1, "opinion"), pol)


def dump_record(rec: CorpusRecord) -> str:
    obj = {
        "split": rec.split,
        "source_line": rec.source_line,
        "tokens": list(rec.tokens),
        "quads": [quad_to_list(q) for q in rec.quads],
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def parse_record(line: str) -> CorpusRecord:
    obj = json.loads(line)
    if not isinstance(obj, dict) or tuple(obj) != RECORD_KEYS:
        raise ValueError(f"record keys must be exactly {list(RECORD_KEYS)} in that order")
    tokens = obj["tokens"]
    if not isinstance(tokens, list) or not all(isinstance(t, str) and t and not t.isspace() for t in tokens):
        raise ValueError("tokens must be a list of non-empty strings")
    if not isinstance(obj["source_line"], int) or isinstance(obj["source_line"], bool):
        raise ValueError("source_line must be an integer")
    if not isinstance(obj["quads"], list):
        raise ValueError("quads must be a list")
    quads = tuple(quad_from_list(q) for q in obj["quads"])
    return CorpusRecord(tuple(tokens), quads, obj["split"], obj["source_line"])


def read_corpus(path) -> list[CorpusRecord]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                out.append(parse_record(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusFormatError(path, lineno, str(exc)) from None
    return out


def write_corpus(records: Iterable[CorpusRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dump_record(rec) + "\n")


# ---------------------------------------------------------------------------
# ACOS TSV


@dataclass
class SkipReport:
    total: int = 0
    skipped: list = field(default_factory=list)  # (line, reason, detail)

    @property
    def retained(self) -> int:
        return self.total - len(self.skipped)

    @property
    def rate(self) -> float:
        return len(self.skipped) / self.total if self.total else 0.0

    def counts(self) -> dict[str, int]:
        return dict(sorted(Counter(reason for _, reason, _ in self.skipped).items()))

    def merge(self, other: "SkipReport") -> "SkipReport":
        return SkipReport(self.total + other.total, self.skipped + other.skipped)

    def to_text(self) -> str:
        lines = [f"total\t{self.total}", f"retained\t{self.retained}",
                 f"skipped\t{len(self.skipped)}", f"skip_rate\t{self.rate:.6f}"]
        lines += [f"reason.{k}\t{v}" for k, v in self.counts().items()]
        lines += [f"line\t{ln}\t{reason}\t{detail}" for ln, reason, detail in self.skipped]
        return "\n".join(lines) + "\n"


def _parse_pair(text: str):
    a, sep, b = text.partition(",")
    if not sep:
        raise ValueError(f"expected 'start,end', got {text!r}")
    return int(a), int(b)


def parse_acos_quad(text: str, n: int, polarity_codes=DEFAULT_POLARITY_CODES) -> SentimentQuadruple:
    parts = text.split(" ")
    if len(parts) != 4:
        raise ValueError(f"quad needs 4 space-separated fields, got {text!r}")
    a, cat, code, o = parts
    if code not in polarity_codes:
        raise ValueError(f"unknown polarity code {code!r}")
    spans = []
    for what, raw in (("aspect", a), ("opinion", o)):
        i, j = _parse_pair(raw)
        if (i, j) == (-1, -1):
            spans.append(None)
        elif not 0 <= i < j <= n:
            raise IndexError(f"{what} span {i},{j} out of range for {n} tokens")
        else:
            spans.append((i, j))
    return SentimentQuadruple(spans[0], normalize_category(cat), spans[1], polarity_codes[code])


def import_acos_tsv(path, split: str = "train", polarity_codes=None,
                    grammar: Grammar | None = None) -> tuple[list[CorpusRecord], SkipReport]:
    """Read an ACOS-style TSV file.

    Sentences the grammar cannot represent go to the skip report with their
    reason; malformed lines and out-of-range spans raise
    :class:`CorpusFormatError` naming the line.
    """
    codes = dict(polarity_codes or DEFAULT_POLARITY_CODES)
    bad = set(codes.values()) - set(POLARITIES)
    if bad:
        raise ValueError(f"polarity codes map to unknown polarities {sorted(bad)}")
    records, report = [], SkipReport()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            report.total += 1
            fields = line.split("\t")
            tokens = tuple(fields[0].split())
            if not tokens:
                raise CorpusFormatError(path, lineno, "empty sentence")
            if len(fields) < 2 or not all(f.strip() for f in fields[1:]):
                raise CorpusFormatError(path, lineno, "expected a sentence and at least one quad")
            try:
                quads = tuple(parse_acos_quad(f.strip(), len(tokens), codes) for f in fields[1:])
            except IndexError as exc:
                raise CorpusFormatError(path, lineno, f"out-of-range span: {exc}") from None
            except ValueError as exc:
                raise CorpusFormatError(path, lineno, f"malformed quad: {exc}") from None
            tag = validate_parseable(tokens, quads, grammar)
            if isinstance(tag, Unparseable):
                report.skipped.append((lineno, tag.reason, tag.detail))
                continue
            records.append(CorpusRecord(tokens, quads, split, lineno))
    log.info("%s: %d lines, %d kept, %d skipped %s", path, report.total, report.retained,
             len(report.skipped), report.counts())
    return records, report


def import_acos_splits(paths: dict, polarity_codes=None, grammar=None):
    """``{"train": path, ...}`` -> records in split order plus the merged skip report."""
    records, report = [], SkipReport()
    for split in SPLITS:
        if split in paths:
            recs, rep = import_acos_tsv(paths[split], split, polarity_codes, grammar)
            records += recs
            report = report.merge(rep)
    return records, report


def load_any(path, split: str = "train", polarity_codes=None, grammar=None) -> list[CorpusRecord]:
    """Canonical ``.jsonl`` or ACOS ``.tsv`` by file extension (skips are logged, not returned)."""
    if Path(path).suffix in (".tsv", ".txt"):
        return import_acos_tsv(path, split, polarity_codes, grammar)[0]
    return read_corpus(path)


def categories_of(records: Sequence[CorpusRecord]) -> list[str]:
    return sorted({q.category for r in records for q in r.quads})
