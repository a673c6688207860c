"""Binary parameter checkpoints and the training metrics log.

Checkpoint layout (all integers little-endian)::

    offset  size  field
    0       8     magic b"OTPCKPT\\0"
    8       4     format version (uint32, currently 1)
    12      8     d            (int64)
    20      8     H            (int64)
    28      8     |L|          (int64)
    36      8     vocab_size   (int64, rows of the embedding table)
    44      8     seed         (int64)
    52      8     m = metadata length in bytes (uint64)
    60      m     metadata, UTF-8 JSON (vocabulary, labels, grammar text)
    60+m    ...   float64 parameters, row-major, in PARAM_ORDER

Parameter shapes follow from the header: embed V x d, boundary d, Wq/Wk/Wv/Wo
d x d, W1 d x H, b1 H, W2 H x |L|, b2 |L|.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .grammar import Grammar, build_label_set, dump_grammar, load_grammar
from .scorer import PARAM_ORDER, Scorer, ScorerParams, Vocab

MAGIC = b"OTPCKPT\0"
VERSION = 1
_HEADER = struct.Struct("<8sIqqqqqQ")


class CheckpointError(ValueError):
    pass


def param_shapes(d: int, hidden: int, n_labels: int, vocab_size: int) -> dict[str, tuple]:
    return {
        "embed": (vocab_size, d), "boundary": (d,),
        "Wq": (d, d), "Wk": (d, d), "Wv": (d, d), "Wo": (d, d),
        "W1": (d, hidden), "b1": (hidden,),
        "W2": (hidden, n_labels), "b2": (n_labels,),
    }


@dataclass
class Checkpoint:
    scorer: Scorer
    grammar: Grammar  # the full (un-pruned) grammar
    metadata: dict


def save_checkpoint(path, scorer: Scorer, grammar: Grammar, extra: dict | None = None) -> None:
    p = scorer.params
    labels = build_label_set(grammar)
    if len(labels) != p.n_labels:
        raise CheckpointError(f"scorer has {p.n_labels} label columns, grammar has {len(labels)} labels")
    meta = {
        "vocab": scorer.vocab.words,
        "hash_buckets": scorer.vocab.buckets,
        "labels": list(labels.labels),
        "grammar": dump_grammar(grammar),
        **(extra or {}),
    }
    blob = json.dumps(meta, ensure_ascii=False, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, p.d, p.hidden, p.n_labels, p.vocab_size, p.seed, len(blob)))
        fh.write(blob)
        for name in PARAM_ORDER:
            fh.write(np.ascontiguousarray(getattr(p, name), dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, d, hidden, n_labels, vocab_size, seed, mlen = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    if min(d, hidden, n_labels, vocab_size) <= 0:
        raise CheckpointError(f"{path}: bad dimensions in header")
    off = _HEADER.size
    try:
        meta = json.loads(data[off:off + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable metadata ({exc})") from None
    off += mlen
    shapes = param_shapes(d, hidden, n_labels, vocab_size)
    need = sum(math.prod(s) for s in shapes.values()) * 8
    if len(data) - off != need:
        raise CheckpointError(f"{path}: expected {need} parameter bytes, found {len(data) - off}")
    arrays = {}
    for name in PARAM_ORDER:
        size = math.prod(shapes[name])
        arrays[name] = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shapes[name]).astype(np.float64)
        off += size * 8
    params = ScorerParams(**arrays, seed=seed)
    vocab = Vocab(meta["vocab"][1:], buckets=meta.get("hash_buckets", 0))
    if vocab.words != meta["vocab"] or len(vocab) != vocab_size:
        raise CheckpointError(f"{path}: vocabulary does not match the embedding table")
    grammar = load_grammar(meta["grammar"])
    if list(build_label_set(grammar).labels) != meta["labels"]:
        raise CheckpointError(f"{path}: label set does not match the stored grammar")
    return Checkpoint(Scorer(params, vocab), grammar, meta)


# ---------------------------------------------------------------------------
# metrics log

METRICS_HEADER = "# otparse-metrics v1\nepoch\tloss\tf1"


def format_metrics_row(epoch: int, loss: float, f1: float) -> str:
    # repr of a float is its shortest exact round-trip form
    return f"{epoch}\t{loss!r}\t{f1!r}"


def write_metrics(path, history) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(METRICS_HEADER + "\n")
        for rec in history:
            fh.write(format_metrics_row(rec.epoch, rec.loss, rec.f1) + "\n")


def read_metrics(path) -> list[tuple[int, float, float]]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if "\n".join(lines[:2]) != METRICS_HEADER:
        raise ValueError(f"{path}: missing metrics header")
    rows = []
    for line in lines[2:]:
        e, loss, f1 = line.split("\t")
        rows.append((int(e), float(loss), float(f1)))
    return rows
