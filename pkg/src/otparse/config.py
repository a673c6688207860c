"""JSON run configuration.

Every section is optional; unknown keys anywhere are an error, and every
path named in ``paths`` (except outputs) must exist when the file is loaded.
Relative paths resolve against the config file's directory.

    {
      "seed": 0,
      "grammar": {"categories_file": "cats.txt", "families": ["one_to_many", ...]},
      "scorer": {"d": 64, "hidden": 128, "hash_buckets": 0},
      "train": {"learning_rate": 0.05, "epochs": 500, "batch_size": 8, ...},
      "paths": {"train": "train.jsonl", "checkpoint": "model.ckpt", "metrics": "metrics.tsv"},
      "polarity_codes": {"0": "negative", "1": "neutral", "2": "positive"}
    }
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .grammar import ALL_FAMILIES, FAMILIES, normalize_category
from .trainer import ScorerConfig, TrainConfig

INPUT_PATHS = ("train", "validation", "test")
OUTPUT_PATHS = ("checkpoint", "metrics")


class ConfigError(ValueError):
    pass


@dataclass
class GrammarConfig:
    categories: list | None = None  # None: take them from the training corpus
    families: frozenset = ALL_FAMILIES


@dataclass
class RunConfig:
    seed: int = 0
    grammar: GrammarConfig = field(default_factory=GrammarConfig)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: dict = field(default_factory=dict)
    polarity_codes: dict | None = None


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _dataclass_from(cls, obj, where):
    names = [f.name for f in dataclasses.fields(cls)]
    _check_keys(obj, names, where)
    try:
        return cls(**obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def read_categories(path) -> list[str]:
    cats = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            # '#' also separates entity and attribute, so only whole-line comments
            if line.strip() and not line.lstrip().startswith("#"):
                cats.append(normalize_category(line))
    return cats


def parse_config(obj: dict, base: Path = Path(".")) -> RunConfig:
    _check_keys(obj, ("seed", "grammar", "scorer", "train", "paths", "polarity_codes"), "config")
    cfg = RunConfig()
    if "seed" in obj:
        if not isinstance(obj["seed"], int) or isinstance(obj["seed"], bool):
            raise ConfigError("seed must be an integer")
        cfg.seed = obj["seed"]
    g = obj.get("grammar", {})
    _check_keys(g, ("categories_file", "categories", "families"), "grammar")
    if "categories_file" in g and "categories" in g:
        raise ConfigError("give grammar.categories or grammar.categories_file, not both")
    if "categories_file" in g:
        p = base / g["categories_file"]
        if not p.is_file():
            raise ConfigError(f"categories file {p} does not exist")
        cfg.grammar.categories = read_categories(p)
    elif "categories" in g:
        cfg.grammar.categories = [normalize_category(c) for c in g["categories"]]
    if "families" in g:
        bad = sorted(set(g["families"]) - set(FAMILIES))
        if bad:
            raise ConfigError(f"unknown rule families: {', '.join(bad)}")
        cfg.grammar.families = frozenset(g["families"])
    if "scorer" in obj:
        cfg.scorer = _dataclass_from(ScorerConfig, obj["scorer"], "scorer")
    train = dict(obj.get("train", {}))
    train.setdefault("seed", cfg.seed)
    cfg.train = _dataclass_from(TrainConfig, train, "train")
    paths = obj.get("paths", {})
    _check_keys(paths, INPUT_PATHS + OUTPUT_PATHS, "paths")
    for key, value in paths.items():
        p = base / value
        if key in INPUT_PATHS and not p.is_file():
            raise ConfigError(f"paths.{key}: {p} does not exist")
        cfg.paths[key] = p
    if "polarity_codes" in obj:
        codes = obj["polarity_codes"]
        if not isinstance(codes, dict):
            raise ConfigError("polarity_codes must be an object")
        cfg.polarity_codes = {str(k): v for k, v in codes.items()}
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(obj, path.parent)
