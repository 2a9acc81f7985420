"""Tabular ingestion and binarization for the UCI tasks, plus truth-table data."""

from __future__ import annotations

import csv
import gzip
import hashlib
import io
import json
import logging
import os
import re
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .gates import CORNERS, GateKind, truth_table

log = logging.getLogger(__name__)

CACHE_FORMAT = "logicnn-binarized"
CACHE_VERSION = 1
DEFAULT_THRESHOLDS = 8
DATASETS = ("breast", "adult")


class DataError(ValueError):
    """Raised for unreadable, malformed or empty source data."""


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # categorical | ordinal | continuous
    categories: tuple[str, ...] | None = None  # level order for ordinal columns


@dataclass
class Schema:
    name: str
    columns: list[Column]
    label: str
    classes: tuple[str, ...]
    order: list[str]
    missing: str = "?"
    label_strip: str = ""
    skip_prefix: str | None = None
    files: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        cols = [
            Column(c["name"], c["kind"], tuple(c["categories"]) if "categories" in c else None)
            for c in d["columns"]
            if c["kind"] != "label"
        ]
        return cls(
            name=d["name"],
            columns=cols,
            label=d["label"],
            classes=tuple(d["classes"]),
            order=[c["name"] for c in d["columns"]],
            missing=d.get("missing", "?"),
            label_strip=d.get("label_strip", ""),
            skip_prefix=d.get("skip_prefix"),
            files=dict(d.get("files", {})),
        )


def load_schema(name: str) -> Schema:
    if name not in DATASETS:
        raise DataError(f"unknown dataset {name!r}; choose from {DATASETS}")
    text = resources.files("logicnn.schemas").joinpath(f"{name}.json").read_text()
    return Schema.from_dict(json.loads(text))


@dataclass
class TabularDataset:
    columns: list[Column]
    rows: list[tuple]  # categorical: str; ordinal: int level; continuous: float; None when missing
    labels: np.ndarray  # int class indices
    classes: tuple[str, ...]
    source: str = ""
    missing: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    def subset(self, idx) -> "TabularDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return TabularDataset(
            self.columns, [self.rows[i] for i in idx], self.labels[idx], self.classes,
            self.source, dict(self.missing),
        )

    def concat(self, other: "TabularDataset") -> "TabularDataset":
        missing = {k: self.missing.get(k, 0) + other.missing.get(k, 0)
                   for k in set(self.missing) | set(other.missing)}
        return TabularDataset(
            self.columns, self.rows + other.rows, np.concatenate([self.labels, other.labels]),
            self.classes, f"{self.source}+{other.source}", missing,
        )


def _open_text(path: Path):
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def load_csv(path: str | Path, schema: Schema) -> TabularDataset:
    """Parse a comma-separated UCI file; every problem is reported with its row number."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    by_name = {c.name: c for c in schema.columns}
    width = len(schema.order)
    rows, labels, problems = [], [], []
    missing = {c.name: 0 for c in schema.columns}
    with _open_text(path) as fh:
        for lineno, cells in enumerate(csv.reader(fh, skipinitialspace=True), 1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if schema.skip_prefix and cells[0].startswith(schema.skip_prefix):
                continue
            cells = [c.strip() for c in cells]
            if len(cells) != width:
                problems.append(f"row {lineno}: expected {width} fields, got {len(cells)}")
                continue
            record, ok = {}, True
            for name, cell in zip(schema.order, cells):
                if name == schema.label:
                    lab = cell[: -len(schema.label_strip)] if schema.label_strip and cell.endswith(schema.label_strip) else cell
                    if lab not in schema.classes:
                        problems.append(f"row {lineno}: unknown class {cell!r}")
                        ok = False
                    record[name] = lab
                    continue
                col = by_name[name]
                if cell == schema.missing:
                    missing[name] += 1
                    record[name] = cell if col.kind == "categorical" else None
                elif col.kind == "continuous":
                    try:
                        record[name] = float(cell)
                    except ValueError:
                        problems.append(f"row {lineno}: column {name!r} is not numeric: {cell!r}")
                        ok = False
                elif col.categories is not None and cell not in col.categories:
                    problems.append(f"row {lineno}: unknown category {cell!r} in column {name!r}")
                    ok = False
                elif col.kind == "ordinal":
                    record[name] = col.categories.index(cell)
                else:
                    record[name] = cell
            if ok:
                rows.append(tuple(record[c.name] for c in schema.columns))
                labels.append(schema.classes.index(record[schema.label]))
    if problems:
        shown = "\n  ".join(problems[:20])
        more = f"\n  ... and {len(problems) - 20} more" if len(problems) > 20 else ""
        raise DataError(f"{path}: {len(problems)} bad rows\n  {shown}{more}")
    if not rows:
        raise DataError(f"{path}: dataset is empty")
    n_missing = sum(missing.values())
    log.info("loaded %s: %d rows, %d missing cells", path.name, len(rows), n_missing)
    return TabularDataset(list(schema.columns), rows, np.asarray(labels, dtype=np.int64),
                          schema.classes, path.name, {k: v for k, v in missing.items() if v})


# -- splitting ----------------------------------------------------------------


def split_indices(labels, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(labels, return_counts=True)
    if counts.min() < 2:
        warnings.warn("a class has fewer than 2 rows; falling back to a plain random split")
        perm = rng.permutation(labels.size)
        n_test = int(round(labels.size * test_fraction))
        test, train = perm[:n_test], perm[n_test:]
    else:
        train_parts, test_parts = [], []
        for cls in classes:
            idx = rng.permutation(np.flatnonzero(labels == cls))
            n_test = int(round(idx.size * test_fraction))
            test_parts.append(idx[:n_test])
            train_parts.append(idx[n_test:])
        train, test = np.concatenate(train_parts), np.concatenate(test_parts)
    if train.size == 0 or test.size == 0:
        raise ValueError(f"split with test_fraction={test_fraction} leaves an empty side "
                         f"({train.size} train / {test.size} test)")
    return np.sort(train), np.sort(test)


def split(ds: TabularDataset, test_fraction: float = 0.3, seed: int = 0):
    """Stratified seeded split into ``(train, test)``."""
    train, test = split_indices(ds.labels, test_fraction, seed)
    return ds.subset(train), ds.subset(test)


# -- binarization -------------------------------------------------------------


@dataclass(frozen=True)
class ColumnRule:
    name: str
    rule: str  # onehot | thermometer
    categories: tuple[str, ...] = ()
    thresholds: tuple[float, ...] = ()
    impute: float | None = None

    def __post_init__(self):
        if self.rule == "thermometer" and any(
            b <= a for a, b in zip(self.thresholds, self.thresholds[1:])
        ):
            raise ValueError(f"thresholds for {self.name!r} must be strictly increasing")


@dataclass(frozen=True)
class BinarizationSpec:
    rules: tuple[ColumnRule, ...]

    def to_dict(self) -> dict:
        return {"rules": [
            {"name": r.name, "rule": r.rule, "categories": list(r.categories),
             "thresholds": list(r.thresholds), "impute": r.impute}
            for r in self.rules
        ]}

    @classmethod
    def from_dict(cls, d: dict) -> "BinarizationSpec":
        return cls(tuple(
            ColumnRule(r["name"], r["rule"], tuple(r["categories"]), tuple(r["thresholds"]), r["impute"])
            for r in d["rules"]
        ))

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def feature_names(self) -> list[str]:
        names = []
        for r in self.rules:
            if r.rule == "onehot":
                names += [_clean(f"{r.name}={c}") for c in r.categories]
            else:
                names += [_clean(f"{r.name}>{t:g}") for t in r.thresholds]
        return names


def _clean(name: str) -> str:
    # keep names usable as identifiers in exported expressions
    return re.sub(r"[\s()#]", "_", name)


def fit_binarization(train: TabularDataset, thresholds: int = DEFAULT_THRESHOLDS) -> BinarizationSpec:
    """Learn one-hot vocabularies and quantile thresholds from training rows only."""
    if len(train) == 0:
        raise DataError("cannot fit binarization on an empty dataset")
    rules = []
    for j, col in enumerate(train.columns):
        values = [row[j] for row in train.rows]
        if col.kind == "categorical":
            seen = set(values)
            known = [c for c in (col.categories or ()) if c in seen]
            extras = sorted(seen - set(known))
            rules.append(ColumnRule(col.name, "onehot", tuple(known + extras)))
        else:
            present = np.array([v for v in values if v is not None], dtype=np.float64)
            if present.size == 0:
                raise DataError(f"column {col.name!r} has no values in the training split")
            median = float(np.median(present))
            if col.kind == "ordinal":
                # one cut between each pair of adjacent observed levels
                cuts = tuple(float(t) for t in np.unique(present)[:-1])
            else:
                qs = np.quantile(present, np.arange(1, thresholds + 1) / (thresholds + 1))
                cuts = tuple(float(t) for t in np.unique(qs))
            rules.append(ColumnRule(col.name, "thermometer", thresholds=cuts, impute=median))
    return BinarizationSpec(tuple(rules))


@dataclass
class BinarizedDataset:
    x: np.ndarray  # (rows, features) uint8
    y: np.ndarray  # (rows,) int64
    feature_names: list[str]
    classes: tuple[str, ...]
    provenance: dict = field(default_factory=dict)
    groups: list[tuple[str, str, int, int]] = field(default_factory=list)  # (column, rule, start, stop)

    def __len__(self) -> int:
        return int(self.x.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.x.shape[1])

    @property
    def class_count(self) -> int:
        return len(self.classes)

    def subset(self, idx) -> "BinarizedDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return BinarizedDataset(self.x[idx], self.y[idx], self.feature_names, self.classes,
                                dict(self.provenance), list(self.groups))


def binarize(ds: TabularDataset, spec: BinarizationSpec) -> BinarizedDataset:
    by_name = {r.name: r for r in spec.rules}
    missing_rules = [c.name for c in ds.columns if c.name not in by_name]
    if missing_rules:
        raise ValueError(f"binarization spec does not cover columns {missing_rules}")
    blocks, groups, start = [], [], 0
    n = len(ds)
    for j, col in enumerate(ds.columns):
        rule = by_name[col.name]
        values = [row[j] for row in ds.rows]
        if rule.rule == "onehot":
            pos = {c: i for i, c in enumerate(rule.categories)}
            block = np.zeros((n, len(rule.categories)), dtype=np.uint8)
            unseen = 0
            for i, v in enumerate(values):
                k = pos.get(v)
                if k is None:
                    unseen += 1
                else:
                    block[i, k] = 1
            if unseen:
                warnings.warn(f"column {col.name!r}: {unseen} rows with categories not seen "
                              "during fitting were encoded as all zeros")
        else:
            v = np.array([rule.impute if x is None else x for x in values], dtype=np.float64)
            t = np.asarray(rule.thresholds, dtype=np.float64)
            block = (v[:, None] > t[None, :]).astype(np.uint8)
        blocks.append(block)
        groups.append((col.name, rule.rule, start, start + block.shape[1]))
        start += block.shape[1]
    x = np.concatenate(blocks, axis=1) if blocks else np.zeros((n, 0), np.uint8)
    return BinarizedDataset(x, ds.labels.copy(), spec.feature_names(), ds.classes,
                            {"source": ds.source, "spec_hash": spec.hash}, groups)


def synth_truth_table(gate: GateKind | int) -> BinarizedDataset:
    """The four corner inputs of a two-input gate, labelled by its outputs."""
    g = GateKind(gate)
    x = np.array(CORNERS, dtype=np.uint8)
    y = np.array(truth_table(g), dtype=np.int64)
    return BinarizedDataset(x, y, ["a", "b"], ("0", "1"), {"source": f"truth-table:{g.name}"})


# -- cache files --------------------------------------------------------------


def save_binarized(ds: BinarizedDataset, path: str | Path) -> None:
    """Deterministic JSON cache: the same dataset always writes the same bytes."""
    payload = {
        "format": CACHE_FORMAT,
        "version": CACHE_VERSION,
        "provenance": ds.provenance,
        "classes": list(ds.classes),
        "feature_names": ds.feature_names,
        "groups": [list(g) for g in ds.groups],
        "labels": ds.y.tolist(),
        "rows": ["".join("1" if b else "0" for b in row) for row in ds.x],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_binarized(path: str | Path) -> BinarizedDataset:
    d = json.loads(Path(path).read_text())
    if d.get("format") != CACHE_FORMAT or d.get("version") != CACHE_VERSION:
        raise DataError(f"{path}: not a version {CACHE_VERSION} binarized cache")
    width = len(d["feature_names"])
    x = np.array([[c == "1" for c in r] for r in d["rows"]], dtype=np.uint8).reshape(-1, width)
    return BinarizedDataset(x, np.asarray(d["labels"], dtype=np.int64), d["feature_names"],
                            tuple(d["classes"]), d["provenance"], [tuple(g) for g in d["groups"]])


# -- named datasets -----------------------------------------------------------


def default_data_dir() -> Path:
    env = os.environ.get("LOGICNN_DATA_DIR")
    if env:
        return Path(env)
    local = Path.cwd() / "data"
    if local.is_dir():
        return local
    return Path(__file__).resolve().parents[2] / "data"


def _require(path: Path, dataset: str) -> Path:
    if not path.exists():
        raise DataError(
            f"dataset {dataset!r} needs {path}, which does not exist. Place the UCI files in "
            f"that directory or point LOGICNN_DATA_DIR (or --data-dir) at them."
        )
    return path


def load_tabular(name: str, data_dir: str | Path | None = None) -> dict[str, TabularDataset]:
    """Raw tables keyed by partition: ``{"all": ...}`` or ``{"train": ..., "test": ...}``."""
    schema = load_schema(name)
    root = Path(data_dir) if data_dir is not None else default_data_dir()
    return {part: load_csv(_require(root / fname, name), schema) for part, fname in schema.files.items()}


def prepare_dataset(name: str, seed: int = 0, data_dir: str | Path | None = None,
                    test_fraction: float = 0.3, thresholds: int = DEFAULT_THRESHOLDS,
                    subsample: int | None = None) -> tuple[BinarizedDataset, BinarizedDataset]:
    """Binarized ``(train, test)`` for a named task.

    Adult uses its published train/test files; Breast Cancer gets a stratified
    split seeded by ``seed``. ``subsample`` keeps a seeded stratified subset of
    the training rows; the test side is never subsampled.
    """
    tables = load_tabular(name, data_dir)
    if "train" in tables and "test" in tables:
        train, test = tables["train"], tables["test"]
    else:
        train, test = split(tables["all"], test_fraction, seed)
    if subsample is not None and subsample < len(train):
        keep, _ = split_indices(train.labels, 1.0 - subsample / len(train), seed)
        train = train.subset(keep)
    spec = fit_binarization(train, thresholds)
    return binarize(train, spec), binarize(test, spec)


def table_sizes(name: str, data_dir: str | Path | None = None) -> dict[str, int]:
    return {k: len(v) for k, v in load_tabular(name, data_dir).items()}


__all__: Sequence[str] = [
    "BinarizationSpec",
    "BinarizedDataset",
    "Column",
    "ColumnRule",
    "DataError",
    "Schema",
    "TabularDataset",
    "binarize",
    "fit_binarization",
    "load_binarized",
    "load_csv",
    "load_schema",
    "load_tabular",
    "prepare_dataset",
    "save_binarized",
    "split",
    "split_indices",
    "synth_truth_table",
]
