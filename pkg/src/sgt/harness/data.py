"""CSV ingestion driven by a JSON schema sidecar.

Schema layout::

    {
      "format_version": 1,
      "features": [
        {"name": "x0", "type": "numeric", "min": 0.0, "max": 1.0},   # range optional
        {"name": "x1", "type": "nominal", "values": ["a", "b"]}
      ],
      "target": {"name": "y", "type": "class", "values": ["no", "yes"]},
      "bag_id": "molecule"                                              # MIL only
    }

Target types are ``class`` (``values`` or ``n_classes``), ``numeric`` and
``bag_label`` (values 0/1, requires ``bag_id``).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from ..discretize import NominalFeature, NumericFeature

SCHEMA_VERSION = 1
TARGET_KINDS = ("class", "numeric", "bag_label")


class DataError(ValueError):
    pass


@dataclass
class FeatureSpec:
    name: str
    kind: str
    values: Optional[list] = None
    min: Optional[float] = None
    max: Optional[float] = None

    def meta(self, bins: int):
        if self.kind == "nominal":
            return NominalFeature(self.name, len(self.values), tuple(self.values))
        return NumericFeature(self.name, bins, self.min, self.max)


@dataclass
class DatasetSchema:
    features: list
    target_name: str
    target_kind: str
    class_values: Optional[list] = None
    bag_id: Optional[str] = None
    _value_index: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        if self.target_kind not in TARGET_KINDS:
            raise DataError(f"unknown target type {self.target_kind!r}")
        if self.target_kind == "class" and (not self.class_values or len(self.class_values) < 2):
            raise DataError("class target needs at least two values")
        if self.target_kind == "bag_label" and not self.bag_id:
            raise DataError("bag_label target requires a bag_id column")
        if self.target_name in names or (self.bag_id and self.bag_id in names + [self.target_name]):
            raise DataError("target / bag_id columns must be distinct from features")
        self._value_index = [
            {str(v): i for i, v in enumerate(f.values)} if f.kind == "nominal" else None
            for f in self.features
        ]

    @property
    def columns(self) -> list[str]:
        cols = [f.name for f in self.features] + [self.target_name]
        if self.bag_id:
            cols.append(self.bag_id)
        return cols

    @property
    def n_classes(self) -> int:
        return len(self.class_values)

    def feature_metas(self, bins: int) -> list:
        return [f.meta(bins) for f in self.features]

    @classmethod
    def from_dict(cls, d: dict) -> DatasetSchema:
        if d.get("format_version") != SCHEMA_VERSION:
            raise DataError(f"unsupported schema format_version {d.get('format_version')!r}")
        feats = []
        for fd in d["features"]:
            kind = fd.get("type")
            if kind == "nominal":
                values = [str(v) for v in fd["values"]]
                if len(set(values)) != len(values) or len(values) < 2:
                    raise DataError(f"nominal feature {fd['name']!r} needs >= 2 distinct values")
                feats.append(FeatureSpec(fd["name"], "nominal", values=values))
            elif kind == "numeric":
                lo, hi = fd.get("min"), fd.get("max")
                if (lo is None) != (hi is None):
                    raise DataError(f"numeric feature {fd['name']!r}: give both min and max or neither")
                if lo is not None and float(lo) > float(hi):
                    raise DataError(f"numeric feature {fd['name']!r}: min > max")
                feats.append(FeatureSpec(fd["name"], "numeric",
                                         min=None if lo is None else float(lo),
                                         max=None if hi is None else float(hi)))
            else:
                raise DataError(f"feature {fd.get('name')!r}: unknown type {kind!r}")
        t = d["target"]
        values = None
        if t["type"] == "class":
            if "values" in t:
                values = [str(v) for v in t["values"]]
            else:
                values = [str(i) for i in range(int(t["n_classes"]))]
        return cls(feats, t["name"], t["type"], values, d.get("bag_id"))

    @classmethod
    def load(cls, path) -> DatasetSchema:
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"cannot read schema {path}: {e}") from e
        try:
            return cls.from_dict(d)
        except KeyError as e:
            raise DataError(f"schema {path} is missing key {e}") from e

    def to_dict(self) -> dict:
        feats = []
        for f in self.features:
            fd = {"name": f.name, "type": f.kind}
            if f.kind == "nominal":
                fd["values"] = list(f.values)
            elif f.min is not None:
                fd["min"], fd["max"] = f.min, f.max
            feats.append(fd)
        target = {"name": self.target_name, "type": self.target_kind}
        if self.class_values is not None:
            target["values"] = list(self.class_values)
        d = {"format_version": SCHEMA_VERSION, "features": feats, "target": target}
        if self.bag_id:
            d["bag_id"] = self.bag_id
        return d

    # -- row parsing ----------------------------------------------------

    def parse_row(self, cells: dict, row: int):
        x = np.empty(len(self.features))
        for i, f in enumerate(self.features):
            raw = cells[f.name].strip()
            if raw == "":
                raise DataError(f"row {row}: missing value for {f.name!r}")
            if f.kind == "nominal":
                try:
                    x[i] = self._value_index[i][raw]
                except KeyError:
                    raise DataError(f"row {row}: unknown value {raw!r} for nominal feature {f.name!r}") from None
            else:
                x[i] = _parse_float(raw, f.name, row)
        raw = cells[self.target_name].strip()
        if raw == "":
            raise DataError(f"row {row}: missing target")
        if self.target_kind == "class":
            try:
                y = self.class_values.index(raw)
            except ValueError:
                raise DataError(f"row {row}: unknown class {raw!r}") from None
        elif self.target_kind == "numeric":
            y = _parse_float(raw, self.target_name, row)
        else:
            if raw not in ("0", "1"):
                raise DataError(f"row {row}: bag label must be 0 or 1, got {raw!r}")
            y = int(raw)
        return x, y


def _parse_float(raw: str, name: str, row: int) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise DataError(f"row {row}: non-numeric value {raw!r} in column {name!r}") from None
    if not math.isfinite(v):
        raise DataError(f"row {row}: non-finite value {raw!r} in column {name!r}")
    return v


def iter_rows(path, schema: DatasetSchema) -> Iterator[tuple[np.ndarray, object, Optional[str]]]:
    """Yield (x, y, bag_id) per data row in file order. Row numbers in errors are file line numbers."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in schema.columns if c not in header]
        extra = [c for c in header if c not in schema.columns]
        if missing or extra or len(set(header)) != len(header):
            raise DataError(f"{path}: header does not match schema (missing {missing}, unexpected {extra})")
        for line, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataError(f"row {line}: expected {len(header)} cells, found {len(cells)}")
            rec = dict(zip(header, cells))
            x, y = schema.parse_row(rec, line)
            bag = rec[schema.bag_id].strip() if schema.bag_id else None
            if schema.bag_id and not bag:
                raise DataError(f"row {line}: missing bag id")
            yield x, y, bag


def load_instances(path, schema: DatasetSchema) -> tuple[np.ndarray, np.ndarray]:
    X, Y = [], []
    for x, y, _ in iter_rows(path, schema):
        X.append(x)
        Y.append(y)
    X = np.array(X).reshape(len(X), len(schema.features))
    return X, np.array(Y, dtype=float if schema.target_kind == "numeric" else np.int64)


@dataclass
class BagSet:
    bag_ids: list
    bags: list
    labels: list

    def __len__(self):
        return len(self.bags)


def load_bags(path, schema: DatasetSchema) -> BagSet:
    """Group rows by bag id, keeping bags in order of first appearance."""
    if schema.target_kind != "bag_label":
        raise DataError("schema target is not a bag label")
    rows: dict[str, list] = {}
    labels: dict[str, int] = {}
    for x, y, bag in iter_rows(path, schema):
        if bag in labels and labels[bag] != y:
            raise DataError(f"bag {bag!r} has conflicting labels")
        labels.setdefault(bag, y)
        rows.setdefault(bag, []).append(x)
    ids = list(rows)
    return BagSet(ids, [np.array(rows[b]) for b in ids], [labels[b] for b in ids])
