"""Equal-width binning of numeric features, with range estimation from a warm-up sample."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Sequence, Union

import numpy as np


@dataclass(frozen=True)
class NominalFeature:
    name: str
    arity: int
    values: Optional[tuple] = None

    def __post_init__(self):
        if self.arity < 2:
            raise ValueError(f"nominal feature {self.name!r} needs arity >= 2, got {self.arity}")
        if self.values is not None and len(self.values) != self.arity:
            raise ValueError(f"nominal feature {self.name!r}: {len(self.values)} values for arity {self.arity}")

    @property
    def size(self) -> int:
        return self.arity


@dataclass(frozen=True)
class NumericFeature:
    """Numeric feature; min/max are None until the range has been estimated."""

    name: str
    bins: int = 64
    min: Optional[float] = None
    max: Optional[float] = None

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError(f"numeric feature {self.name!r} needs bins >= 2, got {self.bins}")
        if (self.min is None) != (self.max is None):
            raise ValueError(f"numeric feature {self.name!r}: give both min and max or neither")
        if self.min is not None and not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ValueError(f"numeric feature {self.name!r}: non-finite range")
        if self.min is not None and self.min > self.max:
            raise ValueError(f"numeric feature {self.name!r}: min {self.min} > max {self.max}")

    @property
    def finalized(self) -> bool:
        return self.min is not None

    @property
    def size(self) -> int:
        return self.bins

    @property
    def width(self) -> float:
        return (self.max - self.min) / self.bins


FeatureMeta = Union[NominalFeature, NumericFeature]


def widen_degenerate(lo: float, hi: float) -> tuple[float, float]:
    if hi > lo:
        return lo, hi
    return lo, lo + max(1.0, abs(lo) * 1e-6)


def _bin_codes(values, lo, width, bins):
    # Bin k covers [lo + k*width, lo + (k+1)*width); the floor estimate is
    # corrected by one step so codes agree exactly with those edges.
    values = np.asarray(values, dtype=float)
    k = np.floor((values - lo) / width)
    k = np.clip(k, 0, bins - 1)
    k = np.where((k < bins - 1) & (values >= lo + (k + 1) * width), k + 1, k)
    k = np.where((k > 0) & (values < lo + k * width), k - 1, k)
    return k.astype(np.int64)


def bin_index(meta: NumericFeature, value: float) -> int:
    """Bin of value under meta's equal-width grid; out-of-range values are clipped."""
    if not meta.finalized:
        raise ValueError(f"feature {meta.name!r} has no range yet")
    if math.isnan(value):
        raise ValueError(f"NaN value for feature {meta.name!r}")
    return int(_bin_codes(value, meta.min, meta.width, meta.bins))


def threshold_candidates(meta: NumericFeature) -> list[int]:
    """Boundaries b = 1..bins-1; boundary b sends bins < b left and bins >= b right."""
    return list(range(1, meta.bins))


class RangeEstimator:
    """Collects per-feature min/max over the first warmup_target instances.

    Absorbed instances (and an optional payload such as the label) are kept in
    arrival order so they can be replayed once the ranges are frozen.
    Features whose range is already known are left untouched.
    """

    def __init__(self, features: Sequence[FeatureMeta], warmup_target: int = 1000):
        if warmup_target < 1:
            raise ValueError("warmup_target must be positive")
        self.features = list(features)
        self.warmup_target = warmup_target
        self.seen = 0
        self.buffer: list[tuple[Any, Any]] = []
        self.finalized = False
        self._pos = np.array(
            [i for i, f in enumerate(self.features) if isinstance(f, NumericFeature) and not f.finalized],
            dtype=np.int64,
        )
        self._lo = np.full(len(self._pos), np.inf)
        self._hi = np.full(len(self._pos), -np.inf)

    @property
    def needs_warmup(self) -> bool:
        return len(self._pos) > 0

    @property
    def ready(self) -> bool:
        return self.seen >= self.warmup_target or not self.needs_warmup

    def absorb(self, x, payload=None) -> None:
        if self.finalized:
            raise RuntimeError("range estimator already finalized")
        if self.seen >= self.warmup_target:
            raise RuntimeError(f"warm-up sample already holds {self.warmup_target} instances")
        if len(self._pos):
            vals = np.asarray(x, dtype=float)[self._pos]
            if np.isnan(vals).any():
                raise ValueError("NaN value during range estimation")
            np.minimum(self._lo, vals, out=self._lo)
            np.maximum(self._hi, vals, out=self._hi)
        self.seen += 1
        self.buffer.append((x, payload))

    def ranges(self) -> dict[str, tuple[float, float]]:
        out = {}
        for j, i in enumerate(self._pos):
            name = self.features[i].name
            if self.seen == 0:
                out[name] = (0.0, 1.0)
            else:
                out[name] = widen_degenerate(float(self._lo[j]), float(self._hi[j]))
        return out

    def finalize(self) -> tuple[list[FeatureMeta], list[tuple[Any, Any]]]:
        """Freeze the ranges; returns the finalized features and the warm-up buffer.

        May be called before warmup_target is reached (e.g. at end of stream).
        """
        if self.finalized:
            raise RuntimeError("range estimator already finalized")
        ranges = self.ranges()
        feats = []
        for f in self.features:
            if f.name in ranges and isinstance(f, NumericFeature) and not f.finalized:
                lo, hi = ranges[f.name]
                f = replace(f, min=lo, max=hi)
            feats.append(f)
        self.finalized = True
        buffer, self.buffer = self.buffer, []
        return feats, buffer


@dataclass
class Binner:
    """Vectorized encoder from raw feature vectors to per-feature codes.

    Numeric values become bin indices; nominal values are already integer
    value indices and are passed through (range-checked when strict).
    """

    features: list
    offsets: np.ndarray = field(init=False)
    sizes: np.ndarray = field(init=False)

    def __post_init__(self):
        for f in self.features:
            if isinstance(f, NumericFeature) and not f.finalized:
                raise ValueError(f"numeric feature {f.name!r} has no range")
        self.sizes = np.array([f.size for f in self.features], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.int64)
        self.n_slots = int(self.sizes.sum())
        num = [i for i, f in enumerate(self.features) if isinstance(f, NumericFeature)]
        self._num = np.array(num, dtype=np.int64)
        self._nom = np.array([i for i, f in enumerate(self.features) if isinstance(f, NominalFeature)], dtype=np.int64)
        self._lo = np.array([self.features[i].min for i in num], dtype=float)
        self._width = np.array([self.features[i].width for i in num], dtype=float)
        self._bins = np.array([self.features[i].bins for i in num], dtype=np.int64)
        self._arity = self.sizes[self._nom]

    def encode(self, x, strict: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != len(self.features):
            raise ValueError(f"expected {len(self.features)} features, got {x.shape[-1]}")
        if np.isnan(x).any():
            raise ValueError("NaN in feature vector")
        codes = np.empty(x.shape, dtype=np.int64)
        codes[..., self._num] = _bin_codes(x[..., self._num], self._lo, self._width, self._bins)
        nom = x[..., self._nom]
        nom_codes = nom.astype(np.int64)
        bad = (nom_codes != nom) | (nom_codes < 0) | (nom_codes >= self._arity)
        if bad.any():
            if strict:
                raise ValueError("nominal value outside the declared value set")
            nom_codes = np.where(bad, -1, nom_codes)
        codes[..., self._nom] = nom_codes
        return codes
