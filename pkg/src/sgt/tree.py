"""Stochastic gradient tree.

A single decision tree grown from per-instance gradient/Hessian pairs. Every
modification (splitting a leaf, or shifting a leaf's prediction) is a Newton
step on a second-order expansion of the loss, accepted only when a one-sample
t-test says the expected loss change is negative.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .discretize import Binner, FeatureMeta, NominalFeature, NumericFeature
from .ghstats import GradHessPair, GradHessStats
from .ttest import t_test_p

FORMAT_VERSION = 1

# rows of a leaf's per-slot statistics table
_N, _MG, _MH, _M2G, _M2H, _CGH = range(6)

NO_CHANGE = "no_change"
APPLIED_UPDATE = "applied_update"
APPLIED_SPLIT = "applied_split"


@dataclass(frozen=True)
class SgtConfig:
    lambda_: float = 0.1
    gamma: float = 1.0
    delta: float = 1e-3
    grace: int = 200
    bins: int = 64
    warmup: int = 1000
    two_sided: bool = False

    def __post_init__(self):
        if self.lambda_ < 0 or self.gamma < 0:
            raise ValueError("lambda and gamma must be non-negative")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.grace < 1 or self.warmup < 1:
            raise ValueError("grace and warmup must be positive")
        if self.bins < 2:
            raise ValueError("bins must be at least 2")


def leaf_value(sum_g: float, sum_h: float, lambda_: float) -> float:
    """Newton step -sum_g / (lambda + sum_h); 0 when the regularized curvature is not positive."""
    den = lambda_ + sum_h
    if den <= 1e-12:
        return 0.0
    return -sum_g / den


def _leaf_values(G, H, lambda_):
    den = lambda_ + H
    ok = den > 1e-12
    return np.where(ok, -G / np.where(ok, den, 1.0), 0.0)


class Leaf:
    __slots__ = ("prediction", "total", "stats", "count")

    def __init__(self, prediction: float, n_slots: int):
        self.prediction = prediction
        self.total = GradHessStats()
        self.stats = np.zeros((6, n_slots))
        self.count = 0

    def reset(self):
        self.total = GradHessStats()
        self.stats[:] = 0.0
        self.count = 0

    def slot_stats(self, slot: int) -> GradHessStats:
        col = self.stats[:, slot]
        return GradHessStats(int(col[_N]), float(col[_MG]), float(col[_MH]),
                             float(col[_M2G]), float(col[_M2H]), float(col[_CGH]))


class Split:
    """Internal node. boundary is None for a multiway nominal split."""

    __slots__ = ("feature", "boundary", "fallback", "children")

    def __init__(self, feature: int, boundary: Optional[int], fallback: float, children: list):
        self.feature = feature
        self.boundary = boundary
        self.fallback = fallback
        self.children = children


@dataclass
class SplitCandidate:
    """A proposed change to one leaf. feature is None for the update-only option."""

    feature: Optional[int]
    boundary: Optional[int]
    leaf_values: list
    delta_loss: float
    omega: float
    branch_stats: list = field(repr=False)
    pooled: list = field(default_factory=list)
    p_value: Optional[float] = None

    @property
    def kind(self) -> str:
        if self.feature is None:
            return "update_only"
        return "nominal" if self.boundary is None else "numeric"

    @property
    def objective(self) -> float:
        return self.delta_loss + self.omega

    def loss_change_moments(self) -> tuple[float, float, int]:
        """Mean, sample variance and count of the per-instance loss change over all branches."""
        n = sum(c for _, _, c in self.pooled)
        if n == 0:
            return 0.0, 0.0, 0
        mean = sum(m * c for m, _, c in self.pooled) / n
        m2 = sum(v * (c - 1) + c * (m - mean) ** 2 for m, v, c in self.pooled if c > 0)
        return mean, (m2 / (n - 1) if n >= 2 else 0.0), n


class StochasticGradientTree:
    def __init__(self, features: Sequence[FeatureMeta], config: Optional[SgtConfig] = None):
        self.config = config or SgtConfig()
        self.features = list(features)
        self.binner = Binner(self.features)
        self.root = Leaf(0.0, self.binner.n_slots)
        self.n_splits = 0
        self.n_updates = 0
        self.n_attempts = 0

    # -- routing --------------------------------------------------------

    def encode(self, x, strict: bool = True) -> np.ndarray:
        return self.binner.encode(x, strict=strict)

    def _route(self, codes):
        node, parent, branch = self.root, None, -1
        while isinstance(node, Split):
            c = int(codes[node.feature])
            if node.boundary is not None:
                branch = 0 if c < node.boundary else 1
            elif 0 <= c < len(node.children):
                branch = c
            else:
                return None, node, -1
            parent, node = node, node.children[branch]
        return node, parent, branch

    def predict_encoded(self, codes) -> float:
        leaf, parent, _ = self._route(codes)
        if leaf is None:
            return parent.fallback
        return leaf.prediction

    def predict(self, x) -> float:
        """Raw score of x; nominal values outside a split's branches get that split's fallback."""
        return self.predict_encoded(self.encode(x, strict=False))

    def leaf_for(self, x) -> Optional[Leaf]:
        return self._route(self.encode(x, strict=False))[0]

    # -- learning -------------------------------------------------------

    def apply_gradient(self, x, gh: GradHessPair) -> Optional[str]:
        """Route x to its leaf and record gh; returns the split-attempt outcome, if one ran."""
        return self.update_encoded(self.encode(x), gh.g, gh.h)

    def update_encoded(self, codes, g: float, h: float) -> Optional[str]:
        if not (math.isfinite(g) and math.isfinite(h)):
            raise ValueError(f"non-finite gradient/Hessian pair ({g}, {h})")
        leaf, parent, branch = self._route(codes)
        if leaf is None:
            raise ValueError("instance routes to a branch that does not exist")
        leaf.total.observe(g, h)
        idx = self.binner.offsets + codes
        col = leaf.stats[:, idx]
        n = col[_N] + 1.0
        dg = g - col[_MG]
        dh = h - col[_MH]
        mg = col[_MG] + dg / n
        mh = col[_MH] + dh / n
        col[_M2G] += dg * (g - mg)
        col[_M2H] += dh * (h - mh)
        col[_CGH] += dg * (h - mh)
        col[_N] = n
        col[_MG] = mg
        col[_MH] = mh
        leaf.stats[:, idx] = col
        leaf.count += 1
        if leaf.count % self.config.grace == 0:
            return self.try_split(leaf, parent, branch)
        return None

    # -- candidate scoring ----------------------------------------------

    def _branch_sums(self, leaf: Leaf, f: int):
        """Per-candidate branch sums (G, H) for feature f, each of shape (n_candidates, n_branches)."""
        lo = self.binner.offsets[f]
        size = self.binner.sizes[f]
        n = leaf.stats[_N, lo:lo + size]
        G = n * leaf.stats[_MG, lo:lo + size]
        H = n * leaf.stats[_MH, lo:lo + size]
        if isinstance(self.features[f], NominalFeature):
            return G[None, :], H[None, :]
        GL = np.cumsum(G)[:-1]
        HL = np.cumsum(H)[:-1]
        GR = np.cumsum(G[::-1])[::-1][1:]
        HR = np.cumsum(H[::-1])[::-1][1:]
        return np.stack([GL, GR], axis=1), np.stack([HL, HR], axis=1)

    def _score(self, leaf: Leaf):
        """Score every candidate, grouped per feature in tie-break order.

        Yields (feature, G, H, v, delta_loss, omega) with one row per candidate
        (per boundary for numeric features); the update-only group comes first
        with feature None.
        """
        lam, gam = self.config.lambda_, self.config.gamma
        G0 = np.array([[leaf.total.sum_g]])
        H0 = np.array([[leaf.total.sum_h]])
        v0 = _leaf_values(G0, H0, lam)
        out = [(None, G0, H0, v0, (G0 * v0 + 0.5 * H0 * v0 * v0).sum(axis=1), 0.5 * lam * (v0 * v0).sum(axis=1))]
        for f in range(len(self.features)):
            G, H = self._branch_sums(leaf, f)
            v = _leaf_values(G, H, lam)
            dl = (G * v + 0.5 * H * v * v).sum(axis=1)
            om = gam * G.shape[1] + 0.5 * lam * (v * v).sum(axis=1)
            out.append((f, G, H, v, dl, om))
        return out

    def _branch_stats(self, leaf: Leaf, feature: Optional[int], boundary: Optional[int]) -> list:
        if feature is None:
            return [leaf.total.copy()]
        lo = int(self.binner.offsets[feature])
        size = int(self.binner.sizes[feature])
        per_slot = [leaf.slot_stats(lo + j) for j in range(size)]
        if boundary is None:
            return per_slot
        left, right = GradHessStats(), GradHessStats()
        for s in per_slot[:boundary]:
            left = left.merge(s)
        for s in per_slot[boundary:]:
            right = right.merge(s)
        return [left, right]

    def _candidate(self, leaf, feature, boundary, v, dl, om) -> SplitCandidate:
        stats = self._branch_stats(leaf, feature, boundary)
        pooled = []
        for s, vj in zip(stats, v):
            mean, var = s.delta_loss_moments(float(vj))
            pooled.append((mean, var, s.n))
        return SplitCandidate(feature, boundary, [float(x) for x in v], float(dl), float(om), stats, pooled)

    def enumerate_candidates(self, leaf: Leaf) -> list[SplitCandidate]:
        """Every candidate for leaf: update-only, then features in order, boundaries ascending."""
        cands = []
        for f, G, H, v, dl, om in self._score(leaf):
            for i in range(len(dl)):
                boundary = None
                if f is not None and isinstance(self.features[f], NumericFeature):
                    boundary = i + 1
                cands.append(self._candidate(leaf, f, boundary, v[i], dl[i], om[i]))
        return cands

    def best_candidate(self, leaf: Leaf) -> SplitCandidate:
        best = None
        for f, G, H, v, dl, om in self._score(leaf):
            obj = dl + om
            i = int(np.argmin(obj))
            if best is None or obj[i] < best[0]:
                best = (obj[i], f, i, v[i], dl[i], om[i])
        _, f, i, v, dl, om = best
        boundary = i + 1 if f is not None and isinstance(self.features[f], NumericFeature) else None
        return self._candidate(leaf, f, boundary, v, dl, om)

    # -- structural updates ---------------------------------------------

    def try_split(self, leaf: Leaf, parent: Optional[Split] = None, branch: int = -1) -> str:
        """Test the best candidate for leaf and apply it if the loss reduction is significant."""
        self.n_attempts += 1
        if leaf.total.n < 2:
            return NO_CHANGE
        cand = self.best_candidate(leaf)
        mean, var, n = cand.loss_change_moments()
        cand.p_value = t_test_p(mean, var, n, self.config.two_sided)
        if cand.p_value < self.config.delta and mean < 0:
            return self._apply(leaf, cand, parent, branch)
        return NO_CHANGE

    def _apply(self, leaf: Leaf, cand: SplitCandidate, parent: Optional[Split], branch: int) -> str:
        if cand.feature is None:
            leaf.prediction += cand.leaf_values[0]
            leaf.reset()
            self.n_updates += 1
            return APPLIED_UPDATE
        children = [Leaf(leaf.prediction + v, self.binner.n_slots) for v in cand.leaf_values]
        node = Split(cand.feature, cand.boundary, leaf.prediction, children)
        if parent is None:
            self.root = node
        else:
            parent.children[branch] = node
        self.n_splits += 1
        return APPLIED_SPLIT

    # -- inspection -----------------------------------------------------

    def leaves(self) -> list[Leaf]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    @property
    def n_nodes(self) -> int:
        count, stack = 0, [self.root]
        while stack:
            node = stack.pop()
            count += 1
            if isinstance(node, Split):
                stack.extend(node.children)
        return count

    @property
    def depth(self) -> int:
        def walk(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(walk(c) for c in node.children)
        return walk(self.root)

    # -- serialization --------------------------------------------------

    def _node_to_dict(self, node) -> dict:
        if isinstance(node, Leaf):
            return {"kind": "leaf", "prediction": node.prediction}
        feat = self.features[node.feature]
        if node.boundary is None:
            split = {"type": "nominal"}
        else:
            split = {"type": "numeric", "boundary": node.boundary,
                     "threshold": feat.min + node.boundary * feat.width}
        return {
            "kind": "split",
            "feature": feat.name,
            "feature_index": node.feature,
            "split": split,
            "fallback": node.fallback,
            "children": [self._node_to_dict(c) for c in node.children],
        }

    def _node_from_dict(self, d: dict):
        if d["kind"] == "leaf":
            return Leaf(float(d["prediction"]), self.binner.n_slots)
        if d["kind"] != "split":
            raise ValueError(f"unknown node kind {d['kind']!r}")
        f = int(d["feature_index"])
        if self.features[f].name != d["feature"]:
            raise ValueError(f"feature index {f} does not match name {d['feature']!r}")
        boundary = d["split"].get("boundary") if d["split"]["type"] == "numeric" else None
        children = [self._node_from_dict(c) for c in d["children"]]
        expected = 2 if boundary is not None else self.features[f].size
        if len(children) != expected:
            raise ValueError(f"split on {d['feature']!r} has {len(children)} children, expected {expected}")
        return Split(f, boundary, float(d["fallback"]), children)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "config": asdict(self.config),
            "features": [feature_to_dict(f) for f in self.features],
            "root": self._node_to_dict(self.root),
        }

    @classmethod
    def from_dict(cls, d: dict) -> StochasticGradientTree:
        """Rebuild a tree from to_dict output. Leaves start with empty statistics."""
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {d.get('format_version')!r}")
        tree = cls([feature_from_dict(f) for f in d["features"]], SgtConfig(**d["config"]))
        tree.root = tree._node_from_dict(d["root"])
        return tree

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def loads(cls, s: str) -> StochasticGradientTree:
        return cls.from_dict(json.loads(s))


def feature_to_dict(f: FeatureMeta) -> dict:
    if isinstance(f, NominalFeature):
        d = {"name": f.name, "type": "nominal", "arity": f.arity}
        if f.values is not None:
            d["values"] = list(f.values)
        return d
    return {"name": f.name, "type": "numeric", "bins": f.bins, "min": f.min, "max": f.max}


def feature_from_dict(d: dict) -> FeatureMeta:
    if d["type"] == "nominal":
        values = tuple(d["values"]) if "values" in d else None
        return NominalFeature(d["name"], int(d["arity"]), values)
    if d["type"] == "numeric":
        return NumericFeature(d["name"], int(d["bins"]), d.get("min"), d.get("max"))
    raise ValueError(f"unknown feature type {d['type']!r}")
