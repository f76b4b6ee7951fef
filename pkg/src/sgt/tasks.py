"""Task heads built on stochastic gradient trees.

Streaming heads (classification, regression) estimate numeric feature ranges
from the first ``config.warmup`` instances, predicting with the empty model in
the meantime, then replay the buffered instances once the bins are frozen.
"""
from __future__ import annotations

import math
import random
from typing import Optional, Sequence

import numpy as np

from .discretize import FeatureMeta, RangeEstimator
from .losses import cross_entropy_grad, mil_bce_grad, predict_bag, softmax_probs, squared_error_grad
from .tree import SgtConfig, StochasticGradientTree


class _StreamHead:
    n_trees = 1

    def __init__(self, features: Sequence[FeatureMeta], config: Optional[SgtConfig] = None):
        self.config = config or SgtConfig()
        self.trees: list[StochasticGradientTree] = []
        self._warmup = RangeEstimator(features, self.config.warmup)
        if self._warmup.ready:
            self._finalize()

    @property
    def warming_up(self) -> bool:
        return not self._warmup.finalized

    def finish_warmup(self):
        """Freeze ranges now (e.g. the stream ended early) and replay the buffer."""
        if self.warming_up:
            self._finalize()

    def _finalize(self):
        features, buffer = self._warmup.finalize()
        self.trees = [StochasticGradientTree(features, self.config) for _ in range(self.n_trees)]
        for x, y in buffer:
            self._train(self.trees[0].encode(x), y)

    @property
    def features(self):
        return self.trees[0].features if self.trees else self._warmup.features

    def learn(self, x, y):
        self._check_label(y)
        if self.warming_up:
            self._warmup.absorb(x, y)
            if self._warmup.ready:
                self._finalize()
        else:
            self._train(self.trees[0].encode(x), y)

    def _check_label(self, y):
        pass

    def _train(self, codes, y):
        raise NotImplementedError

    @property
    def n_nodes(self) -> int:
        if not self.trees:
            return self.n_trees
        return sum(t.n_nodes for t in self.trees)


class SGTClassifier(_StreamHead):
    """Softmax committee of k-1 trees; class k's score is fixed at zero."""

    def __init__(self, features, n_classes: int, config: Optional[SgtConfig] = None):
        if n_classes < 2:
            raise ValueError("need at least two classes")
        self.n_classes = n_classes
        self.n_trees = n_classes - 1
        super().__init__(features, config)

    def _check_label(self, y):
        if not (isinstance(y, (int, np.integer)) and 0 <= y < self.n_classes):
            raise ValueError(f"class label {y!r} outside [0, {self.n_classes})")

    def scores(self, x) -> np.ndarray:
        if self.warming_up:
            return np.zeros(self.n_trees)
        codes = self.trees[0].encode(x, strict=False)
        return np.array([t.predict_encoded(codes) for t in self.trees])

    def predict_proba(self, x) -> np.ndarray:
        return softmax_probs(self.scores(x))

    def predict(self, x) -> int:
        return int(np.argmax(self.predict_proba(x)))

    def _train(self, codes, y):
        # all scores are read before any tree is updated
        scores = [t.predict_encoded(codes) for t in self.trees]
        for tree, gh in zip(self.trees, cross_entropy_grad(scores, y)):
            tree.update_encoded(codes, gh.g, gh.h)

    def classify_update(self, x, label: int) -> int:
        """Predict x, then train on (x, label)."""
        pred = self.predict(x)
        self.learn(x, label)
        return pred


class SGTRegressor(_StreamHead):
    """A single tree trained with squared error on raw targets."""

    def _check_label(self, y):
        if not math.isfinite(y):
            raise ValueError(f"non-finite regression target {y!r}")

    def predict(self, x) -> float:
        if self.warming_up:
            return 0.0
        return self.trees[0].predict(x)

    def _train(self, codes, y):
        tree = self.trees[0]
        gh = squared_error_grad(tree.predict_encoded(codes), float(y))
        tree.update_encoded(codes, gh.g, gh.h)

    def regress_update(self, x, target: float) -> float:
        pred = self.predict(x)
        self.learn(x, target)
        return pred


class MilTrainer:
    """Multi-pass training of one tree from bag-labelled data (max-pooled sigmoid).

    Each epoch visits the bags in a seeded random order and feeds the tree the
    derivative pair of the bag's highest-scoring instance only.
    """

    def __init__(self, features, config: Optional[SgtConfig] = None, epochs: int = 10, seed: int = 0):
        if epochs < 1:
            raise ValueError("epochs must be >= 1")
        self.features = list(features)
        self.config = config or SgtConfig()
        self.epochs = epochs
        self.seed = seed
        self.tree: Optional[StochasticGradientTree] = None

    def fit(self, bags: Sequence, labels: Sequence[int]) -> StochasticGradientTree:
        if len(bags) == 0:
            raise ValueError("no bags to train on")
        if len(bags) != len(labels):
            raise ValueError("bags and labels differ in length")
        bags = [np.atleast_2d(np.asarray(b, dtype=float)) for b in bags]
        for i, (b, y) in enumerate(zip(bags, labels)):
            if len(b) == 0:
                raise ValueError(f"bag {i} is empty")
            if y not in (0, 1):
                raise ValueError(f"bag {i} has non-binary label {y!r}")
        rng = random.Random(self.seed)
        order = list(range(len(bags)))
        rng.shuffle(order)

        est = RangeEstimator(self.features, self.config.warmup)
        for i in order:
            for x in bags[i]:
                if est.ready:
                    break
                est.absorb(x)
        features, _ = est.finalize()
        self.tree = tree = StochasticGradientTree(features, self.config)
        codes = [tree.encode(b) for b in bags]

        for epoch in range(self.epochs):
            if epoch:
                rng.shuffle(order)
            for i in order:
                scores = [tree.predict_encoded(c) for c in codes[i]]
                m, gh = mil_bce_grad(scores, labels[i])
                tree.update_encoded(codes[i][m], gh.g, gh.h)
        return tree

    def bag_scores(self, bag) -> list[float]:
        if self.tree is None:
            raise RuntimeError("fit() has not been called")
        bag = np.asarray(bag, dtype=float)
        if bag.size == 0:
            raise ValueError("empty bag")
        return [self.tree.predict(x) for x in np.atleast_2d(bag)]

    def predict_bag(self, bag) -> float:
        """Probability that the bag holds at least one positive instance."""
        return predict_bag(self.bag_scores(bag))
