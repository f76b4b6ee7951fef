"""Loss heads: map raw tree scores and labels to per-tree derivative pairs."""
from __future__ import annotations

import math

import numpy as np

from .ghstats import GradHessPair


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def softmax_probs(scores) -> np.ndarray:
    """Class probabilities for k-1 tree scores plus the implicit zero score of class k."""
    z = np.append(np.asarray(scores, dtype=float), 0.0)
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def cross_entropy_loss(scores, label: int) -> float:
    z = np.append(np.asarray(scores, dtype=float), 0.0)
    m = z.max()
    return float(m + math.log(np.exp(z - m).sum()) - z[label])


def cross_entropy_grad(scores, label: int) -> list[GradHessPair]:
    """Derivatives of categorical cross entropy for each of the k-1 trained trees."""
    p = softmax_probs(scores)
    out = []
    for c in range(len(p) - 1):
        y = 1.0 if c == label else 0.0
        out.append(GradHessPair(float(p[c] - y), float(p[c] * (1.0 - p[c]))))
    return out


def squared_error_loss(score: float, target: float) -> float:
    return 0.5 * (score - target) ** 2


def squared_error_grad(score: float, target: float) -> GradHessPair:
    return GradHessPair(score - target, 1.0)


def mil_bce_loss(bag_scores, label: int) -> float:
    z = max(bag_scores)
    # -log(sigmoid(z)) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
    t = -z if label else z
    return max(t, 0.0) + math.log1p(math.exp(-abs(t)))


def mil_bce_grad(bag_scores, label: int) -> tuple[int, GradHessPair]:
    """Derivatives of bag-level binary cross entropy under max pooling.

    Only the highest-scoring instance (lowest index on ties) has a non-zero
    derivative, so the result is that instance's index and its pair; every
    other instance's pair is exactly (0, 0).
    """
    if len(bag_scores) == 0:
        raise ValueError("empty bag")
    m = int(np.argmax(bag_scores))
    p = sigmoid(float(bag_scores[m]))
    return m, GradHessPair(p - label, p * (1.0 - p))


def predict_bag(bag_scores) -> float:
    if len(bag_scores) == 0:
        raise ValueError("empty bag")
    return sigmoid(float(max(bag_scores)))
