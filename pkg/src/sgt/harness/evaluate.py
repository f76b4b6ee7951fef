"""Prequential (test-then-train) evaluation and k-fold cross-validation for MIL."""
from __future__ import annotations

import csv
import logging
import random
import time
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from sklearn.model_selection import StratifiedKFold

from ..tasks import MilTrainer, SGTClassifier, SGTRegressor
from ..tree import SgtConfig

log = logging.getLogger(__name__)

RECORD_COLUMNS = ["instances_seen", "window_metric", "cumulative_metric", "nodes", "seconds"]


@dataclass
class EvalRecord:
    instances_seen: int
    windowed_metric: float
    cumulative_metric: float
    model_nodes: int
    elapsed_seconds: float


@dataclass
class PrequentialSummary:
    task: str
    instances: int
    cumulative_metric: float
    nodes: int
    seconds: float

    @property
    def metric_name(self) -> str:
        return "error_pct" if self.task == "classify" else "mae"


def shuffled(X, y, seed: int):
    """Seeded Fisher-Yates permutation of the rows."""
    perm = list(range(len(X)))
    random.Random(seed).shuffle(perm)
    return X[perm], y[perm]


def prequential(stream: Iterable, head, window: int = 10_000) -> tuple[list[EvalRecord], PrequentialSummary]:
    """Run test-then-train over (x, y) pairs.

    Classification reports error in percent, regression the mean absolute
    error. A record is emitted every ``window`` instances and once more for a
    trailing partial window.
    """
    if window < 1:
        raise ValueError("window must be positive")
    if isinstance(head, SGTClassifier):
        task = "classify"
    elif isinstance(head, SGTRegressor):
        task = "regress"
    else:
        raise TypeError(f"unsupported head {type(head).__name__}")
    records = []
    start = time.perf_counter()
    seen = 0
    total_loss = 0.0
    win_loss = 0.0
    win_n = 0
    for x, y in stream:
        if task == "classify":
            loss = float(head.classify_update(x, int(y)) != y)
        else:
            loss = abs(float(head.regress_update(x, float(y))) - float(y))
        seen += 1
        total_loss += loss
        win_loss += loss
        win_n += 1
        if win_n == window:
            records.append(_record(task, seen, win_loss / win_n, total_loss / seen, head, start))
            win_loss, win_n = 0.0, 0
    if win_n:
        records.append(_record(task, seen, win_loss / win_n, total_loss / seen, head, start))
    head.finish_warmup()
    scale = 100.0 if task == "classify" else 1.0
    summary = PrequentialSummary(task, seen, scale * total_loss / max(seen, 1), head.n_nodes,
                                 time.perf_counter() - start)
    return records, summary


def _record(task, seen, win, cum, head, start) -> EvalRecord:
    scale = 100.0 if task == "classify" else 1.0
    return EvalRecord(seen, scale * win, scale * cum, head.n_nodes, time.perf_counter() - start)


def write_records(records: list[EvalRecord], path, timing: bool = False) -> None:
    """Write the learning curve CSV. Without timing the seconds column is left blank,
    which keeps the file byte-identical across runs."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([r.instances_seen, repr(r.windowed_metric), repr(r.cumulative_metric),
                        r.model_nodes, repr(r.elapsed_seconds) if timing else ""])


def read_records(path) -> list[EvalRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != RECORD_COLUMNS:
            raise ValueError(f"unexpected records header {header}")
        return [EvalRecord(int(a), float(b), float(c), int(d), float(e) if e else float("nan"))
                for a, b, c, d, e in reader]


@dataclass
class FoldResult:
    fold: int
    n_test: int
    accuracy: float
    single_class: bool


@dataclass
class CVResult:
    folds: list[FoldResult]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([f.accuracy for f in self.folds]))


def fold_assignment(labels, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded, label-stratified test-index sets covering every bag exactly once."""
    if folds < 2:
        raise ValueError("need at least two folds")
    labels = np.asarray(labels)
    skf = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    return [test for _, test in skf.split(np.zeros(len(labels)), labels)]


def cross_validate_mil(features, bags, labels, folds: int = 10, seed: int = 0, epochs: int = 10,
                       config: Optional[SgtConfig] = None) -> CVResult:
    labels = np.asarray(labels)
    results = []
    for k, test in enumerate(fold_assignment(labels, folds, seed)):
        test_set = set(test.tolist())
        train = [i for i in range(len(bags)) if i not in test_set]
        trainer = MilTrainer(features, config, epochs=epochs, seed=seed + k)
        trainer.fit([bags[i] for i in train], [int(labels[i]) for i in train])
        correct = sum(int(trainer.predict_bag(bags[i]) > 0.5) == labels[i] for i in test)
        single = len(set(labels[test].tolist())) < 2
        if single:
            log.warning("fold %d: test bags contain a single class", k)
        results.append(FoldResult(k, len(test), 100.0 * correct / len(test), single))
    return CVResult(results)
