"""JSON model files: one or more trees plus the task they were trained for."""
from __future__ import annotations

import json
from typing import Optional

from ..tree import FORMAT_VERSION, StochasticGradientTree


def model_to_dict(task: str, trees: list[StochasticGradientTree], classes: Optional[list] = None) -> dict:
    d = {"format_version": FORMAT_VERSION, "task": task, "trees": [t.to_dict() for t in trees]}
    if classes is not None:
        d["classes"] = list(classes)
    return d


def dumps_model(d: dict) -> str:
    return json.dumps(d, indent=1, sort_keys=True) + "\n"


def load_model(text: str) -> tuple[dict, list[StochasticGradientTree]]:
    d = json.loads(text)
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {d.get('format_version')!r}")
    if "trees" not in d:
        # a bare tree document
        return {"format_version": FORMAT_VERSION, "task": None}, [StochasticGradientTree.from_dict(d)]
    trees = [StochasticGradientTree.from_dict(t) for t in d["trees"]]
    return d, trees


def canonical(text: str) -> str:
    """Load a model and dump it again."""
    d, trees = load_model(text)
    if "trees" not in d:
        return trees[0].dumps() + "\n"
    return dumps_model(model_to_dict(d["task"], trees, d.get("classes")))
