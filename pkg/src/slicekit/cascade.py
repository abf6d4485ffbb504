"""Prediction cascades over nested-width subnets.

Items enter at the narrowest stage; an item survives stage k when the
stage's predicted class matches the item's class from stage k-1 (the
first stage keeps everything).  Because the subnets are prefixes of one
shared model, wider stages mostly confirm the narrow stages' calls, and
the per-stage precision on surviving items rises with width.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "CascadeStage",
    "StageMetrics",
    "stages_from_model",
    "stages_from_models",
    "cascade_evaluate",
    "error_set",
    "inclusion_coefficient",
]


@dataclass(frozen=True)
class CascadeStage:
    rate: float
    predict: Callable[[np.ndarray], np.ndarray]
    model: object = None  # kept when the stage wraps a model, for costing


def stages_from_model(model, rates: Sequence[float]) -> list[CascadeStage]:
    """Stages sharing one sliceable model, one per ascending rate."""
    rates = tuple(float(r) for r in rates)
    if list(rates) != sorted(rates):
        raise ConfigError(f"cascade rates must ascend, got {rates}")
    return [
        CascadeStage(r, (lambda r=r: lambda x: model.predict(x, r))(), model)
        for r in rates
    ]


def stages_from_models(models: Sequence, rates: Sequence[float]) -> list[CascadeStage]:
    """Stages backed by independent fixed-width models (the baseline setup)."""
    if len(models) != len(rates):
        raise ConfigError(f"{len(models)} models for {len(rates)} rates")
    rates = tuple(float(r) for r in rates)
    if list(rates) != sorted(rates):
        raise ConfigError(f"cascade rates must ascend, got {rates}")
    return [
        CascadeStage(r, (lambda m=m: lambda x: m.predict(x, 1.0))(), m)
        for m, r in zip(models, rates)
    ]


@dataclass(frozen=True)
class StageMetrics:
    stage: int            # 1-based
    rate: float
    survivors: int        # items still in play after this stage's check
    precision: float      # accuracy on items that reached this stage
    aggregate_recall: float  # fraction of all items correct at every stage so far
    accuracy: float       # plain accuracy of this stage on all items


def cascade_evaluate(stages: Sequence[CascadeStage], x: np.ndarray,
                     y: np.ndarray) -> list[StageMetrics]:
    """Run every stage over the full set and score the cascade.

    Aggregate recall counts items whose prediction was correct at every
    stage up to and including the current one, over all items — so it
    can only fall or hold as stages accumulate.
    """
    if not stages:
        raise ConfigError("cascade needs at least one stage")
    y = np.asarray(y).reshape(-1)
    n = len(y)
    if n == 0:
        raise DataError("cascade evaluation needs at least one item")
    rates = [s.rate for s in stages]
    if rates != sorted(rates):
        raise ConfigError(f"cascade rates must ascend, got {rates}")

    out = []
    reached = np.ones(n, dtype=bool)     # survived every check before this stage
    all_correct = np.ones(n, dtype=bool)
    prev_pred = None
    for k, stage in enumerate(stages, start=1):
        pred = np.asarray(stage.predict(x)).reshape(-1)
        if pred.shape != y.shape:
            raise DataError(f"stage {k} predicted {pred.shape}, labels are {y.shape}")
        correct = pred == y
        all_correct &= correct
        precision = float(correct[reached].mean()) if reached.any() else 1.0
        if prev_pred is not None:
            reached = reached & (pred == prev_pred)
        out.append(StageMetrics(
            stage=k,
            rate=stage.rate,
            survivors=int(reached.sum()),
            precision=precision,
            aggregate_recall=float(all_correct.mean()),
            accuracy=float(correct.mean()),
        ))
        prev_pred = pred
    return out


def error_set(pred: np.ndarray, y: np.ndarray) -> frozenset:
    """Indices the prediction gets wrong."""
    pred = np.asarray(pred).reshape(-1)
    y = np.asarray(y).reshape(-1)
    if pred.shape != y.shape:
        raise DataError(f"prediction shape {pred.shape} vs labels {y.shape}")
    return frozenset(np.nonzero(pred != y)[0].tolist())


def inclusion_coefficient(errors_large, errors_small) -> float:
    """|errors_large ∩ errors_small| / |errors_small|; empty small set gives 1.0.

    Near 1.0 means the wide net's mistakes are mostly a subset of the
    narrow net's — the wide stage loses almost nothing the narrow stage
    had right.
    """
    small = frozenset(errors_small)
    if not small:
        return 1.0
    return len(frozenset(errors_large) & small) / len(small)
