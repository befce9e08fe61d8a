"""Per-state classification scores of a MAP state sequence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MetricsReport:
    states: list[str]
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    confusion: np.ndarray

    def _average(self, weights) -> dict:
        w = np.asarray(weights, dtype=float)
        w = w / w.sum() if w.sum() > 0 else np.full(w.size, 1.0 / w.size)
        return {m: float(getattr(self, m) @ w) for m in ("precision", "recall", "f1")}

    @property
    def macro(self) -> dict:
        return self._average(np.ones(len(self.states)))

    @property
    def weighted(self) -> dict:
        return self._average(self.support)

    def per_state(self) -> dict:
        return {name: {"precision": float(p), "recall": float(r), "f1": float(f), "support": int(s)}
                for name, p, r, f, s in zip(self.states, self.precision, self.recall, self.f1, self.support)}

    def to_dict(self) -> dict:
        return {"per_state": self.per_state(), "macro_average": self.macro,
                "weighted_average": self.weighted, "confusion": self.confusion.tolist()}

    def compare(self, reference: dict) -> dict:
        """Observed minus reported value for every state and metric present in both."""
        deltas = {}
        for name, row in self.per_state().items():
            ref = reference.get(name.lower())
            if ref is None:
                continue
            deltas[name] = {m: {"observed": row[m], "reported": v, "delta": row[m] - v}
                            for m, v in ref.items()}
        return deltas


def evaluate(predicted, truth, n_states: int, names=None) -> MetricsReport:
    """Score ``predicted`` against ``truth`` (per-step integer state labels)."""
    from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

    predicted = np.asarray(predicted, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if predicted.shape != truth.shape:
        raise ValueError(f"predicted has {predicted.size} steps, labels have {truth.size}")
    labels = np.arange(n_states)
    p, r, f, s = precision_recall_fscore_support(truth, predicted, labels=labels, zero_division=0)
    conf = confusion_matrix(truth, predicted, labels=labels)
    names = list(names) if names is not None else [f"s{i}" for i in labels]
    return MetricsReport(names, p, r, f, s, conf)
