"""Weighted F1 and confusion-matrix reports over the 7 emotion classes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CLASS_LABELS, N_CLASSES


def _codes(xs, name) -> np.ndarray:
    a = np.asarray([int(x) for x in xs], dtype=np.int64)
    if ((a < 0) | (a >= N_CLASSES)).any():
        raise ValueError(f"{name} contains labels outside the {N_CLASSES}-class space")
    return a


def confusion_matrix(gold, pred) -> np.ndarray:
    gold, pred = _codes(gold, "gold"), _codes(pred, "pred")
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(pred)} predictions")
    if len(gold) == 0:
        raise ValueError("empty input")
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(cm, (gold, pred), 1)
    return cm


def _per_class(cm: np.ndarray):
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    return precision, recall, f1, support


def weighted_f1(gold, pred) -> float:
    """Support-weighted mean of per-class F1 (zero-denominator F1 is 0)."""
    _, _, f1, support = _per_class(confusion_matrix(gold, pred))
    return float((f1 * support).sum() / support.sum())


@dataclass
class EvalReport:
    weighted_f1: float
    per_class: dict  # label name -> (precision, recall, f1, support)
    confusion: np.ndarray  # rows = gold, columns = predicted

    def format(self) -> str:
        names = [lab.label_name for lab in CLASS_LABELS]
        w = max(len(n) for n in names)
        lines = [f"weighted F1: {self.weighted_f1:.4f}", "",
                 f"{'class':<{w}}  precision  recall      f1  support"]
        for n in names:
            p, r, f, s = self.per_class[n]
            lines.append(f"{n:<{w}}  {p:9.4f}  {r:6.4f}  {f:6.4f}  {s:7d}")
        lines += ["", "confusion (rows = gold, columns = predicted)"]
        cw = max(w, max(len(str(v)) for v in self.confusion.flat))
        lines.append(" " * w + "  " + "  ".join(f"{n[:cw]:>{cw}}" for n in names))
        for n, row in zip(names, self.confusion):
            lines.append(f"{n:<{w}}  " + "  ".join(f"{v:>{cw}d}" for v in row))
        return "\n".join(lines) + "\n"


def eval_report(gold, pred) -> EvalReport:
    cm = confusion_matrix(gold, pred)
    p, r, f, s = _per_class(cm)
    per_class = {lab.label_name: (float(p[i]), float(r[i]), float(f[i]), int(s[i]))
                 for i, lab in enumerate(CLASS_LABELS)}
    wf1 = float((f * s).sum() / s.sum())
    return EvalReport(wf1, per_class, cm)
