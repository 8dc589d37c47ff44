"""Fleiss' kappa over annotators' first-choice labels."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .corpus import Corpus, EmotionLabel, Utterance
from .errors import AnnotationError, ZeroVarianceError

DEFAULT_THRESHOLD = 0.4


@dataclass(frozen=True)
class RatingMatrix:
    counts: np.ndarray  # items x categories, int64
    raters_per_item: int

    def __post_init__(self):
        if self.counts.ndim != 2:
            raise AnnotationError("rating matrix must be 2-D")
        if self.raters_per_item < 2:
            raise AnnotationError("need at least 2 raters per item")
        if len(self.counts) and not (self.counts.sum(axis=1) == self.raters_per_item).all():
            raise AnnotationError("every row must sum to raters_per_item")

    @property
    def n_items(self) -> int:
        return self.counts.shape[0]


def _n_categories(mode: str) -> int:
    if mode == "seven":
        return 7
    if mode == "eight":
        return 8
    raise ValueError(f"category_mode must be 'seven' or 'eight', got {mode!r}")


def build_rating_matrix(utterances: Iterable[Utterance], category_mode: str = "seven") -> RatingMatrix:
    """Tally each annotator's first label per utterance.

    In seven-class mode an utterance where any annotator's first label is
    ``other`` is dropped.
    """
    n_cat = _n_categories(category_mode)
    rows, n = [], None
    for u in utterances:
        if not u.annotations:
            raise AnnotationError(f"{u.utt_id}: no annotations")
        if n is None:
            n = len(u.annotations)
        elif len(u.annotations) != n:
            raise AnnotationError(f"{u.utt_id}: {len(u.annotations)} annotators, expected {n}")
        firsts = [a.labels[0] for a in u.annotations]
        if n_cat == 7 and EmotionLabel.OTHER in firsts:
            continue
        row = [0] * n_cat
        for lab in firsts:
            row[int(lab)] += 1
        rows.append(row)
    counts = np.array(rows, dtype=np.int64).reshape(len(rows), n_cat)
    return RatingMatrix(counts, n if n is not None else 2)


def fleiss_kappa(m: RatingMatrix) -> float:
    """kappa = (P_bar - P_e) / (1 - P_e).

    Numerators are accumulated in exact integer arithmetic, so the result only
    depends on the final divisions.
    """
    N, n = m.n_items, m.raters_per_item
    if N < 1:
        raise AnnotationError("fleiss_kappa needs at least one item")
    counts = [[int(c) for c in row] for row in m.counts]
    sq = 0
    for row in counts:
        for c in row:
            sq += c * c
    col = [0] * len(counts[0])
    for row in counts:
        for j, c in enumerate(row):
            col[j] += c
    total = N * n
    col_sq = 0
    for c in col:
        col_sq += c * c
    if col_sq == total * total:
        raise ZeroVarianceError("zero-variance ratings: all ratings fall into one category")
    p_bar = (sq - total) / (total * (n - 1))
    p_e = col_sq / (total * total)
    return (p_bar - p_e) / (1.0 - p_e)


@dataclass(frozen=True)
class DialogueAgreement:
    dialog_id: str
    kappa: Optional[float]  # None when not computable
    below_threshold: bool


def dialogue_agreement_report(corpus: Corpus, threshold: float = DEFAULT_THRESHOLD,
                              category_mode: str = "seven") -> list[DialogueAgreement]:
    out = []
    for d in corpus:
        m = build_rating_matrix(d.utterances, category_mode)
        kappa = None
        if m.n_items >= 2:
            try:
                kappa = fleiss_kappa(m)
            except ZeroVarianceError:
                pass
        out.append(DialogueAgreement(d.dialog_id, kappa, kappa is not None and kappa < threshold))
    return out


def format_agreement_report(rows: list[DialogueAgreement]) -> str:
    width = max([len("dialog_id")] + [len(r.dialog_id) for r in rows])
    lines = [f"{'dialog_id':<{width}}  {'kappa':>7}  flag"]
    for r in rows:
        k = "n/a" if r.kappa is None else f"{r.kappa:.4f}"
        lines.append(f"{r.dialog_id:<{width}}  {k:>7}  {'REVIEW' if r.below_threshold else '-'}")
    return "\n".join(lines) + "\n"
