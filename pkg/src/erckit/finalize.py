"""Majority-vote finalization of multi-label emotion annotations.

Each annotator lists labels in descending importance. Position ``p`` in a list is
worth ``7 - p`` points; an unlisted label is worth 0. A label is kept when at
least two annotators listed it, and its importance is the sum of its points
over all annotators.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence, Union

from .corpus import Corpus, EmotionLabel, FinalLabelSet, RawAnnotation
from .errors import AnnotationError

TOP_IMPORTANCE = 7
MIN_VOTES = 2


class ReviewReason(str, enum.Enum):
    NO_MAJORITY = "no_majority"
    LOW_DIALOGUE_AGREEMENT = "low_dialogue_agreement"


@dataclass(frozen=True)
class ReviewFlag:
    reason: ReviewReason


def importance_of_position(pos: int) -> int:
    if not 0 <= pos <= TOP_IMPORTANCE:
        raise AnnotationError(f"label position {pos} out of range 0..{TOP_IMPORTANCE}")
    return TOP_IMPORTANCE - pos


def finalize_utterance(annotations: Sequence[RawAnnotation]) -> Union[FinalLabelSet, ReviewFlag]:
    if not annotations:
        raise AnnotationError("no annotations to finalize")
    votes: dict[EmotionLabel, int] = {}
    importance: dict[EmotionLabel, int] = {}
    for ann in annotations:
        for pos, lab in enumerate(ann.labels):
            votes[lab] = votes.get(lab, 0) + 1
            importance[lab] = importance.get(lab, 0) + importance_of_position(pos)
    kept = [lab for lab, n in votes.items() if n >= MIN_VOTES]
    if not kept:
        return ReviewFlag(ReviewReason.NO_MAJORITY)
    kept.sort(key=lambda lab: (-importance[lab], int(lab)))
    return FinalLabelSet(tuple((lab, importance[lab]) for lab in kept))


def finalize_corpus(corpus: Corpus) -> tuple[Corpus, list[str]]:
    """Set ``final`` on every utterance that has a majority.

    Returns the updated corpus and the ids of utterances needing review. Flagged
    utterances keep whatever ``final`` they had before.
    """
    flagged = []
    dialogues = []
    for d in corpus:
        utts = []
        for u in d.utterances:
            if not u.annotations:
                raise AnnotationError(f"{u.utt_id}: utterance has no annotations")
            res = finalize_utterance(u.annotations)
            if isinstance(res, ReviewFlag):
                flagged.append(u.utt_id)
                utts.append(u)
            else:
                utts.append(replace(u, final=res))
        dialogues.append(d.with_utterances(utts))
    return Corpus(tuple(dialogues)), flagged
