"""Random dyadic corpora for tests and the synthetic context tasks."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .corpus import (CLASS_LABELS, Corpus, Dialogue, EmotionLabel, FinalLabelSet, RawAnnotation,
                     SpeakerMeta, SpeakerRole, Utterance, group_into_turns)
from .finalize import ReviewFlag, finalize_utterance

_HANZI = "我你他她的是不了在人有这个上们来到时大地为子中说生国年着就那和要出也得里后自以会家可下而过天去能对小多然心学么之都好看起发当没成只如事把还用第样道想作种开美总从无情己面最女但现前些所同日手又行意动方期它头经长儿回位分爱老因很给名法间斯知世什两次使身者被高已亲其进此话常与活正感"
_WORDS = ("yes", "no", "really", "why", "fine", "what", "okay", "please", "leave", "now", "never",
          "again", "sorry", "thanks", "listen", "wait", "home", "tonight", "money", "mother")


def _text(rng, chinese: bool) -> str:
    if chinese:
        n = int(rng.integers(2, 14))
        return "".join(_HANZI[i] for i in rng.integers(0, len(_HANZI), n))
    n = int(rng.integers(1, 8))
    return " ".join(_WORDS[i] for i in rng.integers(0, len(_WORDS), n))


def _annotations(rng, label: EmotionLabel, n_annotators: int, noise: float, blend: float):
    anns = []
    for k in range(n_annotators):
        first = label if rng.random() >= noise else EmotionLabel(int(rng.integers(0, 8)))
        labels = [first]
        if rng.random() < blend:
            extra = EmotionLabel(int(rng.integers(0, 7)))
            if extra != first:
                labels.append(extra)
        anns.append(RawAnnotation(str(k), tuple(labels)))
    return tuple(anns)


def synth_corpus(n_dialogues: int = 200, utts_per_dialogue: int = 12, n_series: int = 20,
                 task: str = "context_dependent", seed: int = 0, n_annotators: int = 3,
                 max_turn_len: int = 3, annotation_noise: float = 0.0, blend: float = 0.0,
                 chinese: bool = False) -> Corpus:
    """A finalized synthetic corpus.

    Label schedules by ``task``:

    * ``context_dependent``: one label per turn, uniform over the 7 classes,
      except the opening turn which is always neutral;
    * ``context_free``: i.i.d. uniform labels per utterance;
    * ``random``: like ``context_free`` with a 50% chance of repeating the
      previous label (gives both shifts and inertia).

    With ``annotation_noise`` or ``blend`` > 0 annotators disagree or add a
    second label; utterances left without a majority get the first
    annotator's first label as the reviewed decision.
    """
    if task not in ("context_dependent", "context_free", "random"):
        raise ValueError(f"unknown task {task!r}")
    rng = np.random.default_rng(seed)
    genders = ("female", "male")
    ages = ("child", "young", "mid", "old")
    dialogues = []
    for i in range(n_dialogues):
        series = f"series{i % n_series:03d}"
        did = f"{series}_d{i:04d}"
        first = SpeakerRole.A
        meta = {}
        for role in SpeakerRole:
            r = int(rng.integers(0, 4))
            meta[role] = SpeakerMeta(genders[int(rng.integers(0, 2))], ages[int(rng.integers(0, 4))],
                                     f"{series}_role{r}")
        if meta[SpeakerRole.A].role_name == meta[SpeakerRole.B].role_name:
            meta[SpeakerRole.B] = replace(meta[SpeakerRole.B], role_name=meta[SpeakerRole.B].role_name + "b")
        speakers, turn_index = [], []
        role, t = first, 0
        while len(speakers) < utts_per_dialogue:
            run = int(rng.integers(1, max_turn_len + 1))
            for _ in range(min(run, utts_per_dialogue - len(speakers))):
                speakers.append(role)
                turn_index.append(t)
            role = SpeakerRole.B if role is SpeakerRole.A else SpeakerRole.A
            t += 1
        labels = []
        if task == "context_dependent":
            turn_labels = [EmotionLabel.NEUTRAL] + [CLASS_LABELS[int(j)] for j in rng.integers(0, 7, t)]
            labels = [turn_labels[k] for k in turn_index]
        else:
            for j in range(utts_per_dialogue):
                if task == "random" and labels and rng.random() < 0.5:
                    labels.append(labels[-1])
                else:
                    labels.append(CLASS_LABELS[int(rng.integers(0, 7))])
        utts = []
        clock = 0
        for j, (spk, lab) in enumerate(zip(speakers, labels)):
            dur = int(rng.integers(800, 4000))
            anns = _annotations(rng, lab, n_annotators, annotation_noise, blend)
            res = finalize_utterance(anns)
            if isinstance(res, ReviewFlag):
                res = FinalLabelSet(((anns[0].labels[0], 7),))
            utts.append(Utterance(f"{did}_u{j:02d}", spk, _text(rng, chinese), clock, clock + dur, anns, res))
            clock += dur + int(rng.integers(0, 600))
        dialogues.append(Dialogue(did, series, tuple(group_into_turns(utts)), meta))
    return Corpus(tuple(dialogues))
