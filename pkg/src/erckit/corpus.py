"""Dialogue corpus types and the line-delimited JSON interchange format.

One dialogue per line::

    {"dialog_id": "d1", "tv_series": "s1",
     "speaker_meta": {"A": {"gender": "female", "age_band": "young", "role_name": "Li"}},
     "utterances": [{"utt_id": "d1_0", "speaker": "A", "text": "...",
                     "start_ms": 0, "end_ms": 1200,
                     "annotations": [["anger", "sad"], ["anger"], ["sad"]],
                     "final": [{"label": "anger", "importance": 14}]}]}

Utterances are stored flat; turns are rebuilt on parse as maximal same-speaker runs.
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

from .errors import CorpusError

log = logging.getLogger(__name__)


class EmotionLabel(enum.IntEnum):
    NEUTRAL = 0
    HAPPY = 1
    SURPRISE = 2
    SAD = 3
    DISGUST = 4
    ANGER = 5
    FEAR = 6
    OTHER = 7

    @property
    def label_name(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, s: str) -> "EmotionLabel":
        if isinstance(s, str) and s == s.lower() and s.upper() in cls.__members__:
            return cls[s.upper()]
        raise CorpusError(f"unknown emotion label {s!r}")


# the 7-way classification space (everything but `other`)
CLASS_LABELS = tuple(EmotionLabel)[:7]
N_CLASSES = len(CLASS_LABELS)


class SpeakerRole(str, enum.Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class RawAnnotation:
    annotator_id: str
    labels: tuple[EmotionLabel, ...]

    def __post_init__(self):
        if not self.labels:
            raise CorpusError(f"annotator {self.annotator_id}: empty label list")
        if len(set(self.labels)) != len(self.labels):
            raise CorpusError(f"annotator {self.annotator_id}: duplicate labels {self.labels}")
        if len(self.labels) > len(EmotionLabel):
            raise CorpusError(f"annotator {self.annotator_id}: more than 8 labels")


@dataclass(frozen=True)
class FinalLabelSet:
    """Finalized labels with summed importance, most important first."""

    entries: tuple[tuple[EmotionLabel, int], ...]

    def __post_init__(self):
        if not self.entries:
            raise CorpusError("FinalLabelSet needs at least one entry")

    @property
    def primary(self) -> EmotionLabel:
        return self.entries[0][0]

    @property
    def labels(self) -> tuple[EmotionLabel, ...]:
        return tuple(lab for lab, _ in self.entries)

    @property
    def is_blended(self) -> bool:
        return len(self.entries) >= 2


@dataclass(frozen=True)
class Utterance:
    utt_id: str
    speaker: SpeakerRole
    text: str = ""
    start_ms: Optional[int] = None
    end_ms: Optional[int] = None
    annotations: tuple[RawAnnotation, ...] = ()
    final: Optional[FinalLabelSet] = None

    def __post_init__(self):
        if not self.utt_id:
            raise CorpusError("empty utt_id")
        if self.start_ms is not None and self.end_ms is not None and self.end_ms < self.start_ms:
            raise CorpusError(f"{self.utt_id}: end_ms {self.end_ms} < start_ms {self.start_ms}")

    @property
    def primary(self) -> Optional[EmotionLabel]:
        return None if self.final is None else self.final.primary


@dataclass(frozen=True)
class Turn:
    utterances: tuple[Utterance, ...]

    def __post_init__(self):
        if not self.utterances:
            raise CorpusError("empty turn")
        if len({u.speaker for u in self.utterances}) != 1:
            raise CorpusError("turn mixes speakers")

    @property
    def speaker(self) -> SpeakerRole:
        return self.utterances[0].speaker

    def __len__(self):
        return len(self.utterances)


@dataclass(frozen=True)
class SpeakerMeta:
    gender: Optional[str] = None
    age_band: Optional[str] = None
    role_name: Optional[str] = None


@dataclass(frozen=True)
class Dialogue:
    dialog_id: str
    tv_series: str
    turns: tuple[Turn, ...]
    speaker_meta: dict = field(default_factory=dict)  # SpeakerRole -> SpeakerMeta

    def __post_init__(self):
        if not self.dialog_id:
            raise CorpusError("empty dialog_id")
        if not self.tv_series:
            raise CorpusError(f"{self.dialog_id}: empty tv_series")
        if not self.turns:
            raise CorpusError(f"{self.dialog_id}: dialogue has no utterances")
        for a, b in zip(self.turns, self.turns[1:]):
            if a.speaker == b.speaker:
                raise CorpusError(f"{self.dialog_id}: adjacent turns share speaker {a.speaker.value}")

    @property
    def utterances(self) -> tuple[Utterance, ...]:
        return tuple(u for t in self.turns for u in t.utterances)

    def __len__(self):
        return sum(len(t) for t in self.turns)

    def with_utterances(self, utts: Sequence[Utterance]) -> "Dialogue":
        return Dialogue(self.dialog_id, self.tv_series, tuple(group_into_turns(utts)), self.speaker_meta)


@dataclass(frozen=True)
class Corpus:
    dialogues: tuple[Dialogue, ...] = ()

    def __post_init__(self):
        seen_d, seen_u = set(), set()
        k = None
        for d in self.dialogues:
            if d.dialog_id in seen_d:
                raise CorpusError(f"duplicate dialog_id {d.dialog_id!r}")
            seen_d.add(d.dialog_id)
            for u in d.utterances:
                if u.utt_id in seen_u:
                    raise CorpusError(f"duplicate utt_id {u.utt_id!r}")
                seen_u.add(u.utt_id)
                if u.annotations:
                    if k is None:
                        k = len(u.annotations)
                    elif len(u.annotations) != k:
                        raise CorpusError(
                            f"{u.utt_id}: {len(u.annotations)} annotators, corpus uses {k}")

    def __len__(self):
        return len(self.dialogues)

    def __iter__(self) -> Iterator[Dialogue]:
        return iter(self.dialogues)

    def utterances(self) -> Iterator[Utterance]:
        for d in self.dialogues:
            yield from d.utterances

    @property
    def annotator_count(self) -> Optional[int]:
        for u in self.utterances():
            if u.annotations:
                return len(u.annotations)
        return None

    @property
    def series(self) -> list[str]:
        return sorted({d.tv_series for d in self.dialogues})

    def subset(self, keep: Iterable[Dialogue]) -> "Corpus":
        return Corpus(tuple(keep))


def group_into_turns(utterances: Sequence[Utterance]) -> list[Turn]:
    """Group consecutive same-speaker utterances into turns."""
    turns, run = [], []
    for u in utterances:
        if run and u.speaker != run[-1].speaker:
            turns.append(Turn(tuple(run)))
            run = []
        run.append(u)
    if run:
        turns.append(Turn(tuple(run)))
    return turns


# -- reading ----------------------------------------------------------------

_DIALOGUE_KEYS = {"dialog_id", "tv_series", "speaker_meta", "utterances"}
_UTT_KEYS = {"utt_id", "speaker", "text", "start_ms", "end_ms", "annotations", "final"}
_META_KEYS = {"gender", "age_band", "role_name"}


def _warn_unknown(rec: dict, known: set, where: str):
    extra = sorted(set(rec) - known)
    if extra:
        log.warning("%s: ignoring unknown keys %s", where, extra)


def _speaker(s, where) -> SpeakerRole:
    try:
        return SpeakerRole(s)
    except ValueError:
        raise CorpusError(f"{where}: unknown speaker role {s!r}") from None


def _opt_int(v, name, where):
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise CorpusError(f"{where}: {name} must be an integer")
    return v


def _parse_utterance(rec: dict, where: str) -> Utterance:
    if not isinstance(rec, dict):
        raise CorpusError(f"{where}: utterance is not an object")
    _warn_unknown(rec, _UTT_KEYS, where)
    try:
        utt_id = rec["utt_id"]
        speaker = _speaker(rec["speaker"], where)
    except KeyError as e:
        raise CorpusError(f"{where}: missing key {e.args[0]!r}") from None
    if not isinstance(utt_id, str):
        raise CorpusError(f"{where}: utt_id must be a string")
    where = f"{where} ({utt_id})"
    anns = rec.get("annotations")
    annotations = ()
    if anns is not None:
        if not isinstance(anns, list) or len(anns) < 2:
            raise CorpusError(f"{where}: annotations must list at least 2 annotators")
        annotations = tuple(
            RawAnnotation(str(i), tuple(EmotionLabel.parse(s) for s in labs))
            for i, labs in enumerate(anns))
    final = None
    if rec.get("final") is not None:
        try:
            final = FinalLabelSet(tuple(
                (EmotionLabel.parse(e["label"]), int(e["importance"])) for e in rec["final"]))
        except (KeyError, TypeError) as e:
            raise CorpusError(f"{where}: malformed final entry ({e})") from None
    return Utterance(
        utt_id=utt_id,
        speaker=speaker,
        text=str(rec.get("text", "")),
        start_ms=_opt_int(rec.get("start_ms"), "start_ms", where),
        end_ms=_opt_int(rec.get("end_ms"), "end_ms", where),
        annotations=annotations,
        final=final,
    )


def parse_dialogue(rec: dict, where: str = "record") -> Dialogue:
    if not isinstance(rec, dict):
        raise CorpusError(f"{where}: record is not an object")
    _warn_unknown(rec, _DIALOGUE_KEYS, where)
    for key in ("dialog_id", "tv_series", "utterances"):
        if key not in rec:
            raise CorpusError(f"{where}: missing key {key!r}")
    meta = {}
    for role, m in (rec.get("speaker_meta") or {}).items():
        m = m or {}
        _warn_unknown(m, _META_KEYS, f"{where} speaker_meta[{role}]")
        meta[_speaker(role, where)] = SpeakerMeta(m.get("gender"), m.get("age_band"), m.get("role_name"))
    utts = [_parse_utterance(u, f"{where} utterance {i}") for i, u in enumerate(rec["utterances"])]
    starts = [u.start_ms for u in utts if u.start_ms is not None]
    if any(b < a for a, b in zip(starts, starts[1:])):
        log.warning("%s: non-monotone start timestamps in dialogue %s", where, rec["dialog_id"])
    return Dialogue(str(rec["dialog_id"]), str(rec["tv_series"]), tuple(group_into_turns(utts)), meta)


def parse_corpus_lines(lines: Iterable[str], source: str = "<corpus>") -> Corpus:
    dialogues = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        where = f"{source}:{lineno}"
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusError(f"{where}: malformed record ({e.msg})") from None
        try:
            dialogues.append(parse_dialogue(rec, where))
        except CorpusError as e:
            msg = str(e)
            raise CorpusError(msg if msg.startswith(where) else f"{where}: {msg}") from None
    return Corpus(tuple(dialogues))


def parse_corpus(path) -> Corpus:
    path = Path(path)
    with path.open(encoding="utf-8") as f:
        return parse_corpus_lines(f, str(path))


# -- writing ----------------------------------------------------------------

def utterance_record(u: Utterance) -> dict:
    rec = {"utt_id": u.utt_id, "speaker": u.speaker.value, "text": u.text}
    if u.start_ms is not None:
        rec["start_ms"] = u.start_ms
    if u.end_ms is not None:
        rec["end_ms"] = u.end_ms
    if u.annotations:
        rec["annotations"] = [[lab.label_name for lab in a.labels] for a in u.annotations]
    if u.final is not None:
        rec["final"] = [{"label": lab.label_name, "importance": imp} for lab, imp in u.final.entries]
    return rec


def dialogue_record(d: Dialogue) -> dict:
    meta = {}
    for role in SpeakerRole:
        if role in d.speaker_meta:
            m = d.speaker_meta[role]
            meta[role.value] = {k: v for k, v in
                                (("gender", m.gender), ("age_band", m.age_band), ("role_name", m.role_name))
                                if v is not None}
    return {
        "dialog_id": d.dialog_id,
        "tv_series": d.tv_series,
        "speaker_meta": meta,
        "utterances": [utterance_record(u) for u in d.utterances],
    }


def dumps_corpus(corpus: Corpus) -> str:
    return "".join(json.dumps(dialogue_record(d), ensure_ascii=False) + "\n" for d in corpus)


def write_corpus(corpus: Corpus, path) -> None:
    Path(path).write_text(dumps_corpus(corpus), encoding="utf-8")
