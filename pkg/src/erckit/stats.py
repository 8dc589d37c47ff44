"""Corpus statistics with per-split breakdowns and an aligned text report."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Optional

from .corpus import Corpus, Dialogue, EmotionLabel
from .errors import CorpusError
from .splitter import apply_split

# CJK ideographs count one token each; other text is split on whitespace.
_CJK = "\u3400-\u4dbf\u4e00-\u9fff\uf900-\ufaff\U00020000-\U0002fa1f"
_TOKEN_RE = re.compile(f"[{_CJK}]|[^\\s{_CJK}]+")


def utterance_length(text: str) -> int:
    return len(_TOKEN_RE.findall(text))


@dataclass
class StatsReport:
    n_series: int = 0
    n_dialogs: int = 0
    n_turns: int = 0
    n_utts: int = 0
    n_speakers: int = 0
    avg_turns_per_dialog: Optional[float] = None
    avg_utts_per_turn: Optional[float] = None
    avg_utts_per_dialog: Optional[float] = None
    avg_utt_length_tokens: Optional[float] = None
    avg_dur_per_dialog_s: Optional[float] = None
    x_turn_shift: int = 0
    x_turn_inertia: int = 0
    in_turn_shift: int = 0
    in_turn_inertia: int = 0
    blended: int = 0
    emotion_distribution: dict = field(default_factory=dict)  # label name -> count
    gender: dict = field(default_factory=dict)
    age: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return asdict(self)

    # integer fields that add up across a partition of the corpus
    ADDITIVE = ("n_series", "n_dialogs", "n_turns", "n_utts", "x_turn_shift", "x_turn_inertia",
                "in_turn_shift", "in_turn_inertia", "blended")


def _speaker_key(d: Dialogue, role) -> tuple:
    meta = d.speaker_meta.get(role)
    if meta is not None and meta.role_name:
        return ("series", d.tv_series, meta.role_name)
    return ("dialog", d.dialog_id, role.value)


def _primary(u):
    if u.final is None:
        raise CorpusError(f"{u.utt_id}: utterance is not finalized")
    return u.final.primary


def compute_stats(corpus: Corpus) -> StatsReport:
    r = StatsReport()
    emo = Counter()
    speakers = {}
    n_tokens = 0
    durations = []
    for d in corpus:
        r.n_dialogs += 1
        r.n_turns += len(d.turns)
        prev_last = None
        for turn in d.turns:
            labels = [_primary(u) for u in turn.utterances]
            if prev_last is not None:
                if labels[0] == prev_last:
                    r.x_turn_inertia += 1
                else:
                    r.x_turn_shift += 1
            for a, b in zip(labels, labels[1:]):
                if a == b:
                    r.in_turn_inertia += 1
                else:
                    r.in_turn_shift += 1
            prev_last = labels[-1]
        utts = d.utterances
        for u in utts:
            r.n_utts += 1
            emo[u.final.primary] += 1
            r.blended += u.final.is_blended
            n_tokens += utterance_length(u.text)
            key = _speaker_key(d, u.speaker)
            if key not in speakers:
                speakers[key] = d.speaker_meta.get(u.speaker)
        if all(u.start_ms is not None and u.end_ms is not None for u in utts):
            durations.append(max(u.end_ms for u in utts) - min(u.start_ms for u in utts))
    r.n_series = len({d.tv_series for d in corpus})
    r.n_speakers = len(speakers)
    if r.n_dialogs:
        r.avg_turns_per_dialog = r.n_turns / r.n_dialogs
        r.avg_utts_per_dialog = r.n_utts / r.n_dialogs
        r.avg_utts_per_turn = r.n_utts / r.n_turns
        r.avg_utt_length_tokens = n_tokens / r.n_utts
    if durations:
        r.avg_dur_per_dialog_s = sum(durations) / len(durations) / 1000.0
    r.emotion_distribution = {lab.label_name: emo[lab] for lab in EmotionLabel}
    gender, age = Counter(), Counter()
    for meta in speakers.values():
        gender[(meta.gender if meta and meta.gender else "unknown")] += 1
        age[(meta.age_band if meta and meta.age_band else "unknown")] += 1
    r.gender = dict(sorted(gender.items()))
    r.age = dict(sorted(age.items()))
    return r


def per_split_stats(corpus: Corpus, split) -> dict[str, StatsReport]:
    """Reports for train/val/test plus ``total`` over the whole corpus."""
    parts = apply_split(corpus, split)
    out = {name: compute_stats(part) for name, part in parts.items()}
    out["total"] = compute_stats(corpus)
    return out


_ROWS = [
    ("# TV series", "n_series"),
    ("# dialogs", "n_dialogs"),
    ("# turns", "n_turns"),
    ("# utts", "n_utts"),
    ("# spkrs", "n_speakers"),
    ("Avg. turns/dialog", "avg_turns_per_dialog"),
    ("Avg. utts/turns", "avg_utts_per_turn"),
    ("Avg. utts/dialog", "avg_utts_per_dialog"),
    ("Avg. utt length", "avg_utt_length_tokens"),
    ("Avg. dur/dialog", "avg_dur_per_dialog_s"),
    ("# x-turn emo-shift", "x_turn_shift"),
    ("# x-turn emo-inertia", "x_turn_inertia"),
    ("# in-turn emo-shift", "in_turn_shift"),
    ("# in-turn emo-inertia", "in_turn_inertia"),
    ("# blended emos", "blended"),
]


def _cell(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.2f}"
    return str(v)


def format_report(reports: dict[str, StatsReport]) -> str:
    """Aligned text table, one column per report, in dict order."""
    names = list(reports)
    rows = [["Statistics"] + [n.capitalize() for n in names]]
    for title, attr in _ROWS:
        rows.append([title] + [_cell(getattr(reports[n], attr)) for n in names])
    for lab in EmotionLabel:
        counts = [reports[n].emotion_distribution.get(lab.label_name, 0) for n in names]
        if lab is EmotionLabel.OTHER and not any(counts):
            continue
        rows.append([lab.label_name] + [str(c) for c in counts])
    for title, attr in (("gender", "gender"), ("age", "age")):
        keys = sorted({k for n in names for k in getattr(reports[n], attr)})
        for k in keys:
            rows.append([f"{title}: {k}"] + [str(getattr(reports[n], attr).get(k, 0)) for n in names])
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"
