"""Independent recount of the mini-corpus statistics, straight from the JSON lines.

Uses only the standard library and none of the package code. Writes the
expected integer counters per split to tests/golden/mini_stats.json.

    python scripts/oracle_stats.py
"""
import json
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
corpus_path = ROOT / "src" / "erckit" / "data" / "mini_corpus.jsonl"
split_path = ROOT / "src" / "erckit" / "data" / "mini_split.json"

records = [json.loads(line) for line in corpus_path.read_text(encoding="utf-8").splitlines() if line]
split = json.loads(split_path.read_text())
where = {s: name for name in ("train", "val", "test") for s in split[name]}


def count(recs):
    out = dict(n_dialogs=len(recs), n_utts=0, n_turns=0, x_turn_shift=0, x_turn_inertia=0,
               in_turn_shift=0, in_turn_inertia=0, blended=0)
    out["n_series"] = len({r["tv_series"] for r in recs})
    emo = {}
    for r in recs:
        utts = r["utterances"]
        out["n_utts"] += len(utts)
        for i, u in enumerate(utts):
            primary = u["final"][0]["label"]
            emo[primary] = emo.get(primary, 0) + 1
            if len(u["final"]) > 1:
                out["blended"] += 1
            if i == 0:
                out["n_turns"] += 1
                continue
            prev = utts[i - 1]
            same_label = prev["final"][0]["label"] == primary
            if prev["speaker"] != u["speaker"]:
                out["n_turns"] += 1
                out["x_turn_inertia" if same_label else "x_turn_shift"] += 1
            else:
                out["in_turn_inertia" if same_label else "in_turn_shift"] += 1
    out["emotion_distribution"] = dict(sorted(emo.items()))
    out["avg_turns_per_dialog"] = out["n_turns"] / out["n_dialogs"]
    out["avg_utts_per_turn"] = out["n_utts"] / out["n_turns"]
    out["avg_utts_per_dialog"] = out["n_utts"] / out["n_dialogs"]
    # mini-corpus text is pure Han characters, so length = character count
    out["avg_utt_length_tokens"] = sum(len(u["text"]) for r in recs for u in r["utterances"]) / out["n_utts"]
    durs = [max(u["end_ms"] for u in r["utterances"]) - min(u["start_ms"] for u in r["utterances"])
            for r in recs]
    out["avg_dur_per_dialog_s"] = sum(durs) / len(durs) / 1000.0
    people = {}
    for r in recs:
        for role, m in r["speaker_meta"].items():
            if any(u["speaker"] == role for u in r["utterances"]):
                people.setdefault((r["tv_series"], m["role_name"]), m)
    out["n_speakers"] = len(people)
    out["gender"], out["age"] = {}, {}
    for m in people.values():
        out["gender"][m["gender"]] = out["gender"].get(m["gender"], 0) + 1
        out["age"][m["age_band"]] = out["age"].get(m["age_band"], 0) + 1
    return out


expected = {name: count([r for r in records if where[r["tv_series"]] == name])
            for name in ("train", "val", "test")}
expected["total"] = count(records)
out = ROOT / "tests" / "golden" / "mini_stats.json"
out.parent.mkdir(exist_ok=True)
out.write_text(json.dumps(expected, indent=2, sort_keys=True) + "\n")
print(json.dumps(expected["total"], indent=2))
