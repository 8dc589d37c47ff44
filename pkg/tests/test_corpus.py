import itertools
import json
import logging

import pytest
from hypothesis import given
from hypothesis import strategies as st

from erckit.corpus import (Corpus, EmotionLabel, SpeakerRole, Utterance, dumps_corpus, group_into_turns,
                           parse_corpus, parse_corpus_lines)
from erckit.errors import CorpusError

from conftest import corpora


def _utt(i, spk):
    return Utterance(f"u{i}", SpeakerRole(spk))


def _line(utts, **extra):
    rec = {"dialog_id": "d1", "tv_series": "s1", "speaker_meta": {}, "utterances": utts}
    rec.update(extra)
    return json.dumps(rec)


def test_label_codes_are_stable():
    assert [lab.label_name for lab in EmotionLabel] == [
        "neutral", "happy", "surprise", "sad", "disgust", "anger", "fear", "other"]
    assert [int(lab) for lab in EmotionLabel] == list(range(8))


@pytest.mark.parametrize("spk, sizes", [
    ("ABAB", [1, 1, 1, 1]),
    ("AAA", [3]),
    ("AABBBA", [2, 3, 1]),
    ("", []),
])
def test_group_into_turns_examples(spk, sizes):
    turns = group_into_turns([_utt(i, s) for i, s in enumerate(spk)])
    assert [len(t) for t in turns] == sizes


@given(st.lists(st.sampled_from("AB"), max_size=30))
def test_group_into_turns_matches_run_length(spk):
    utts = [_utt(i, s) for i, s in enumerate(spk)]
    turns = group_into_turns(utts)
    assert [len(t) for t in turns] == [len(list(g)) for _, g in itertools.groupby(spk)]
    assert [u for t in turns for u in t.utterances] == utts
    assert all(a.speaker != b.speaker for a, b in zip(turns, turns[1:]))


def test_parse_groups_turns(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text(_line([{"utt_id": "a", "speaker": "A"}, {"utt_id": "b", "speaker": "A"},
                        {"utt_id": "c", "speaker": "B"}]) + "\n")
    corpus = parse_corpus(p)
    assert len(corpus) == 1
    assert [len(t) for t in corpus.dialogues[0].turns] == [2, 1]


def test_empty_file_gives_empty_corpus(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text("")
    assert parse_corpus(p) == Corpus()


def test_duplicate_utt_id_is_named():
    line = _line([{"utt_id": "dup", "speaker": "A"}, {"utt_id": "dup", "speaker": "B"}])
    with pytest.raises(CorpusError, match="dup"):
        parse_corpus_lines([line])


def test_duplicate_dialog_id():
    line = _line([{"utt_id": "x", "speaker": "A"}])
    line2 = _line([{"utt_id": "y", "speaker": "A"}])
    with pytest.raises(CorpusError, match="d1"):
        parse_corpus_lines([line, line2])


def test_malformed_record_reports_line():
    good = _line([{"utt_id": "x", "speaker": "A"}])
    with pytest.raises(CorpusError, match=":2:"):
        parse_corpus_lines([good, "{not json"], "f.jsonl")


def test_unknown_speaker_role():
    with pytest.raises(CorpusError, match="speaker role 'C'"):
        parse_corpus_lines([_line([{"utt_id": "x", "speaker": "C"}])])


def test_unknown_label():
    with pytest.raises(CorpusError, match="Anger"):
        parse_corpus_lines([_line([{"utt_id": "x", "speaker": "A", "annotations": [["Anger"], ["sad"]]}])])


def test_inconsistent_annotator_count():
    utts = [{"utt_id": "x", "speaker": "A", "annotations": [["sad"], ["sad"], ["sad"]]},
            {"utt_id": "y", "speaker": "B", "annotations": [["sad"], ["sad"]]}]
    with pytest.raises(CorpusError, match="annotators"):
        parse_corpus_lines([_line(utts)])


def test_single_annotator_rejected():
    with pytest.raises(CorpusError, match="at least 2"):
        parse_corpus_lines([_line([{"utt_id": "x", "speaker": "A", "annotations": [["sad"]]}])])


def test_end_before_start_rejected():
    with pytest.raises(CorpusError, match="end_ms"):
        parse_corpus_lines([_line([{"utt_id": "x", "speaker": "A", "start_ms": 10, "end_ms": 5}])])


def test_unknown_keys_and_timestamp_order_warn(caplog):
    utts = [{"utt_id": "x", "speaker": "A", "start_ms": 500, "end_ms": 600, "mood": 1},
            {"utt_id": "y", "speaker": "B", "start_ms": 100, "end_ms": 200}]
    with caplog.at_level(logging.WARNING):
        corpus = parse_corpus_lines([_line(utts, extra_field=True)])
    assert len(corpus) == 1
    text = caplog.text
    assert "extra_field" in text and "mood" in text and "non-monotone" in text


def test_any_first_speaker_accepted():
    corpus = parse_corpus_lines([_line([{"utt_id": "x", "speaker": "B"}, {"utt_id": "y", "speaker": "A"}])])
    assert corpus.dialogues[0].turns[0].speaker is SpeakerRole.B


@given(corpora(finalized=False))
def test_roundtrip_unfinalized(corpus):
    text = dumps_corpus(corpus)
    again = parse_corpus_lines(text.split("\n"))
    assert again == corpus
    assert dumps_corpus(again) == text


@given(corpora())
def test_roundtrip_finalized(corpus):
    text = dumps_corpus(corpus)
    assert parse_corpus_lines(text.split("\n")) == corpus


@given(corpora())
def test_turn_lengths_sum_to_utterances(corpus):
    for d in corpus:
        assert sum(len(t) for t in d.turns) == len(d.utterances)
        assert all(a.speaker != b.speaker for a, b in zip(d.turns, d.turns[1:]))


def test_file_roundtrip_keeps_unicode_line_separators(tmp_path):
    line = _line([{"utt_id": "x", "speaker": "A", "text": "a\u0085b\u2028c"}])
    p = tmp_path / "c.jsonl"
    p.write_text(dumps_corpus(parse_corpus_lines([line])), encoding="utf-8")
    assert parse_corpus(p).dialogues[0].utterances[0].text == "a\u0085b\u2028c"


def test_mini_corpus_roundtrips_bytes(mini_corpus):
    from conftest import MINI_CORPUS

    assert dumps_corpus(mini_corpus) == MINI_CORPUS.read_text(encoding="utf-8")
