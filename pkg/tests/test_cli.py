import json
from dataclasses import replace

import pytest

from erckit.cli import main, read_config_file, resolve_config, build_parser, UsageError
from erckit.corpus import Corpus, parse_corpus, write_corpus

from conftest import GOLDEN, MINI_CORPUS, MINI_SPLIT


def run(capsys, *argv):
    rc = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return rc, out, err


def test_no_args_is_usage_error(capsys):
    rc, _, err = run(capsys)
    assert rc == 1 and "usage" in err


def test_unknown_flag(capsys):
    rc, out, err = run(capsys, "stats", "--corpus", MINI_CORPUS, "--bogus")
    assert rc == 1 and out == "" and "unrecognized arguments" in err


def test_missing_file_is_usage_error(capsys, tmp_path):
    rc, _, err = run(capsys, "validate", "--corpus", tmp_path / "nope.jsonl")
    assert rc == 1 and "not found" in err


def test_malformed_corpus_is_data_error(capsys, tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"dialog_id": "d"\n')
    rc, _, err = run(capsys, "validate", "--corpus", p)
    assert rc == 2 and "data error" in err and ":1:" in err


def test_validate(capsys):
    rc, out, _ = run(capsys, "validate", "--corpus", MINI_CORPUS)
    assert rc == 0
    total = json.loads((GOLDEN / "mini_stats.json").read_text())["total"]
    assert out.splitlines() == [f"dialogues\t{total['n_dialogs']}", f"turns\t{total['n_turns']}",
                                f"utterances\t{total['n_utts']}", f"series\t{total['n_series']}", "annotators\t3"]


def test_stats_matches_golden(capsys, tmp_path):
    rc, out, _ = run(capsys, "stats", "--corpus", MINI_CORPUS, "--split", MINI_SPLIT, "--json", tmp_path / "s.json")
    assert rc == 0
    assert out == (GOLDEN / "mini_stats.txt").read_text(encoding="utf-8")
    assert set(json.loads((tmp_path / "s.json").read_text())) == {"train", "val", "test", "total"}


def test_finalize_kappa_split_pipeline(capsys, tmp_path, mini_corpus):
    raw = Corpus(tuple(d.with_utterances([replace(u, final=None) for u in d.utterances]) for d in mini_corpus))
    write_corpus(raw, tmp_path / "raw.jsonl")
    outputs = []
    for k in range(2):
        rc, _, _ = run(capsys, "finalize", "--corpus", tmp_path / "raw.jsonl", "--out", tmp_path / f"fin{k}.jsonl")
        assert rc == 0
        outputs.append((tmp_path / f"fin{k}.jsonl").read_bytes() + (tmp_path / f"fin{k}.jsonl.flagged.txt").read_bytes())
    assert outputs[0] == outputs[1]
    flagged = (tmp_path / "fin0.jsonl.flagged.txt").read_text().split()
    fin = parse_corpus(tmp_path / "fin0.jsonl")
    assert [u.utt_id for u in fin.utterances() if u.final is None] == flagged

    rc, out, _ = run(capsys, "kappa", "--corpus", MINI_CORPUS, "--report", tmp_path / "k.txt")
    assert rc == 0 and out.startswith("fleiss_kappa\t")
    assert (tmp_path / "k.txt").read_text().startswith("dialog_id")

    for k in range(2):
        assert run(capsys, "split", "--corpus", MINI_CORPUS, "--out", tmp_path / f"s{k}.json", "--seed", 5)[0] == 0
    assert (tmp_path / "s0.json").read_bytes() == (tmp_path / "s1.json").read_bytes()


def test_split_with_too_few_series_is_data_error(capsys, tmp_path, mini_corpus):
    write_corpus(Corpus(mini_corpus.dialogues[:1]), tmp_path / "one.jsonl")
    rc, _, err = run(capsys, "split", "--corpus", tmp_path / "one.jsonl", "--out", tmp_path / "s.json")
    assert rc == 2 and "at least 3" in err


def test_train_predict_eval(capsys, tmp_path):
    feats = tmp_path / "feats"
    assert run(capsys, "features", "synth", "--corpus", MINI_CORPUS, "--out-dir", feats, "--task", "context_free",
               "--dim", 4)[0] == 0
    rc, out, _ = run(capsys, "features", "inspect", "--file", feats / "l.m3ft")
    assert rc == 0 and out.startswith("modality\tl\ndim\t4\ncount\t108\n")

    (tmp_path / "cfg.txt").write_text("# tiny\nhidden = 8\nn_heads = 2\nn_blocks = 1\nepochs = 3\nlr = 0.01\n")
    common = ["--corpus", MINI_CORPUS, "--features", feats, "--split", MINI_SPLIT, "--config", tmp_path / "cfg.txt"]
    rc, out, _ = run(capsys, "train", *common, "--epochs", 2, "--out", tmp_path / "m.ckpt", "--log", tmp_path / "log.jsonl")
    assert rc == 0 and "test_wf1\t" in out
    assert len((tmp_path / "log.jsonl").read_text().splitlines()) == 2  # flag beats config file

    preds = []
    for k in range(2):
        rc, _, _ = run(capsys, "predict", "--checkpoint", tmp_path / "m.ckpt", "--corpus", MINI_CORPUS,
                       "--features", feats, "--split", MINI_SPLIT, "--out", tmp_path / f"p{k}.tsv")
        assert rc == 0
        preds.append((tmp_path / f"p{k}.tsv").read_bytes())
    assert preds[0] == preds[1]
    rc, out, _ = run(capsys, "eval", "--corpus", MINI_CORPUS, "--predictions", tmp_path / "p0.tsv",
                     "--split", MINI_SPLIT)
    assert rc == 0 and out.startswith("weighted F1: ")


def test_train_requires_split(capsys, tmp_path):
    run(capsys, "features", "synth", "--corpus", MINI_CORPUS, "--out-dir", tmp_path)
    rc, _, err = run(capsys, "train", "--corpus", MINI_CORPUS, "--features", tmp_path)
    assert rc == 1 and "--split" in err


def test_train_synthetic(capsys):
    rc, out, _ = run(capsys, "train", "--synthetic", "--n-dialogues", 12, "--n-series", 4, "--epochs", 1,
                     "--hidden", 8, "--n-heads", 2, "--n-blocks", 1)
    assert rc == 0 and out.startswith("model\tmdi\n")


def test_gradcheck_command(capsys):
    rc, out, _ = run(capsys, "gradcheck", "--n-utts", 3, "--n-blocks", 1)
    assert rc == 0 and out.rstrip().endswith("result\tPASS")


def test_config_file_errors(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("colour = red\n")
    with pytest.raises(UsageError, match="unknown config key"):
        read_config_file(p)
    p.write_text("epochs = many\n")
    with pytest.raises(UsageError, match="bad value"):
        read_config_file(p)


def test_every_config_field_is_a_flag(tmp_path):
    args = build_parser().parse_args(["train", "--streams", "global,inter", "--fuse-between-blocks", "yes",
                                      "--hidden", "auto", "--modalities", "l", "--seed", "9"])
    cfg = resolve_config(args)
    assert cfg.streams == ("global", "inter") and cfg.fuse_between_blocks and cfg.d_model == 384
    assert cfg.seed == 9


def test_invalid_model_config_is_usage_error(capsys):
    rc, _, err = run(capsys, "train", "--synthetic", "--hidden", 10, "--n-heads", 4)
    assert rc == 1 and "divisible" in err


@pytest.mark.slow
def test_demo(capsys, tmp_path):
    rc, out, _ = run(capsys, "demo", "--out-dir", tmp_path, "--n-dialogues", 30, "--epochs", 2)
    assert rc == 0 and "mdi_test_wf1" in out and "baseline_test_wf1" in out
    for name in ("corpus.jsonl", "corpus.final.jsonl", "split.json", "stats.txt", "mdi.ckpt", "features/a.m3ft"):
        assert (tmp_path / name).exists()
