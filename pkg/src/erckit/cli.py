"""``erckit`` command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error (or a failed check).
Logs go to stderr; data goes to files or stdout.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .agreement import (DEFAULT_THRESHOLD, build_rating_matrix, dialogue_agreement_report,
                        fleiss_kappa, format_agreement_report)
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import Corpus, FinalLabelSet, parse_corpus, write_corpus
from .errors import DataError
from .features import (SYNTH_TASKS, loads_feature_table, read_feature_dir, synth_features,
                       write_feature_dir)
from .finalize import finalize_corpus
from .metrics import eval_report
from .model import ModelConfig, build_model
from .splitter import (DEFAULT_RATIOS, SPLIT_NAMES, apply_split, read_split, tv_independent_split,
                       write_split)
from .stats import compute_stats, format_report, per_split_stats

log = logging.getLogger("erckit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


# -- config handling --------------------------------------------------------

def _convert(f: dataclasses.Field, raw: str):
    name, typ = f.name, str(f.type)
    try:
        if name == "streams":
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if name == "hidden":
            return None if raw.lower() in ("", "none", "auto") else int(raw)
        if "bool" in typ:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in typ:
            return int(raw)
        if "float" in typ:
            return float(raw)
        return raw
    except ValueError:
        raise UsageError(f"bad value {raw!r} for {name}") from None


_FIELDS = {f.name: f for f in dataclasses.fields(ModelConfig)}


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = _convert(_FIELDS[key], val)
    return out


def resolve_config(args, **defaults) -> ModelConfig:
    values = dict(defaults)
    if args.config:
        values.update(read_config_file(args.config))
    for name, f in _FIELDS.items():
        raw = getattr(args, f"cfg_{name}", None)
        if raw is not None:
            values[name] = _convert(f, raw)
    values["seed"] = args.seed
    try:
        return ModelConfig(**values)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _add_model_flags(p):
    g = p.add_argument_group("model config overrides")
    for name in _FIELDS:
        if name == "seed":
            continue
        g.add_argument(f"--{name.replace('_', '-')}", dest=f"cfg_{name}", metavar="VALUE")


def _need_file(path, what):
    if path is None or not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")
    return Path(path)


def _need_dir(path, what):
    if path is None or not Path(path).is_dir():
        raise UsageError(f"{what} directory not found: {path}")
    return Path(path)


def _writable(path):
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise UsageError(f"output directory does not exist: {parent}")
    return Path(path)


def _out(text: str):
    sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------

def cmd_validate(args):
    corpus = parse_corpus(_need_file(args.corpus, "corpus"))
    n_utts = sum(len(d) for d in corpus)
    n_turns = sum(len(d.turns) for d in corpus)
    k = corpus.annotator_count
    _out(f"dialogues\t{len(corpus)}\nturns\t{n_turns}\nutterances\t{n_utts}\n"
         f"series\t{len(corpus.series)}\nannotators\t{k if k is not None else '-'}\n")


def cmd_finalize(args):
    corpus = parse_corpus(_need_file(args.corpus, "corpus"))
    out = _writable(args.out)
    flagged_path = _writable(args.flagged or f"{args.out}.flagged.txt")
    done, flagged = finalize_corpus(corpus)
    write_corpus(done, out)
    flagged_path.write_text("".join(f"{u}\n" for u in flagged), encoding="utf-8")
    log.info("finalized %d utterances, %d flagged for review", sum(len(d) for d in done) - len(flagged),
             len(flagged))


def cmd_kappa(args):
    corpus = parse_corpus(_need_file(args.corpus, "corpus"))
    report_path = _writable(args.report) if args.report else None
    m = build_rating_matrix(corpus.utterances(), args.category_mode)
    kappa = fleiss_kappa(m)
    rows = dialogue_agreement_report(corpus, args.threshold, args.category_mode)
    _out(f"fleiss_kappa\t{kappa:.4f}\nitems\t{m.n_items}\nraters\t{m.raters_per_item}\n"
         f"dialogues_flagged\t{sum(r.below_threshold for r in rows)}\n")
    table = format_agreement_report(rows)
    if report_path:
        report_path.write_text(table, encoding="utf-8")
    else:
        _out("\n" + table)


def cmd_stats(args):
    corpus = parse_corpus(_need_file(args.corpus, "corpus"))
    if args.split:
        reports = per_split_stats(corpus, read_split(_need_file(args.split, "split file")))
    else:
        reports = {"total": compute_stats(corpus)}
    if args.json:
        _writable(args.json).write_text(
            json.dumps({k: r.to_record() for k, r in reports.items()}, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8")
    _out(format_report(reports))


def _parse_ratios(raw):
    try:
        vals = tuple(float(x) for x in raw.split(","))
    except ValueError:
        raise UsageError(f"bad --ratios {raw!r}") from None
    if len(vals) != 3:
        raise UsageError("--ratios needs three comma-separated numbers")
    return vals


def cmd_split(args):
    corpus = parse_corpus(_need_file(args.corpus, "corpus"))
    out = _writable(args.out)
    split = tv_independent_split(corpus, _parse_ratios(args.ratios), args.seed)
    write_split(split, out)
    for name in SPLIT_NAMES:
        log.info("%s: %d series", name, len(split.series(name)))


def cmd_features(args):
    if args.action == "synth":
        corpus = parse_corpus(_need_file(args.corpus, "corpus"))
        if args.out_dir is None:
            raise UsageError("features synth needs --out-dir")
        tables = synth_features(corpus, args.task, args.seed, args.dim, args.noise)
        write_feature_dir(tables, args.out_dir)
        log.info("wrote %d tables to %s", len(tables), args.out_dir)
    else:
        path = _need_file(args.file, "feature file")
        t = loads_feature_table(path.read_bytes(), str(path))
        _out(f"modality\t{t.modality}\ndim\t{t.dim}\ncount\t{len(t)}\n")
        if len(t):
            mat = np.stack([t.rows[k] for k in sorted(t.rows)]).astype(np.float64)
            _out(f"mean_norm\t{np.linalg.norm(mat, axis=1).mean():.4f}\n")


def _synthetic_setup(args):
    from .synthetic import synth_corpus

    corpus = synth_corpus(args.n_dialogues, args.utts_per_dialogue, args.n_series, args.task, args.seed)
    features = synth_features(corpus, args.task, args.seed, args.dim, args.noise)
    split = tv_independent_split(corpus, (0.7, 0.1, 0.2), args.seed)
    return corpus, features, split


def _load_inputs(args):
    corpus = parse_corpus(_need_file(args.corpus, "corpus"))
    features = read_feature_dir(_need_dir(args.features, "features"))
    split = read_split(_need_file(args.split, "split file")) if getattr(args, "split", None) else None
    return corpus, features, split


def cmd_train(args):
    from .training import dialogue_batches, evaluate, train

    if args.synthetic:
        dims = {f"dim_{m}": args.dim for m in "avl"}
        cfg = resolve_config(args, hidden=32, n_heads=4, n_blocks=2, lr=1e-3, **dims)
        corpus, features, split = _synthetic_setup(args)
    else:
        corpus, features, split = _load_inputs(args)
        if split is None:
            raise UsageError("train needs --split (or --synthetic)")
        dims = {f"dim_{m}": features[m].dim for m in features}
        cfg = resolve_config(args, **dims)
    out = _writable(args.out) if args.out else None
    log_file = _writable(args.log).open("w", encoding="utf-8") if args.log else None
    parts = apply_split(corpus, split)

    def on_epoch(entry):
        log.info("epoch %3d  loss %.4f  train WF1 %.4f  val WF1 %.4f",
                 entry["epoch"], entry["loss"], entry["train_wf1"], entry["val_wf1"])
        if log_file:
            log_file.write(json.dumps(entry) + "\n")

    try:
        result = train(build_model(cfg), parts["train"], features, cfg, parts["val"], on_epoch)
    finally:
        if log_file:
            log_file.close()
    test_batches, _ = dialogue_batches(parts["test"], features, cfg)
    test_wf1 = evaluate(result.model, test_batches)
    _out(f"model\t{cfg.model}\nbest_epoch\t{result.best_epoch}\nval_wf1\t{result.best_val_wf1:.4f}\n"
         f"test_wf1\t{test_wf1:.4f}\nskipped_other\t{result.skipped_other}\n")
    if out:
        save_checkpoint(result.model, out)


def _restrict(corpus, args):
    if getattr(args, "split", None):
        split = read_split(_need_file(args.split, "split file"))
        return apply_split(corpus, split)[args.part]
    return corpus


def cmd_predict(args):
    from .training import predict, write_predictions

    ckpt = _need_file(args.checkpoint, "checkpoint")
    corpus = _restrict(parse_corpus(_need_file(args.corpus, "corpus")), args)
    features = read_feature_dir(_need_dir(args.features, "features"))
    out = _writable(args.out)
    model = load_checkpoint(ckpt)
    write_predictions(predict(model, corpus, features), out)


def cmd_eval(args):
    from .training import gold_and_pred, read_predictions

    corpus = _restrict(parse_corpus(_need_file(args.corpus, "corpus")), args)
    preds = read_predictions(_need_file(args.predictions, "predictions file"))
    gold, pred = gold_and_pred(corpus, preds)
    _out(eval_report(gold, pred).format())


def cmd_gradcheck(args):
    from .gradcheck import mdi_gradcheck

    report = mdi_gradcheck(n_utts=args.n_utts, hidden=args.hidden, n_blocks=args.n_blocks,
                           n_heads=args.n_heads, seed=args.seed, h=args.h, tol=args.tol)
    for name, err in report.max_rel_error.items():
        _out(f"{name}\t{err:.3e}\n")
    _out(f"worst\t{report.worst:.3e}\nresult\t{'PASS' if report.passed else 'FAIL'}\n")
    return 0 if report.passed else 2


def cmd_demo(args):
    from .synthetic import synth_corpus
    from .training import fit, gold_and_pred, predict, write_predictions

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw = synth_corpus(args.n_dialogues, 12, 10, "context_dependent", args.seed, annotation_noise=0.05)
    stripped = [d.with_utterances([dataclasses.replace(u, final=None) for u in d.utterances]) for d in raw]
    write_corpus(Corpus(tuple(stripped)), out / "corpus.jsonl")
    corpus, flagged = finalize_corpus(parse_corpus(out / "corpus.jsonl"))
    # flagged utterances get the first annotator's first label, standing in for manual review
    fixed = []
    for d in corpus:
        fixed.append(d.with_utterances([u if u.final else dataclasses.replace(
            u, final=FinalLabelSet(((u.annotations[0].labels[0], 7),))) for u in d.utterances]))
    corpus = Corpus(tuple(fixed))
    write_corpus(corpus, out / "corpus.final.jsonl")
    (out / "flagged.txt").write_text("".join(f"{u}\n" for u in flagged), encoding="utf-8")
    kappa = fleiss_kappa(build_rating_matrix(corpus.utterances()))
    split = tv_independent_split(corpus, (0.7, 0.1, 0.2), args.seed)
    write_split(split, out / "split.json")
    (out / "stats.txt").write_text(format_report(per_split_stats(corpus, split)), encoding="utf-8")
    features = synth_features(corpus, "context_dependent", args.seed)
    write_feature_dir(features, out / "features")
    parts = apply_split(corpus, split)
    lines = [f"utterances flagged\t{len(flagged)}", f"fleiss_kappa\t{kappa:.4f}"]
    for kind in ("mdi", "baseline"):
        cfg = ModelConfig(model=kind, hidden=32, n_heads=4, n_blocks=2, lr=1e-3, epochs=args.epochs,
                          seed=args.seed)
        res = fit(cfg, parts["train"], features, parts["val"])
        save_checkpoint(res.model, out / f"{kind}.ckpt")
        preds = predict(res.model, parts["test"], features)
        write_predictions(preds, out / f"{kind}.test.tsv")
        wf1 = eval_report(*gold_and_pred(parts["test"], preds)).weighted_f1
        lines.append(f"{kind}_test_wf1\t{wf1:.4f}")
    _out("\n".join(lines) + "\n")


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="key = value model config file")
    common.add_argument("--verbose", action="store_true")

    p = _Parser(prog="erckit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("validate", parents=[common], help="parse and validate a corpus file")
    s.add_argument("--corpus", required=True)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("finalize", parents=[common], help="majority-vote final labels")
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--flagged", help="flagged utt_id list (default: OUT.flagged.txt)")
    s.set_defaults(func=cmd_finalize)

    s = sub.add_parser("kappa", parents=[common], help="Fleiss' kappa, overall and per dialogue")
    s.add_argument("--corpus", required=True)
    s.add_argument("--report")
    s.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    s.add_argument("--category-mode", choices=("seven", "eight"), default="seven")
    s.set_defaults(func=cmd_kappa)

    s = sub.add_parser("stats", parents=[common], help="corpus statistics table")
    s.add_argument("--corpus", required=True)
    s.add_argument("--split")
    s.add_argument("--json")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("split", parents=[common], help="series-disjoint train/val/test split")
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--ratios", default=",".join(str(r) for r in DEFAULT_RATIOS))
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("features", parents=[common], help="synthesize or inspect feature files")
    s.add_argument("action", choices=("synth", "inspect"))
    s.add_argument("--corpus")
    s.add_argument("--out-dir")
    s.add_argument("--file")
    s.add_argument("--task", choices=SYNTH_TASKS, default="context_dependent")
    s.add_argument("--dim", type=int, default=16)
    s.add_argument("--noise", type=float, default=0.1)
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("train", parents=[common], help="train MDI or the utterance baseline")
    s.add_argument("--corpus")
    s.add_argument("--features")
    s.add_argument("--split")
    s.add_argument("--out", help="checkpoint path")
    s.add_argument("--log", help="JSON-lines training log")
    s.add_argument("--synthetic", action="store_true", help="generate corpus and features in memory")
    s.add_argument("--task", choices=SYNTH_TASKS, default="context_dependent")
    s.add_argument("--n-dialogues", type=int, default=200)
    s.add_argument("--utts-per-dialogue", type=int, default=12)
    s.add_argument("--n-series", type=int, default=20)
    s.add_argument("--dim", type=int, default=16)
    s.add_argument("--noise", type=float, default=0.1)
    _add_model_flags(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", parents=[common], help="predict labels with a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--split")
    s.add_argument("--part", choices=SPLIT_NAMES, default="test")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", parents=[common], help="weighted F1 and confusion matrix")
    s.add_argument("--corpus", required=True)
    s.add_argument("--predictions", required=True)
    s.add_argument("--split")
    s.add_argument("--part", choices=SPLIT_NAMES, default="test")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of the MDI model")
    s.add_argument("--n-utts", type=int, default=5)
    s.add_argument("--hidden", type=int, default=8)
    s.add_argument("--n-blocks", type=int, default=2)
    s.add_argument("--n-heads", type=int, default=2)
    s.add_argument("--h", type=float, default=1e-5)
    s.add_argument("--tol", type=float, default=1e-4)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("demo", parents=[common], help="end-to-end synthetic pipeline")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--n-dialogues", type=int, default=100)
    s.add_argument("--epochs", type=int, default=60)
    s.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        rc = args.func(args)
    except UsageError as e:
        sys.stderr.write(f"erckit {args.command}: error: {e}\n")
        return 1
    except DataError as e:
        sys.stderr.write(f"erckit {args.command}: data error: {e}\n")
        return 2
    return 0 if rc is None else rc


if __name__ == "__main__":
    sys.exit(main())
