"""Training and prediction over corpus views and feature tables."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import autograd as ag
from .corpus import Corpus, EmotionLabel
from .errors import DataError, FeatureFormatError
from .metrics import weighted_f1
from .model import DialogueBatch, ModelConfig, UtteranceBaseline, build_model

log = logging.getLogger(__name__)


def dialogue_batches(corpus: Corpus, features: dict, config: ModelConfig,
                     require_labels: bool = True) -> tuple[list[DialogueBatch], int]:
    """One batch per dialogue, plus the number of `other`-primary utterances.

    Those utterances stay in the sequence as context but get gold -1 (ignored).
    """
    for m in config.modalities:
        if m not in features:
            raise FeatureFormatError(f"no feature table for modality {m!r}")
        if features[m].dim != config.modality_dim(m):
            raise FeatureFormatError(f"modality {m}: table dim {features[m].dim}, "
                                     f"config expects {config.modality_dim(m)}")
    batches, n_other = [], 0
    for d in corpus:
        utts = d.utterances
        ids = [u.utt_id for u in utts]
        gold = np.full(len(utts), -1, dtype=np.int64)
        for i, u in enumerate(utts):
            if u.final is None:
                if require_labels:
                    raise DataError(f"{u.utt_id}: utterance is not finalized")
                continue
            if u.final.primary is EmotionLabel.OTHER:
                n_other += 1
            else:
                gold[i] = int(u.final.primary)
        feats = {m: features[m].matrix(ids) for m in config.modalities}
        batches.append(DialogueBatch(feats, [u.speaker for u in utts], gold, ids))
    return batches, n_other


def evaluate(model, batches: list[DialogueBatch]) -> float:
    gold, pred = [], []
    for b in batches:
        keep = b.gold >= 0
        if keep.any():
            gold.append(b.gold[keep])
            pred.append(model.predict(b)[keep])
    if not gold:
        return float("nan")
    return weighted_f1(np.concatenate(gold), np.concatenate(pred))


def class_weights(batches: list[DialogueBatch], n_classes: int) -> np.ndarray:
    counts = np.bincount(np.concatenate([b.gold[b.gold >= 0] for b in batches]), minlength=n_classes)
    w = np.where(counts > 0, counts.sum() / np.maximum(counts, 1) / max((counts > 0).sum(), 1), 0.0)
    return w


@dataclass
class TrainResult:
    model: object
    history: list = field(default_factory=list)  # one dict per epoch
    best_epoch: int = 0
    best_val_wf1: float = float("nan")
    skipped_other: int = 0


def train(model, corpus: Corpus, features: dict, config: Optional[ModelConfig] = None,
          val_corpus: Optional[Corpus] = None, on_epoch: Optional[Callable[[dict], None]] = None) -> TrainResult:
    """Full-dialogue Adam training with early stopping on validation WF1.

    Without a validation corpus, early stopping watches training WF1. The best
    epoch's parameters are restored before returning.
    """
    config = config or model.config
    if config.lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {config.lr}")
    batches, n_other = dialogue_batches(corpus, features, model.config)
    if n_other:
        log.info("skipping %d utterances whose primary label is `other`", n_other)
    val_batches = dialogue_batches(val_corpus, features, model.config)[0] if val_corpus is not None else None
    weights = class_weights(batches, model.config.n_classes) if config.class_weighting else None
    params = model.parameters()
    rng = np.random.default_rng(config.seed)
    model.reseed_dropout(config.seed)
    result = TrainResult(model, skipped_other=n_other)
    best_state, best, stale, t = None, -np.inf, 0, 0
    for epoch in range(1, config.epochs + 1):
        ag.zero_grads(params)
        pending, losses = 0, []
        for idx in rng.permutation(len(batches)):
            b = batches[idx]
            if not (b.gold >= 0).any():
                continue
            with ag.recording():
                loss = ag.cross_entropy(model.forward(b, train=True), b.gold, weights)
            ag.backward(loss)
            losses.append(loss.item())
            pending += 1
            if pending == config.accumulate:
                t = _step(params, config, t, pending)
                pending = 0
        if pending:
            t = _step(params, config, t, pending)
        train_wf1 = evaluate(model, batches)
        val_wf1 = evaluate(model, val_batches) if val_batches is not None else train_wf1
        entry = {"epoch": epoch, "loss": float(np.mean(losses)) if losses else float("nan"),
                 "train_wf1": train_wf1, "val_wf1": val_wf1}
        result.history.append(entry)
        if on_epoch:
            on_epoch(entry)
        if val_wf1 > best:
            best, stale, result.best_epoch = val_wf1, 0, epoch
            best_state = [p.data.copy() for p in params]
        else:
            stale += 1
            if stale >= config.patience:
                break
    if best_state is not None:
        for p, data in zip(params, best_state):
            p.data = data
    result.best_val_wf1 = float(best)
    return result


def _step(params, config: ModelConfig, t: int, pending: int) -> int:
    if pending > 1:
        for p in params:
            p.grad = p.grad / pending
    if config.lr > 0:
        t += 1
        ag.adam_step(params, config.lr, t=t)
    ag.zero_grads(params)
    return t


def utterance_baseline_train(corpus: Corpus, features: dict, config: ModelConfig,
                             val_corpus: Optional[Corpus] = None, on_epoch=None) -> TrainResult:
    """Train the context-free baseline under the same contract as :func:`train`."""
    model = UtteranceBaseline(config)
    return train(model, corpus, features, config, val_corpus, on_epoch)


def fit(config: ModelConfig, corpus: Corpus, features: dict, val_corpus: Optional[Corpus] = None,
        on_epoch=None) -> TrainResult:
    return train(build_model(config), corpus, features, config, val_corpus, on_epoch)


def predict(model, corpus: Corpus, features: dict) -> dict:
    """utt_id -> predicted EmotionLabel, in corpus order."""
    batches, _ = dialogue_batches(corpus, features, model.config, require_labels=False)
    out = {}
    for b in batches:
        for utt_id, k in zip(b.utt_ids, model.predict(b)):
            out[utt_id] = EmotionLabel(int(k))
    return out


def write_predictions(preds: dict, path) -> None:
    Path(path).write_text("".join(f"{u}\t{lab.label_name}\n" for u, lab in preds.items()), encoding="utf-8")


def read_predictions(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'utt_id<TAB>label'")
        out[parts[0]] = EmotionLabel.parse(parts[1])
    return out


def gold_and_pred(corpus: Corpus, preds: dict) -> tuple[list, list]:
    """Aligned gold/pred codes for finalized, non-`other` utterances."""
    gold, pred = [], []
    for u in corpus.utterances():
        if u.final is None or u.final.primary is EmotionLabel.OTHER:
            continue
        if u.utt_id not in preds:
            raise DataError(f"no prediction for utterance {u.utt_id}")
        gold.append(int(u.final.primary))
        pred.append(int(preds[u.utt_id]))
    return gold, pred
