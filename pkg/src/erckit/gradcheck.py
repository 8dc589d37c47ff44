"""Finite-difference check of the full MDI forward pass."""
from __future__ import annotations

import numpy as np

from . import autograd as ag
from .model import DialogueBatch, MDIModel, ModelConfig


def random_batch(config: ModelConfig, n_utts: int, rng: np.random.Generator) -> DialogueBatch:
    feats = {m: rng.standard_normal((n_utts, config.modality_dim(m))) for m in config.modalities}
    speakers = ["A" if s else "B" for s in rng.integers(0, 2, n_utts)]
    gold = rng.integers(0, config.n_classes, n_utts)
    return DialogueBatch(feats, speakers, gold)


def mdi_gradcheck(n_utts: int = 5, hidden: int = 8, n_blocks: int = 2, n_heads: int = 2, seed: int = 0,
                  h: float = 1e-5, tol: float = 1e-4, **overrides) -> ag.GradCheckReport:
    """Gradcheck every MDI parameter on one random dialogue, dropout off."""
    cfg = ModelConfig(hidden=hidden, n_blocks=n_blocks, n_heads=n_heads, dropout=0.0,
                      dim_a=4, dim_v=3, dim_l=5, seed=seed, **overrides)
    model = MDIModel(cfg)
    rng = np.random.default_rng(seed + 1)
    # perturb the zero-initialised biases and norms so every path is exercised
    for p in model.parameters():
        p.data = p.data + 0.1 * rng.standard_normal(p.data.shape)
    batch = random_batch(cfg, n_utts, rng)

    def loss():
        return ag.cross_entropy(model.forward(batch, train=False), batch.gold)

    return ag.grad_check(loss, model.parameters(), h=h, tol=tol)
