"""Multimodal dialogue-aware interaction model and an utterance-level baseline.

The MDI forward pass:

1. early fusion: concatenate the active modality vectors (order a, v, l),
   project to the hidden size, add sinusoidal positions;
2. four streams start from the fused sequence and each runs through L
   pre-norm transformer blocks whose self-attention uses a different mask
   (global, local window, intra-speaker, inter-speaker);
3. the stream outputs are summed and a single linear layer gives logits.

The streams are stacked on a leading axis, so one block is one batched pass.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from . import autograd as ag
from .autograd import Parameter, Tensor
from .corpus import N_CLASSES, SpeakerRole
from .errors import ShapeError

MODALITIES = ("a", "v", "l")
STREAMS = ("global", "local", "intra", "inter")


# -- masks ------------------------------------------------------------------

@dataclass(frozen=True)
class MaskKind:
    name: str  # one of STREAMS
    window: int = 1  # only used by "local"

    def __post_init__(self):
        if self.name not in STREAMS:
            raise ValueError(f"unknown mask kind {self.name!r}")
        if self.window < 1:
            raise ValueError("local window must be >= 1")


GLOBAL = MaskKind("global")
INTRA_SPEAKER = MaskKind("intra")
INTER_SPEAKER = MaskKind("inter")


def Local(window: int = 1) -> MaskKind:
    return MaskKind("local", window)


def build_mask(kind: MaskKind, speakers: Sequence) -> np.ndarray:
    """N x N boolean matrix; row = query utterance, column = key utterance."""
    n = len(speakers)
    if n == 0:
        raise ValueError("cannot build a mask for an empty dialogue")
    spk = np.array([SpeakerRole(s).value for s in speakers])
    same = spk[:, None] == spk[None, :]
    eye = np.eye(n, dtype=bool)
    if kind.name == "global":
        return np.ones((n, n), dtype=bool)
    if kind.name == "local":
        idx = np.arange(n)
        return np.abs(idx[:, None] - idx[None, :]) <= kind.window
    if kind.name == "intra":
        return same
    return ~same | eye  # inter-speaker keeps the query itself


def stream_masks(streams: Sequence[str], speakers: Sequence, window: int) -> np.ndarray:
    """Stacked (S, N, N) masks for the given stream names."""
    return np.stack([build_mask(MaskKind(s, window if s == "local" else 1), speakers) for s in streams])


def positional_encoding(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    div = np.exp(np.arange(0, d, 2) * (-math.log(10000.0) / d))
    pe = np.zeros((n, d))
    pe[:, 0::2] = np.sin(pos * div)
    pe[:, 1::2] = np.cos(pos * div[: d // 2])
    return pe


# -- config / batch ---------------------------------------------------------

@dataclass
class ModelConfig:
    n_blocks: int = 4
    hidden: Optional[int] = None  # None: 384 for one modality, 512 for several
    n_heads: int = 8
    local_window: int = 1
    dropout: float = 0.1
    dim_a: int = 16
    dim_v: int = 16
    dim_l: int = 16
    modalities: str = "avl"
    n_classes: int = N_CLASSES
    ff_mult: int = 4
    streams: tuple = STREAMS
    stream_param_sharing: str = "shared"  # or "separate"
    fuse_between_blocks: bool = False
    lr: float = 3e-5
    epochs: int = 200
    patience: int = 8
    accumulate: int = 1  # dialogues per optimizer step
    class_weighting: bool = False
    seed: int = 0
    model: str = "mdi"  # or "baseline"
    baseline_hidden: int = 64

    def __post_init__(self):
        self.streams = tuple(self.streams)
        self.modalities = "".join(m for m in MODALITIES if m in self.modalities)
        if not self.modalities:
            raise ValueError("at least one modality must be active")
        if any(s not in STREAMS for s in self.streams) or not self.streams:
            raise ValueError(f"streams must be a non-empty subset of {STREAMS}")
        if self.d_model % self.n_heads:
            raise ValueError(f"hidden size {self.d_model} not divisible by {self.n_heads} heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.stream_param_sharing not in ("shared", "separate"):
            raise ValueError("stream_param_sharing must be 'shared' or 'separate'")
        if self.model not in ("mdi", "baseline"):
            raise ValueError("model must be 'mdi' or 'baseline'")
        if self.local_window < 1:
            raise ValueError("local_window must be >= 1")

    @property
    def d_model(self) -> int:
        if self.hidden is not None:
            return self.hidden
        return 384 if len(self.modalities) == 1 else 512

    def modality_dim(self, m: str) -> int:
        return getattr(self, f"dim_{m}")

    @property
    def fused_width(self) -> int:
        return sum(self.modality_dim(m) for m in self.modalities)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["streams"] = list(self.streams)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in rec.items() if k in known})


@dataclass
class DialogueBatch:
    features: dict  # modality -> (N, d_m) array
    speakers: list
    gold: np.ndarray = field(default=None)  # (N,) class index, -1 = ignore
    utt_ids: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.speakers)
        for m, x in self.features.items():
            if np.asarray(x).shape[0] != n:
                raise ShapeError(f"modality {m}: {np.asarray(x).shape[0]} rows for {n} speakers")
        if self.gold is None:
            self.gold = np.full(n, -1, dtype=np.int64)
        elif len(self.gold) != n:
            raise ShapeError(f"{len(self.gold)} gold labels for {n} utterances")

    def __len__(self):
        return len(self.speakers)


# -- models -----------------------------------------------------------------

class _Model:
    config: ModelConfig

    def __init__(self):
        self._params: list[Parameter] = []

    def _param(self, name: str, data) -> Parameter:
        p = Parameter(name, data)
        self._params.append(p)
        return p

    def parameters(self) -> list[Parameter]:
        return list(self._params)

    def named_parameters(self) -> dict:
        return {p.name: p for p in self._params}

    def _check_batch(self, batch: DialogueBatch):
        for m in self.config.modalities:
            if m not in batch.features:
                raise ShapeError(f"batch lacks active modality {m!r}")
            x = np.asarray(batch.features[m])
            if x.ndim != 2 or x.shape[1] != self.config.modality_dim(m):
                raise ShapeError(f"modality {m}: feature dim {x.shape[-1]}, config expects "
                                 f"{self.config.modality_dim(m)}")

    def predict(self, batch: DialogueBatch) -> np.ndarray:
        return self.forward(batch, train=False).data.argmax(axis=-1)


class MDIModel(_Model):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = c = config
        rng = np.random.default_rng(c.seed)
        d, dff = c.d_model, c.d_model * c.ff_mult
        self.fuse_W = self._param("fusion.W", ag.xavier_uniform(rng, c.fused_width, d))
        self.fuse_b = self._param("fusion.b", np.zeros(d))
        n_sets = len(c.streams) if c.stream_param_sharing == "separate" else 1
        lead = (n_sets, 1) if c.stream_param_sharing == "separate" else ()
        wlead = (n_sets,) if c.stream_param_sharing == "separate" else ()
        self.blocks = []
        for i in range(c.n_blocks):
            def p(name, data, _i=i):
                return self._param(f"block{_i}.{name}", data)
            self.blocks.append({
                "ln1_g": p("ln1.g", np.ones(lead + (d,))),
                "ln1_b": p("ln1.b", np.zeros(lead + (d,))),
                "Wq": p("attn.Wq", ag.xavier_uniform(rng, d, d, wlead + (d, d))),
                "Wk": p("attn.Wk", ag.xavier_uniform(rng, d, d, wlead + (d, d))),
                "Wv": p("attn.Wv", ag.xavier_uniform(rng, d, d, wlead + (d, d))),
                "Wo": p("attn.Wo", ag.xavier_uniform(rng, d, d, wlead + (d, d))),
                "bo": p("attn.bo", np.zeros(lead + (d,))),
                "ln2_g": p("ln2.g", np.ones(lead + (d,))),
                "ln2_b": p("ln2.b", np.zeros(lead + (d,))),
                "W1": p("ff.W1", ag.xavier_uniform(rng, d, dff, wlead + (d, dff))),
                "b1": p("ff.b1", np.zeros(lead + (dff,))),
                "W2": p("ff.W2", ag.xavier_uniform(rng, dff, d, wlead + (dff, d))),
                "b2": p("ff.b2", np.zeros(lead + (d,))),
            })
        self.cls_W = self._param("classifier.W", ag.xavier_uniform(rng, d, c.n_classes))
        self.cls_b = self._param("classifier.b", np.zeros(c.n_classes))
        self._dropout_rng = ag.make_rng(c.seed)

    def reseed_dropout(self, seed: int):
        self._dropout_rng = ag.make_rng(seed)

    def fuse_modalities(self, batch: DialogueBatch, active: Optional[str] = None) -> Tensor:
        """(N, d) fused representation: concat(a, v, l) -> linear -> + positions."""
        active = self.config.modalities if active is None else active
        if not active:
            raise ValueError("no active modality")
        if "".join(m for m in MODALITIES if m in active) != self.config.modalities:
            raise ShapeError(f"modalities {active!r} do not match config {self.config.modalities!r}")
        self._check_batch(batch)
        x = ag.concat_last_dim([Tensor(batch.features[m]) for m in self.config.modalities])
        x = ag.linear(x, self.fuse_W, self.fuse_b)
        return ag.add(x, positional_encoding(len(batch), self.config.d_model))

    def _block(self, x: Tensor, masks: np.ndarray, prm: dict, train: bool) -> Tensor:
        c = self.config
        S, N, d = x.shape
        H = c.n_heads
        dh = d // H
        p = c.dropout if train else 0.0

        def heads(t):
            return ag.swapaxes(ag.reshape(t, (S, N, H, dh)), 1, 2)  # (S, H, N, dh)

        h = ag.layer_norm(x, prm["ln1_g"], prm["ln1_b"])
        q = heads(ag.linear(h, prm["Wq"]))
        k = heads(ag.linear(h, prm["Wk"]))
        v = heads(ag.linear(h, prm["Wv"]))
        scores = ag.scale(ag.matmul(q, ag.swapaxes(k, -1, -2)), 1.0 / math.sqrt(dh))
        att = ag.masked_softmax(scores, masks[:, None, :, :])
        ctx = ag.reshape(ag.swapaxes(ag.matmul(att, v), 1, 2), (S, N, d))
        a = ag.linear(ctx, prm["Wo"], prm["bo"])
        x = ag.add(x, ag.dropout(a, p, self._dropout_rng, train))
        h = ag.layer_norm(x, prm["ln2_g"], prm["ln2_b"])
        f = ag.linear(ag.relu(ag.linear(h, prm["W1"], prm["b1"])), prm["W2"], prm["b2"])
        return ag.add(x, ag.dropout(f, p, self._dropout_rng, train))

    def stream_outputs(self, batch: DialogueBatch, train: bool = False, n_blocks: Optional[int] = None) -> Tensor:
        """(S, N, d) per-stream outputs after ``n_blocks`` blocks (default all)."""
        c = self.config
        fused = self.fuse_modalities(batch)
        fused = ag.dropout(fused, c.dropout if train else 0.0, self._dropout_rng, train)
        S, N = len(c.streams), len(batch)
        masks = stream_masks(c.streams, batch.speakers, c.local_window)
        x = ag.expand(ag.reshape(fused, (1, N, c.d_model)), (S, N, c.d_model))
        blocks = self.blocks if n_blocks is None else self.blocks[:n_blocks]
        for i, prm in enumerate(blocks):
            x = self._block(x, masks, prm, train)
            if c.fuse_between_blocks and i < len(blocks) - 1:
                x = ag.expand(ag.sum(x, axis=0, keepdims=True), (S, N, c.d_model))
        return x

    def forward(self, batch: DialogueBatch, train: bool = False) -> Tensor:
        """(N, n_classes) logits."""
        streams = self.stream_outputs(batch, train)
        fused = ag.sum(streams, axis=0)
        return ag.linear(fused, self.cls_W, self.cls_b)


class UtteranceBaseline(_Model):
    """Per-modality feed-forward encoders, concat, one hidden layer, classifier.

    No dialogue context: each row is classified from its own features.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = c = config
        rng = np.random.default_rng(c.seed)
        h = c.baseline_hidden
        self.enc = {}
        for m in c.modalities:
            dm = c.modality_dim(m)
            self.enc[m] = (self._param(f"enc.{m}.W", ag.xavier_uniform(rng, dm, h)),
                           self._param(f"enc.{m}.b", np.zeros(h)))
        width = h * len(c.modalities)
        self.fuse_W = self._param("fusion.W", ag.xavier_uniform(rng, width, h))
        self.fuse_b = self._param("fusion.b", np.zeros(h))
        self.cls_W = self._param("classifier.W", ag.xavier_uniform(rng, h, c.n_classes))
        self.cls_b = self._param("classifier.b", np.zeros(c.n_classes))
        self._dropout_rng = ag.make_rng(c.seed)

    def reseed_dropout(self, seed: int):
        self._dropout_rng = ag.make_rng(seed)

    def forward(self, batch: DialogueBatch, train: bool = False) -> Tensor:
        self._check_batch(batch)
        p = self.config.dropout if train else 0.0
        encoded = [ag.relu(ag.linear(Tensor(batch.features[m]), W, b)) for m, (W, b) in self.enc.items()]
        x = ag.dropout(ag.concat_last_dim(encoded), p, self._dropout_rng, train)
        x = ag.dropout(ag.relu(ag.linear(x, self.fuse_W, self.fuse_b)), p, self._dropout_rng, train)
        return ag.linear(x, self.cls_W, self.cls_b)


def build_model(config: ModelConfig):
    return MDIModel(config) if config.model == "mdi" else UtteranceBaseline(config)
