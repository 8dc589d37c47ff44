"""Per-utterance feature tables and their binary file format.

One file per modality, little-endian::

    b"M3FT" | u32 version=1 | u8 modality (a=0, v=1, l=2) | u32 dim | u64 count
    count x ( u16 id_len | UTF-8 utt_id | dim x float32 )

Records are written sorted by utt_id so identical tables give identical bytes.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus, EmotionLabel
from .errors import FeatureFormatError

MAGIC = b"M3FT"
VERSION = 1
MODALITY_CODES = {"a": 0, "v": 1, "l": 2}
_HEADER = struct.Struct("<IBIQ")
SYNTH_TASKS = ("context_free", "context_dependent")


@dataclass
class FeatureTable:
    modality: str
    dim: int
    rows: dict = field(default_factory=dict)  # utt_id -> float32 vector

    def __post_init__(self):
        if self.modality not in MODALITY_CODES:
            raise FeatureFormatError(f"unknown modality {self.modality!r}")
        if self.dim < 1:
            raise FeatureFormatError("feature dim must be positive")
        fixed = {}
        for k, v in self.rows.items():
            v = np.asarray(v, dtype=np.float32)
            if v.shape != (self.dim,):
                raise FeatureFormatError(f"{k}: vector shape {v.shape}, table dim {self.dim}")
            fixed[k] = v
        self.rows = fixed

    def __len__(self):
        return len(self.rows)

    def __contains__(self, utt_id):
        return utt_id in self.rows

    def __eq__(self, other):
        return (isinstance(other, FeatureTable) and self.modality == other.modality
                and self.dim == other.dim and self.rows.keys() == other.rows.keys()
                and all(np.array_equal(v, other.rows[k]) for k, v in self.rows.items()))

    def matrix(self, utt_ids) -> np.ndarray:
        try:
            return np.stack([self.rows[u] for u in utt_ids]).astype(np.float64)
        except KeyError as e:
            raise FeatureFormatError(f"missing {self.modality} features for utterance {e.args[0]}") from None


def dumps_feature_table(table: FeatureTable) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(_HEADER.pack(VERSION, MODALITY_CODES[table.modality], table.dim, len(table.rows)))
    for utt_id in sorted(table.rows):
        raw = utt_id.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(table.rows[utt_id].astype("<f4").tobytes())
    return buf.getvalue()


def write_feature_file(table: FeatureTable, path) -> None:
    Path(path).write_bytes(dumps_feature_table(table))


def loads_feature_table(data: bytes, source: str = "<features>") -> FeatureTable:
    if data[:4] != MAGIC:
        raise FeatureFormatError(f"{source}: bad magic at byte 0")
    pos = 4
    if len(data) < pos + _HEADER.size:
        raise FeatureFormatError(f"{source}: truncated header at byte {pos}")
    version, code, dim, count = _HEADER.unpack_from(data, pos)
    if version != VERSION:
        raise FeatureFormatError(f"{source}: unsupported version {version}")
    modality = {v: k for k, v in MODALITY_CODES.items()}.get(code)
    if modality is None:
        raise FeatureFormatError(f"{source}: unknown modality code {code} at byte 8")
    pos += _HEADER.size
    rows = {}
    for _ in range(count):
        if pos + 2 > len(data):
            raise FeatureFormatError(f"{source}: truncated record at byte {pos}")
        (n,) = struct.unpack_from("<H", data, pos)
        end = pos + 2 + n + 4 * dim
        if end > len(data):
            raise FeatureFormatError(f"{source}: truncated record at byte {pos}")
        utt_id = data[pos + 2:pos + 2 + n].decode("utf-8")
        if utt_id in rows:
            raise FeatureFormatError(f"{source}: duplicate utt_id {utt_id!r} at byte {pos}")
        rows[utt_id] = np.frombuffer(data, dtype="<f4", count=dim, offset=pos + 2 + n).astype(np.float32)
        pos = end
    if pos != len(data):
        raise FeatureFormatError(f"{source}: {len(data) - pos} trailing bytes at byte {pos}")
    return FeatureTable(modality, dim, rows)


def read_feature_file(path) -> FeatureTable:
    path = Path(path)
    return loads_feature_table(path.read_bytes(), str(path))


def feature_path(directory, modality: str) -> Path:
    return Path(directory) / f"{modality}.m3ft"


def write_feature_dir(tables: dict, directory) -> None:
    Path(directory).mkdir(parents=True, exist_ok=True)
    for m, t in tables.items():
        write_feature_file(t, feature_path(directory, m))


def read_feature_dir(directory) -> dict:
    """All modality tables present in ``directory`` (``a.m3ft``, ``v.m3ft``, ``l.m3ft``)."""
    tables = {m: read_feature_file(feature_path(directory, m))
              for m in MODALITY_CODES if feature_path(directory, m).exists()}
    if not tables:
        raise FeatureFormatError(f"{directory}: no feature files found")
    return tables


def synth_features(corpus: Corpus, task: str, seed: int = 0, dim: int = 16,
                   noise: float = 0.1) -> dict:
    """Synthetic features with controlled information content.

    ``context_free``: every utterance carries a class codeword for its own
    primary label. ``context_dependent``: the last utterance of each turn carries
    the codeword of the next turn's (first) primary label, every other utterance
    carries no codeword; so an utterance's label can only be read off the
    previous utterance of the other speaker. Gaussian noise of std ``noise`` is
    added to every vector.
    """
    if task not in SYNTH_TASKS:
        raise ValueError(f"unknown synthetic task {task!r}; expected one of {SYNTH_TASKS}")
    rng = np.random.default_rng(seed)
    codebooks = {m: rng.standard_normal((len(EmotionLabel), dim)) for m in MODALITY_CODES}
    rows = {m: {} for m in MODALITY_CODES}
    for d in corpus:
        code_of = {}
        if task == "context_free":
            for u in d.utterances:
                code_of[u.utt_id] = _primary(u)
        else:
            for turn, nxt in zip(d.turns, d.turns[1:]):
                code_of[turn.utterances[-1].utt_id] = _primary(nxt.utterances[0])
        for u in d.utterances:
            for m in MODALITY_CODES:
                v = noise * rng.standard_normal(dim)
                if u.utt_id in code_of:
                    v = v + codebooks[m][code_of[u.utt_id]]
                rows[m][u.utt_id] = v
    return {m: FeatureTable(m, dim, rows[m]) for m in MODALITY_CODES}


def _primary(u) -> int:
    if u.final is None:
        raise FeatureFormatError(f"{u.utt_id}: utterance is not finalized")
    return int(u.final.primary)
