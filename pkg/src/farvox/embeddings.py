"""Speaker embeddings: baseline extractor, averaging, and the interchange format.

The interchange file decouples this toolkit from any external embedding
model: magic "SPKEMB01", u32 LE dim, u32 LE count, then per record a
u16 LE id byte-length, the UTF-8 id, and dim float32 LE values. Values
round-trip bit-exactly; nothing is normalized on write.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import AudioBuffer
from .errors import InterchangeError
from .features import MelConfig, log_mel

EMB_MAGIC = b"SPKEMB01"


@dataclass
class Embedding:
    utterance_id: str
    values: np.ndarray  # float32

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("embedding must be a non-empty vector")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"{self.utterance_id}: embedding has non-finite values")

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass
class EmbeddingSet:
    dim: int
    by_id: dict[str, Embedding] = field(default_factory=dict)

    def add(self, emb: Embedding) -> None:
        if emb.utterance_id in self.by_id:
            raise InterchangeError(f"duplicate utterance id {emb.utterance_id!r}")
        if emb.dim != self.dim:
            raise InterchangeError(
                f"{emb.utterance_id!r}: dim {emb.dim} does not match set dim {self.dim}"
            )
        self.by_id[emb.utterance_id] = emb

    @classmethod
    def from_embeddings(cls, embeddings) -> "EmbeddingSet":
        embeddings = list(embeddings)
        if not embeddings:
            return cls(dim=0)
        out = cls(dim=embeddings[0].dim)
        for emb in embeddings:
            out.add(emb)
        return out

    def ids(self):
        return list(self.by_id)

    def __len__(self):
        return len(self.by_id)

    def __contains__(self, utterance_id):
        return utterance_id in self.by_id

    def __getitem__(self, utterance_id) -> Embedding:
        return self.by_id[utterance_id]

    def __iter__(self):
        return iter(self.by_id.values())


@dataclass
class SpeakerModel:
    speaker_id: str
    centroid: Embedding


def baseline_embed(buffer: AudioBuffer, config: MelConfig = MelConfig()) -> Embedding:
    """Per-band mean and std of the log-mel matrix, concatenated (dim = 2*n_mels).

    Deterministic and invariant to any permutation of the frames, so it
    depends on spectral content but not on its ordering in time.
    """
    mel = log_mel(buffer, config).values
    vec = np.concatenate([mel.mean(axis=0), mel.std(axis=0)])
    return Embedding(buffer.source_id, vec)


def average_speaker(
    emb_set: EmbeddingSet, utterance_ids, speaker_id: str, l2_normalize: bool = False
) -> SpeakerModel:
    """Arithmetic mean of the named utterances' embeddings.

    With l2_normalize each embedding is scaled to unit norm before
    averaging (off by default; raw external vectors stay untouched).
    """
    ids = list(utterance_ids)
    if not ids:
        raise ValueError(f"{speaker_id}: no utterances to average")
    missing = [u for u in ids if u not in emb_set]
    if missing:
        raise InterchangeError(f"{speaker_id}: missing utterances {missing}")
    stack = np.stack([emb_set[u].values for u in ids]).astype(np.float64)
    if l2_normalize:
        norms = np.linalg.norm(stack, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            zero = ids[int(np.flatnonzero(norms[:, 0] == 0.0)[0])]
            raise InterchangeError(f"{speaker_id}: cannot normalize zero-norm {zero!r}")
        stack = stack / norms
    return SpeakerModel(speaker_id, Embedding(speaker_id, stack.mean(axis=0)))


def write_embeddings(emb_set: EmbeddingSet, path) -> None:
    parts = [EMB_MAGIC, struct.pack("<II", emb_set.dim, len(emb_set))]
    for emb in emb_set:
        ident = emb.utterance_id.encode("utf-8")
        if len(ident) > 0xFFFF:
            raise InterchangeError(f"utterance id too long ({len(ident)} bytes)")
        parts.append(struct.pack("<H", len(ident)))
        parts.append(ident)
        parts.append(emb.values.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_embeddings(path) -> EmbeddingSet:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != EMB_MAGIC:
        raise InterchangeError(f"{path}: bad magic")
    dim, count = struct.unpack_from("<II", raw, 8)
    if count > 0 and dim == 0:
        raise InterchangeError(f"{path}: zero dim with nonzero record count")
    out = EmbeddingSet(dim=dim)
    pos = 16
    for _ in range(count):
        if pos + 2 > len(raw):
            raise InterchangeError(f"{path}: truncated record header")
        (id_len,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        end = pos + id_len + 4 * dim
        if end > len(raw):
            raise InterchangeError(f"{path}: truncated record")
        try:
            ident = raw[pos : pos + id_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InterchangeError(f"{path}: invalid utterance id bytes") from exc
        values = np.frombuffer(raw, dtype="<f4", count=dim, offset=pos + id_len)
        if not np.all(np.isfinite(values)):
            raise InterchangeError(f"{path}: record {ident!r} has non-finite values")
        out.add(Embedding(ident, values.copy()))
        pos = end
    if pos != len(raw):
        raise InterchangeError(f"{path}: {len(raw) - pos} trailing bytes")
    return out


def read_exclusion_list(path) -> set[str]:
    """Utterance ids to drop, one per line; '#' starts a comment."""
    excluded = set()
    for line in Path(path).read_text().splitlines():
        entry = line.split("#", 1)[0].strip()
        if entry:
            excluded.add(entry)
    return excluded
