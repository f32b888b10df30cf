"""Embedding backbones and the EMB1 interchange format.

Real classifier backbones (the networks normally used for Fréchet-style
audio metrics) are deliberately not run in-process: their embeddings and
logits enter through EMB1 files produced by external extractors.  The
built-in `melstats` provider is a deterministic, desk-scale stand-in that
turns a log-mel matrix into summary statistics plus band-energy logits.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, InvariantError
from .mel import MelSpectrogram


class BackboneError(DataError):
    pass


class EmbeddingFormatError(DataError):
    """Malformed EMB1 file."""


_EMB1_MAGIC = b"EMB1"


@dataclass(eq=False)
class EmbeddingSet:
    """N x D embeddings with optional N x C pre-softmax logits."""

    embeddings: np.ndarray
    logits: np.ndarray | None
    ids: list[str]
    backbone_name: str = ""

    def __post_init__(self):
        self.embeddings = np.ascontiguousarray(self.embeddings, dtype=np.float32)
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] < 1:
            raise InvariantError("embeddings must be a non-empty N x D matrix")
        if not np.all(np.isfinite(self.embeddings)):
            raise InvariantError("embeddings contain non-finite values")
        n = self.embeddings.shape[0]
        if self.logits is not None:
            self.logits = np.ascontiguousarray(self.logits, dtype=np.float32)
            if self.logits.ndim != 2 or self.logits.shape[0] != n:
                raise InvariantError("logits must pair one row per embedding row")
            if self.logits.shape[1] < 2:
                raise InvariantError("logits need at least 2 classes")
            if not np.all(np.isfinite(self.logits)):
                raise InvariantError("logits contain non-finite values")
        self.ids = [str(i) for i in self.ids]
        if len(self.ids) != n:
            raise InvariantError(f"{len(self.ids)} ids for {n} rows")
        if len(set(self.ids)) != n:
            raise InvariantError("ids must be unique within a set")

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def n_classes(self) -> int:
        return 0 if self.logits is None else self.logits.shape[1]


class BackboneProvider:
    """Maps mel spectrograms to (embedding, logits) rows, deterministically."""

    name: str = ""
    dim: int = 0
    n_classes: int = 0

    def embed(self, mel: MelSpectrogram) -> tuple[np.ndarray, np.ndarray | None]:
        raise NotImplementedError


def melstats_embed(mel: MelSpectrogram) -> tuple[np.ndarray, np.ndarray]:
    """Summary-statistics embedding of a log-mel matrix.

    The embedding concatenates four per-band vectors, in band order within
    each block: temporal mean, temporal standard deviation, temporal
    delta-mean (mean of first differences along time), and the band's share
    of total linear power.  Logits are the energy shares scaled by a fixed
    temperature of 10, giving one class per band.
    """
    v = mel.values
    mean = v.mean(axis=0)
    std = v.std(axis=0)
    if v.shape[0] > 1:
        delta = np.diff(v, axis=0).mean(axis=0)
    else:
        delta = np.zeros(v.shape[1])
    power = np.exp(v).sum(axis=0)
    share = power / power.sum()
    embedding = np.concatenate([mean, std, delta, share]).astype(np.float32)
    logits = (10.0 * share).astype(np.float32)
    return embedding, logits


class MelStatsProvider(BackboneProvider):
    """Built-in desk-scale backbone over melstats_embed."""

    def __init__(self, n_mels: int = 64):
        self.n_mels = n_mels
        self.name = "melstats"
        self.dim = 4 * n_mels
        self.n_classes = n_mels

    def embed(self, mel: MelSpectrogram) -> tuple[np.ndarray, np.ndarray]:
        if mel.config.n_mels != self.n_mels:
            raise BackboneError(
                f"mel {mel.source_id!r} has {mel.config.n_mels} bands, provider expects {self.n_mels}"
            )
        return melstats_embed(mel)


def embed_set(mels: list[MelSpectrogram], provider: BackboneProvider) -> EmbeddingSet:
    """Embed a list of mels; row i corresponds to mels[i]."""
    if not mels:
        raise BackboneError("cannot embed an empty list of spectrograms")
    cfg = mels[0].config
    for m in mels:
        if m.config != cfg:
            raise BackboneError(f"mixed mel configs in batch (offending id {m.source_id!r})")
    rows = []
    logit_rows = []
    for m in mels:
        try:
            emb, logits = provider.embed(m)
        except BackboneError:
            raise
        except Exception as exc:
            raise BackboneError(f"provider {provider.name!r} failed on {m.source_id!r}: {exc}") from exc
        if emb.shape != (provider.dim,):
            raise BackboneError(
                f"provider {provider.name!r} returned dim {emb.shape} for {m.source_id!r}, "
                f"declared {provider.dim}"
            )
        rows.append(emb)
        logit_rows.append(logits)
    logits = None
    if provider.n_classes > 0:
        logits = np.stack(logit_rows)
    return EmbeddingSet(np.stack(rows), logits, [m.source_id for m in mels], provider.name)


def save_embedding_file(es: EmbeddingSet, path) -> None:
    """Write an EMB1 file plus a `<path>.ids.json` sidecar.

    Layout: magic "EMB1", u32 N, u32 D, u32 C, N*D float32 embeddings
    row-major, then N*C float32 logits row-major (absent when C = 0), all
    little-endian.
    """
    p = Path(path)
    c = es.n_classes
    blob = _EMB1_MAGIC + struct.pack("<III", es.n, es.dim, c)
    blob += es.embeddings.astype("<f4").tobytes()
    if c:
        blob += es.logits.astype("<f4").tobytes()
    p.write_bytes(blob)
    Path(str(p) + ".ids.json").write_text(json.dumps(es.ids), encoding="utf-8")


def load_embedding_file(path, backbone_name: str | None = None) -> EmbeddingSet:
    """Read an EMB1 file; ids come from the sidecar or are synthesized 0..N-1."""
    p = Path(path)
    raw = p.read_bytes()
    if len(raw) < 16 or raw[:4] != _EMB1_MAGIC:
        raise EmbeddingFormatError(f"bad magic (expected EMB1): {p}")
    n, d, c = struct.unpack_from("<III", raw, 4)
    expected = 16 + 4 * n * (d + c)
    if len(raw) < expected:
        raise EmbeddingFormatError(f"truncated payload ({len(raw)} bytes, need {expected}): {p}")
    flat = np.frombuffer(raw, dtype="<f4", count=n * (d + c), offset=16)
    if not np.all(np.isfinite(flat)):
        raise EmbeddingFormatError(f"non-finite values: {p}")
    embeddings = flat[: n * d].reshape(n, d)
    logits = flat[n * d :].reshape(n, c) if c else None

    sidecar = Path(str(p) + ".ids.json")
    if sidecar.exists():
        ids = json.loads(sidecar.read_text(encoding="utf-8"))
        if not isinstance(ids, list) or len(ids) != n:
            raise EmbeddingFormatError(f"ids sidecar does not hold {n} ids: {sidecar}")
    else:
        ids = [str(i) for i in range(n)]
    name = backbone_name if backbone_name is not None else f"emb:{p.name}"
    return EmbeddingSet(embeddings, logits, ids, name)
