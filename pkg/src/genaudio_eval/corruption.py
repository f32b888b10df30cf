"""Controlled degradations of mel spectrograms: noise, masking, interference, reordering.

Every corruption preserves matrix shape and finiteness, and is fully
determined by (input, spec, seed).  Per-item random generators are derived
from (seed, item id), so corrupting a corpus is order-independent and safe
to parallelize.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError, InvariantError
from .mel import MelSpectrogram

log = logging.getLogger(__name__)

KINDS = ("noise", "mask", "interfere", "reorder")


class CorruptionError(DataError):
    pass


@dataclass(frozen=True)
class CorruptionSpec:
    """What to corrupt and how much of the corpus to touch."""

    kind: str
    fraction: float
    seed: int = 0
    segments: int = 4  # reorder only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvariantError(f"unknown corruption kind {self.kind!r}; choose from {KINDS}")
        if not (0.0 <= self.fraction <= 1.0):
            raise InvariantError(f"fraction must be in [0, 1], got {self.fraction}")
        if self.segments < 1:
            raise InvariantError("segments must be a positive integer")


def _mel_like(mel: MelSpectrogram, values: np.ndarray) -> MelSpectrogram:
    return MelSpectrogram(values, mel.config, mel.source_id)


def add_noise(mel: MelSpectrogram, rng: np.random.Generator) -> MelSpectrogram:
    """Add Gaussian noise whose mean is the mel's mean value and whose
    variance is 20% of the mel's value range, then re-floor.

    A constant mel has zero range, so the noise degenerates to a
    deterministic shift by the mean.
    """
    v = mel.values
    noise_mean = float(v.mean())
    variance = 0.2 * float(v.max() - v.min())
    g = rng.normal(noise_mean, np.sqrt(variance), size=v.shape)
    return _mel_like(mel, np.maximum(v + g, mel.floor_value))


def mask_random(mel: MelSpectrogram, rng: np.random.Generator, meta: dict | None = None) -> MelSpectrogram:
    """Silence two randomly placed time spans, each 10% of the frame count.

    Start frames are drawn uniformly in [0, T - L] with L = floor(T / 10);
    the spans may overlap.  Masked frames are set to the mel floor across
    all bands.
    """
    t = mel.n_frames
    if t < 20:
        raise CorruptionError(f"mel {mel.source_id!r}: need T >= 20 frames to mask, got {t}")
    span = t // 10
    starts = rng.integers(0, t - span + 1, size=2)
    out = mel.values.copy()
    for s in starts:
        out[int(s) : int(s) + span, :] = mel.floor_value
    if meta is not None:
        meta["mask_starts"] = [int(s) for s in starts]
        meta["mask_span"] = span
    return _mel_like(mel, out)


def mix_interference(target: MelSpectrogram, interferer: MelSpectrogram) -> MelSpectrogram:
    """Mix an interfering mel into the target at 0 dB SNR.

    Both matrices move to linear power, the interferer is globally scaled so
    its total power equals the target's, the powers are summed entrywise,
    and the result is re-logged with the floor.
    """
    if target.values.shape != interferer.values.shape:
        raise CorruptionError(
            f"shape mismatch: target {target.values.shape}, interferer {interferer.values.shape}"
        )
    if target.config != interferer.config:
        raise CorruptionError("target and interferer mel configs differ")
    p_target = np.exp(target.values)
    p_interferer = np.exp(interferer.values)
    total = p_interferer.sum()
    if total <= 0.0:
        raise CorruptionError(f"silent interferer {interferer.source_id!r}: cannot match SNR")
    scale = p_target.sum() / total
    mixed = p_target + scale * p_interferer
    out = np.log(np.maximum(mixed, target.config.log_floor))
    return _mel_like(target, out)


def _derangement(k: int, rng: np.random.Generator) -> np.ndarray:
    # Rejection sampling is uniform over derangements; expected ~e tries.
    while True:
        perm = rng.permutation(k)
        if not np.any(perm == np.arange(k)):
            return perm


def reorder_events(
    mel: MelSpectrogram, segments: int, rng: np.random.Generator, meta: dict | None = None
) -> MelSpectrogram:
    """Split the time axis into contiguous near-equal segments and derange them.

    The first T mod K segments are one frame longer.  A derangement (no
    segment keeps its position) guarantees every reordered clip actually
    changes; the frame multiset is preserved exactly.
    """
    t = mel.n_frames
    if segments < 2:
        raise CorruptionError(f"need at least 2 segments to reorder, got {segments}")
    if t < segments:
        raise CorruptionError(f"mel {mel.source_id!r}: T={t} frames < {segments} segments")
    base, rem = divmod(t, segments)
    lengths = [base + 1] * rem + [base] * (segments - rem)
    bounds = np.cumsum([0] + lengths)
    pieces = [mel.values[bounds[i] : bounds[i + 1]] for i in range(segments)]
    perm = _derangement(segments, rng)
    out = np.vstack([pieces[int(p)] for p in perm])
    if meta is not None:
        meta["segment_lengths"] = lengths
        meta["segment_perm"] = [int(p) for p in perm]
    return _mel_like(mel, out)


def _item_rng(seed: int, item_id: str, lane: int) -> np.random.Generator:
    digest = hashlib.sha256(item_id.encode("utf-8")).digest()
    id_key = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, lane, id_key]))


def _corpus_rng(seed: int, lane: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, lane]))


def corrupted_count(fraction: float, n: int) -> int:
    """round(fraction * n) with half-up rounding."""
    return int(np.floor(fraction * n + 0.5))


def apply_corruption(
    mels: list[MelSpectrogram],
    spec: CorruptionSpec,
    interferer_pool: list[MelSpectrogram] | None = None,
    meta: dict | None = None,
) -> list[MelSpectrogram]:
    """Corrupt round(fraction * N) items of a corpus, chosen by seeded draw.

    Item selection ranks the corpus with one seeded shuffle and takes a
    prefix, so larger fractions corrupt supersets of smaller ones under the
    same seed.  Untouched items pass through unchanged and output order
    matches input order; corrupted items keep their ids.
    """
    n = len(mels)
    if n == 0:
        raise CorruptionError("empty corpus")
    if spec.kind == "interfere":
        if not interferer_pool:
            raise CorruptionError("interference corruption requires a non-empty interferer pool")

    ranking = _corpus_rng(spec.seed, 0).permutation(n)
    k = corrupted_count(spec.fraction, n)
    chosen = set(int(i) for i in ranking[:k])

    pool_for = {}
    if spec.kind == "interfere" and k > 0:
        pool = interferer_pool
        pick_rng = _corpus_rng(spec.seed, 2)
        if len(pool) >= k:
            picks = pick_rng.permutation(len(pool))[:k]
        else:
            log.warning(
                "interferer pool (%d) smaller than corrupted count (%d); sampling with replacement",
                len(pool), k,
            )
            picks = pick_rng.integers(0, len(pool), size=k)
        for idx, pool_idx in zip(sorted(chosen), picks):
            pool_for[idx] = int(pool_idx)

    item_meta: dict[str, dict] = {}
    out = []
    for i, mel in enumerate(mels):
        if i not in chosen:
            out.append(mel)
            continue
        info: dict = {}
        rng = _item_rng(spec.seed, mel.source_id, 1)
        if spec.kind == "noise":
            corrupted = add_noise(mel, rng)
        elif spec.kind == "mask":
            corrupted = mask_random(mel, rng, meta=info)
        elif spec.kind == "reorder":
            corrupted = reorder_events(mel, spec.segments, rng, meta=info)
        else:
            pool_idx = pool_for[i]
            info["interferer_id"] = interferer_pool[pool_idx].source_id
            corrupted = mix_interference(mel, interferer_pool[pool_idx])
        out.append(corrupted)
        item_meta[mel.source_id] = info

    if meta is not None:
        meta["kind"] = spec.kind
        meta["fraction"] = spec.fraction
        meta["seed"] = spec.seed
        if spec.kind == "reorder":
            meta["segments"] = spec.segments
        meta["corrupted_ids"] = [mels[i].source_id for i in sorted(chosen)]
        meta["items"] = item_meta
    return out


def corruption_file_id(item_id: str, spec: CorruptionSpec) -> str:
    """Id used when a corrupted item is persisted: '<id>#<kind>@<fraction>'."""
    return f"{item_id}#{spec.kind}@{spec.fraction:g}"
