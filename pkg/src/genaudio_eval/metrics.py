"""Distribution metrics over embedding sets: FD, FAD, IS, and paired KL.

FD and FAD are the same Fréchet computation between Gaussians fitted to two
embedding sets; they differ only in which backbone produced the embeddings.
IS and KL operate on class posteriors obtained by softmax over logits.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field

import numpy as np

from .backbone import EmbeddingSet
from .errors import DataError, NumericError

log = logging.getLogger(__name__)


class MetricError(NumericError):
    pass


class PairingError(DataError):
    pass


KL_DIRECTION = "ref||gen"

# Covariances whose smallest eigenvalue falls below this (relative) level get
# a diagonal jitter of 1e-6 * trace / D before the matrix square root.
_DEGENERATE_REL = 1e-12
_JITTER_REL = 1e-6

_SUFFIX_RE = re.compile(r"#(?:noise|mask|interfere|reorder)@[0-9eE.+-]+$")


def strip_corruption_suffix(item_id: str) -> str:
    """Drop a trailing '#<kind>@<fraction>' marker from an id, if present."""
    return _SUFFIX_RE.sub("", item_id)


@dataclass
class GaussianStats:
    """Mean vector and covariance matrix summarizing an embedding set."""

    mean: np.ndarray
    cov: np.ndarray
    n: int

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        d = self.mean.size
        if self.cov.shape != (d, d):
            raise DataError(f"cov shape {self.cov.shape} does not match mean dim {d}")
        if self.n < 2:
            raise DataError("GaussianStats requires n >= 2")
        scale = max(1.0, float(np.abs(self.cov).max(initial=0.0)))
        if np.abs(self.cov - self.cov.T).max(initial=0.0) > 1e-9 * scale:
            raise MetricError("covariance is not symmetric within tolerance")
        trace = float(np.trace(self.cov))
        if np.linalg.eigvalsh(self.cov).min() < -1e-8 * max(trace, 0.0):
            raise MetricError("covariance is not PSD within tolerance")


def gaussian_stats(es: EmbeddingSet) -> GaussianStats:
    """Sample mean and unbiased (N-1) covariance of an embedding set."""
    if es.n < 2:
        raise DataError(f"need at least 2 embeddings to fit a Gaussian, got {es.n}")
    x = es.embeddings.astype(np.float64)
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (es.n - 1)
    cov = 0.5 * (cov + cov.T)
    return GaussianStats(mean, cov, es.n)


def sqrtm_psd(a: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in [-1e-8 * trace, 0) are clamped to zero; anything more
    negative raises, since the input is then not PSD within tolerance.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if np.abs(a - a.T).max(initial=0.0) > 1e-8 * scale:
        raise MetricError("matrix is not symmetric within tolerance")
    sym = 0.5 * (a + a.T)
    w, v = np.linalg.eigh(sym)
    trace = float(np.trace(sym))
    if w.min() < -1e-8 * max(trace, 0.0):
        raise MetricError(f"matrix not PSD: eigenvalue {w.min():.3e} below clamp threshold")
    w = np.clip(w, 0.0, None)
    r = (v * np.sqrt(w)) @ v.T
    return 0.5 * (r + r.T)


def _regularize_cov(cov: np.ndarray) -> np.ndarray:
    """Jitter the diagonal of a numerically degenerate covariance."""
    d = cov.shape[0]
    trace = float(np.trace(cov))
    if trace <= 0.0:
        return cov
    if np.linalg.eigvalsh(cov).min() <= _DEGENERATE_REL * max(1.0, trace):
        log.info("degenerate covariance: adding %.1e diagonal jitter", _JITTER_REL * trace / d)
        return cov + (_JITTER_REL * trace / d) * np.eye(d)
    return cov


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Fréchet distance between two Gaussians.

    ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}), with the cross term
    computed as Tr sqrtm(S1^{1/2} S2 S1^{1/2}) so both arguments stay
    symmetric PSD.  Bit-identical stats return exactly 0.
    """
    if a.mean.shape != b.mean.shape:
        raise DataError(f"dimension mismatch: {a.mean.size} vs {b.mean.size}")
    if np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov):
        return 0.0
    c1 = _regularize_cov(a.cov)
    c2 = _regularize_cov(b.cov)
    s1h = sqrtm_psd(c1)
    inner = s1h @ c2 @ s1h
    cross = float(np.trace(sqrtm_psd(0.5 * (inner + inner.T))))
    dmu = a.mean - b.mean
    fd = float(dmu @ dmu + np.trace(c1) + np.trace(c2) - 2.0 * cross)
    if fd < -1e-6:
        raise MetricError(f"Fréchet distance {fd:.3e} is negative beyond numeric slack")
    return fd


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # Row-wise KL(p || q) in nats with the 0 * log 0 = 0 convention.
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = p * (np.log(p) - np.log(q))
    terms[p == 0.0] = 0.0
    return terms.sum(axis=1)


def inception_score(es: EmbeddingSet) -> float:
    """exp of the mean KL between per-sample class posteriors and their marginal."""
    if es.logits is None:
        raise DataError("inception score requires logits")
    p = _softmax(es.logits)
    marginal = p.mean(axis=0, keepdims=True)
    kl = _kl_rows(p, np.broadcast_to(marginal, p.shape))
    score = float(np.exp(kl.mean()))
    if not np.isfinite(score):
        raise MetricError("inception score is not finite")
    return score


def kl_divergence(gen: EmbeddingSet, ref: EmbeddingSet) -> float:
    """Mean pairwise KL(reference || generated) over id-matched rows, in nats.

    Generated ids are matched to reference ids after stripping corruption
    suffixes; the pairing must be a bijection.
    """
    if gen.logits is None or ref.logits is None:
        raise DataError("KL divergence requires logits on both sets")
    if gen.logits.shape[1] != ref.logits.shape[1]:
        raise DataError(
            f"class count mismatch: gen C={gen.logits.shape[1]}, ref C={ref.logits.shape[1]}"
        )
    gen_index: dict[str, int] = {}
    for i, gid in enumerate(gen.ids):
        key = strip_corruption_suffix(gid)
        if key in gen_index:
            raise PairingError(f"generated ids collide after suffix stripping: {key!r}")
        gen_index[key] = i
    order = []
    for rid in ref.ids:
        if rid not in gen_index:
            raise PairingError(f"no generated item pairs with reference id {rid!r}")
        order.append(gen_index.pop(rid))
    if gen_index:
        leftover = sorted(gen_index)[:3]
        raise PairingError(f"generated ids without a reference pair: {leftover}")

    p = _softmax(ref.logits)
    q = _softmax(gen.logits[order])
    value = float(_kl_rows(p, q).mean())
    if not np.isfinite(value):
        raise MetricError("KL divergence is not finite")
    return value


METRIC_NAMES = ("fd", "isc", "kl", "fad")


@dataclass
class MetricReport:
    """Scores of one evaluation run plus enough context to compare runs."""

    fd: float | None = None
    isc: float | None = None
    kl: float | None = None
    fad: float | None = None
    backbones: dict = field(default_factory=dict)
    n_generated: int = 0
    n_reference: int = 0
    kl_direction: str = KL_DIRECTION
    config_digest: str = ""

    def __post_init__(self):
        for name in ("fd", "fad", "kl"):
            value = getattr(self, name)
            if value is None:
                continue
            if not np.isfinite(value):
                raise MetricError(f"{name} is not finite")
            if value < -1e-6:
                raise MetricError(f"{name}={value:.3e} is negative beyond numeric slack")
            setattr(self, name, max(0.0, float(value)))
        if self.isc is not None:
            if not np.isfinite(self.isc):
                raise MetricError("isc is not finite")
            self.isc = max(1.0, float(self.isc))

    def to_dict(self) -> dict:
        return {
            "fd": self.fd,
            "isc": self.isc,
            "kl": self.kl,
            "fad": self.fad,
            "backbones": dict(self.backbones),
            "n_generated": self.n_generated,
            "n_reference": self.n_reference,
            "kl_direction": self.kl_direction,
            "config_digest": self.config_digest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(
            fd=d.get("fd"),
            isc=d.get("isc"),
            kl=d.get("kl"),
            fad=d.get("fad"),
            backbones=dict(d.get("backbones", {})),
            n_generated=int(d.get("n_generated", 0)),
            n_reference=int(d.get("n_reference", 0)),
            kl_direction=d.get("kl_direction", KL_DIRECTION),
            config_digest=d.get("config_digest", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        return cls.from_dict(json.loads(text))


def config_digest(settings: dict) -> str:
    """Short stable digest of a settings mapping."""
    blob = json.dumps(settings, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


METRIC_CONVENTIONS = {
    "covariance": "unbiased/N-1",
    "kl_direction": KL_DIRECTION,
    "logit_link": "softmax",
    "sqrtm": "eigh-symmetric-product",
}


def evaluate_all(
    gen: EmbeddingSet,
    ref: EmbeddingSet,
    requested=METRIC_NAMES,
    fad_gen: EmbeddingSet | None = None,
    fad_ref: EmbeddingSet | None = None,
    digest: str | None = None,
) -> MetricReport:
    """Compute the requested metrics and assemble a MetricReport.

    FD, IS, and KL run on (gen, ref); FAD runs on (fad_gen, fad_ref) when
    given, falling back to the primary pair.  Sub-metric failures are
    re-raised tagged with the metric name.
    """
    requested = list(requested)
    for name in requested:
        if name not in METRIC_NAMES:
            raise DataError(f"unknown metric {name!r}; choose from {METRIC_NAMES}")
    fgen = fad_gen if fad_gen is not None else gen
    fref = fad_ref if fad_ref is not None else ref

    scores: dict[str, float] = {}

    def run(name, fn):
        try:
            scores[name] = fn()
        except (DataError, NumericError) as exc:
            raise type(exc)(f"{name}: {exc}") from exc

    if "fd" in requested:
        run("fd", lambda: frechet_distance(gaussian_stats(gen), gaussian_stats(ref)))
    if "fad" in requested:
        run("fad", lambda: frechet_distance(gaussian_stats(fgen), gaussian_stats(fref)))
    if "isc" in requested:
        run("isc", lambda: inception_score(gen))
    if "kl" in requested:
        run("kl", lambda: kl_divergence(gen, ref))

    return MetricReport(
        fd=scores.get("fd"),
        isc=scores.get("isc"),
        kl=scores.get("kl"),
        fad=scores.get("fad"),
        backbones={
            "fd": gen.backbone_name,
            "fad": fgen.backbone_name,
            "logits": gen.backbone_name,
        },
        n_generated=gen.n,
        n_reference=ref.n,
        kl_direction=KL_DIRECTION,
        config_digest=digest if digest is not None else config_digest(METRIC_CONVENTIONS),
    )
