"""End-to-end orchestration: directory evaluation, corruption sweeps, report emission.

A sweep compares a corpus against corrupted copies of itself over a fraction
grid from 0 to 1, evaluating all four metrics at every grid point.  Sweep
points are independent and run on a thread pool capped by the
GENAUDIO_EVAL_THREADS environment variable.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import fix_duration, load_audio, resample
from .backbone import EmbeddingSet, MelStatsProvider, embed_set, load_embedding_file
from .corruption import CorruptionSpec, apply_corruption
from .errors import DataError, InvariantError
from .mel import MelConfig, MelSpectrogram, mel_spectrogram
from .metrics import (
    METRIC_CONVENTIONS,
    METRIC_NAMES,
    MetricReport,
    config_digest,
    evaluate_all,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    """Ingestion settings shared by every harness entry point."""

    sample_rate: int = 16000
    clip_seconds: float = 10.0
    mel: MelConfig | None = None

    def mel_config(self) -> MelConfig:
        if self.mel is not None:
            return self.mel
        return MelConfig(f_max=min(8000.0, self.sample_rate / 2))

    def digest(self) -> str:
        cfg = self.mel_config()
        return config_digest(
            {
                **METRIC_CONVENTIONS,
                "sample_rate": self.sample_rate,
                "clip_seconds": self.clip_seconds,
                "mel": [cfg.n_fft, cfg.hop, cfg.n_mels, cfg.f_min, cfg.f_max, cfg.log_floor],
                "noise_variance": "0.2*range(per-clip)",
                "mask_value": "log_floor",
                "interference_snr": "equal-total-power",
            }
        )


def thread_cap() -> int:
    raw = os.environ.get("GENAUDIO_EVAL_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        value = os.cpu_count() or 1
    return value


def load_clip_for_pipeline(path, config: PipelineConfig):
    clip = load_audio(path)
    clip = resample(clip, config.sample_rate)
    return fix_duration(clip, config.clip_seconds)


def load_corpus(directory, config: PipelineConfig) -> list[MelSpectrogram]:
    """Load every WAV in a directory (sorted by name) into mel spectrograms."""
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"not a directory: {d}")
    paths = sorted(d.glob("*.wav"))
    if not paths:
        raise DataError(f"no .wav files in {d}")
    mel_cfg = config.mel_config()
    return [mel_spectrogram(load_clip_for_pipeline(p, config), mel_cfg) for p in paths]


def _parse_backbone(selection: str):
    """'melstats' or 'emb:DIR' where DIR holds generated.emb1 and reference.emb1."""
    if selection == "melstats":
        return ("melstats",)
    if selection.startswith("emb:"):
        root = Path(selection[4:])
        return ("emb", root / "generated.emb1", root / "reference.emb1")
    raise DataError(f"unknown backbone selection {selection!r}")


def _resolve_sets(selection, generated_dir, reference_dir, config: PipelineConfig,
                  cache: dict) -> tuple[EmbeddingSet, EmbeddingSet]:
    parsed = _parse_backbone(selection) if isinstance(selection, str) else selection
    if parsed[0] == "melstats":
        if "mels" not in cache:
            cache["mels"] = (
                load_corpus(generated_dir, config),
                load_corpus(reference_dir, config),
            )
        gen_mels, ref_mels = cache["mels"]
        provider = MelStatsProvider(config.mel_config().n_mels)
        return embed_set(gen_mels, provider), embed_set(ref_mels, provider)
    if parsed[0] == "emb":
        gen_path, ref_path = parsed[1], parsed[2]
        for p in (gen_path, ref_path):
            if not Path(p).is_file():
                raise DataError(f"embedding file not found: {p}")
        return load_embedding_file(gen_path), load_embedding_file(ref_path)
    raise DataError(f"unknown backbone selection {parsed!r}")


def run_evaluate(generated_dir, reference_dir, metrics=METRIC_NAMES,
                 backbone: str = "melstats", fad_backbone: str | None = None,
                 config: PipelineConfig | None = None,
                 out_json=None) -> MetricReport:
    """Full pipeline: load -> mel -> embed -> metrics for two directories.

    `backbone` supplies embeddings for FD and logits for IS/KL;
    `fad_backbone` (defaulting to `backbone`) supplies the FAD pair.
    Selections are 'melstats' or 'emb:DIR' with precomputed EMB1 files.
    """
    config = config or PipelineConfig()
    cache: dict = {}
    gen, ref = _resolve_sets(backbone, generated_dir, reference_dir, config, cache)
    if "fad" in metrics and fad_backbone is not None and fad_backbone != backbone:
        fad_gen, fad_ref = _resolve_sets(fad_backbone, generated_dir, reference_dir, config, cache)
    else:
        fad_gen, fad_ref = gen, ref
    if "fad" in metrics and fad_gen.backbone_name == "melstats":
        log.warning(
            "FAD computed with the desk-scale melstats backbone; "
            "use precomputed EMB1 embeddings from a real FAD backbone for comparable scores"
        )
    report = evaluate_all(
        gen, ref, metrics, fad_gen=fad_gen, fad_ref=fad_ref, digest=config.digest()
    )
    if out_json is not None:
        Path(out_json).write_text(report.to_json() + "\n", encoding="utf-8")
    return report


@dataclass
class SweepResult:
    """One corruption kind evaluated over a fraction grid."""

    kind: str
    fractions: list[float]
    reports: list[MetricReport]
    seed: int
    backbones: dict = field(default_factory=dict)

    def __post_init__(self):
        f = self.fractions
        if len(f) != len(self.reports):
            raise InvariantError("one report per fraction required")
        if len(f) < 2 or f[0] != 0.0 or f[-1] != 1.0:
            raise InvariantError("fraction grid must start at 0 and end at 1")
        if any(b <= a for a, b in zip(f, f[1:])):
            raise InvariantError("fractions must be strictly increasing")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "backbones": dict(self.backbones),
            "fractions": list(self.fractions),
            "reports": [r.to_dict() for r in self.reports],
        }


def run_sweep(corpus_dir, kind: str, steps: int = 11, seed: int = 0,
              interferer_dir=None, segments: int = 4,
              config: PipelineConfig | None = None) -> SweepResult:
    """Corrupt-and-evaluate a corpus against itself over a uniform fraction grid.

    Each grid point corrupts round(f * N) clips (nested across fractions) and
    scores corrupted-vs-clean with all four metrics using the melstats
    backbone.  The fraction-0 row is the uncorrupted identity.
    """
    config = config or PipelineConfig()
    if steps < 2:
        raise DataError("steps must be >= 2 so the grid includes 0 and 1")
    mels = load_corpus(corpus_dir, config)
    if len(mels) < 10:
        raise DataError(f"sweep needs at least 10 clips, found {len(mels)}")
    pool = None
    if kind == "interfere":
        if interferer_dir is None:
            raise DataError("interference sweep requires an interferer directory")
        pool = load_corpus(interferer_dir, config)

    provider = MelStatsProvider(config.mel_config().n_mels)
    clean = embed_set(mels, provider)
    fractions = [i / (steps - 1) for i in range(steps)]
    digest = config.digest()

    def point(fraction: float) -> MetricReport:
        spec = CorruptionSpec(kind=kind, fraction=fraction, seed=seed, segments=segments)
        corrupted = apply_corruption(mels, spec, interferer_pool=pool)
        gen = embed_set(corrupted, provider)
        return evaluate_all(gen, clean, METRIC_NAMES, digest=digest)

    with ThreadPoolExecutor(max_workers=thread_cap()) as pool_exec:
        reports = list(pool_exec.map(point, fractions))

    return SweepResult(
        kind=kind,
        fractions=fractions,
        reports=reports,
        seed=seed,
        backbones=dict(reports[0].backbones),
    )


@dataclass
class BenchmarkRow:
    dataset: str
    condition: str
    fd: float
    isc: float
    kl: float
    fad: float

    def __post_init__(self):
        for name in ("fd", "isc", "kl", "fad"):
            if not np.isfinite(getattr(self, name)):
                raise InvariantError(f"benchmark row {self.dataset}/{self.condition}: {name} not finite")


@dataclass
class BenchmarkTable:
    """Rows of per-dataset scores with the arrow conventions in the header."""

    rows: list[BenchmarkRow]

    HEADER = "Dataset,Condition,FD↓,IS↑,KL↓,FAD↓"

    def format(self) -> str:
        lines = [self.HEADER]
        for r in self.rows:
            lines.append(
                f"{r.dataset},{r.condition},{r.fd:.2f},{r.isc:.2f},{r.kl:.2f},{r.fad:.2f}"
            )
        return "\n".join(lines) + "\n"


def sweep_csv(result: SweepResult) -> str:
    lines = ["fraction,fd,isc,kl,fad"]
    for f, r in zip(result.fractions, result.reports):
        cells = [f"{f:.10g}"]
        for name in METRIC_NAMES:
            value = getattr(r, name)
            cells.append("" if value is None else f"{value:.10g}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


_SVG_COLORS = {"fd": "#1f77b4", "isc": "#ff7f0e", "kl": "#2ca02c", "fad": "#d62728"}
_SVG_W, _SVG_H = 640, 400
_SVG_ML, _SVG_MR, _SVG_MT, _SVG_MB = 60, 150, 30, 50


def sweep_svg(result: SweepResult) -> str:
    """Deterministic line chart: one min-max normalized series per metric."""
    plot_w = _SVG_W - _SVG_ML - _SVG_MR
    plot_h = _SVG_H - _SVG_MT - _SVG_MB
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<rect x="{_SVG_ML}" y="{_SVG_MT}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333333"/>',
        f'<text x="{_SVG_ML + plot_w / 2:.1f}" y="{_SVG_H - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">fraction of corpus corrupted</text>',
        f'<text x="18" y="{_SVG_MT + plot_h / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {_SVG_MT + plot_h / 2:.1f})">normalized score</text>',
        f'<text x="{_SVG_ML + plot_w / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">metric response to '
        f'{result.kind} corruption (seed {result.seed})</text>',
    ]
    for f in result.fractions:
        x = _SVG_ML + f * plot_w
        parts.append(
            f'<line x1="{x:.1f}" y1="{_SVG_MT + plot_h}" x2="{x:.1f}" '
            f'y2="{_SVG_MT + plot_h + 5}" stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{x:.1f}" y="{_SVG_MT + plot_h + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{f:.1f}</text>'
        )
    legend_y = _SVG_MT + 10
    for name in METRIC_NAMES:
        series = [getattr(r, name) for r in result.reports]
        if any(v is None for v in series):
            continue
        lo, hi = min(series), max(series)
        span = hi - lo
        points = []
        for f, v in zip(result.fractions, series):
            x = _SVG_ML + f * plot_w
            yn = 0.5 if span == 0 else (v - lo) / span
            y = _SVG_MT + plot_h - yn * plot_h
            points.append(f"{x:.2f},{y:.2f}")
        color = _SVG_COLORS[name]
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" '
            f'points="{" ".join(points)}"/>'
        )
        parts.append(
            f'<line x1="{_SVG_W - _SVG_MR + 10}" y1="{legend_y}" '
            f'x2="{_SVG_W - _SVG_MR + 30}" y2="{legend_y}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_SVG_W - _SVG_MR + 35}" y="{legend_y + 4}" '
            f'font-family="sans-serif" font-size="11">{name} [{lo:.4g}, {hi:.4g}]</text>'
        )
        legend_y += 18
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(result, json_path=None, csv_path=None, svg_path=None) -> list[Path]:
    """Write a result in the requested formats; returns the written paths.

    SweepResults support json/csv/svg, MetricReports json, BenchmarkTables
    csv (the table layout) and json.
    """
    written = []

    def write(path, text):
        p = Path(path)
        p.write_text(text, encoding="utf-8")
        written.append(p)

    if isinstance(result, SweepResult):
        if json_path is not None:
            write(json_path, json.dumps(result.to_dict(), indent=2) + "\n")
        if csv_path is not None:
            write(csv_path, sweep_csv(result))
        if svg_path is not None:
            write(svg_path, sweep_svg(result))
    elif isinstance(result, MetricReport):
        if csv_path is not None or svg_path is not None:
            raise DataError("MetricReport can only be emitted as JSON")
        if json_path is not None:
            write(json_path, result.to_json() + "\n")
    elif isinstance(result, BenchmarkTable):
        if svg_path is not None:
            raise DataError("BenchmarkTable can only be emitted as CSV or JSON")
        if csv_path is not None:
            write(csv_path, result.format())
        if json_path is not None:
            rows = [
                {"dataset": r.dataset, "condition": r.condition, "fd": r.fd,
                 "isc": r.isc, "kl": r.kl, "fad": r.fad}
                for r in result.rows
            ]
            write(json_path, json.dumps({"header": BenchmarkTable.HEADER, "rows": rows}, indent=2) + "\n")
    else:
        raise DataError(f"cannot emit result of type {type(result).__name__}")
    return written
