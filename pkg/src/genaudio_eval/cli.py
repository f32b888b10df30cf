"""Command-line interface.

Subcommands: evaluate, corrupt, sweep, diffusion-demo.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .corruption import CorruptionSpec, apply_corruption, corruption_file_id
from .diffusion import Latent, forward_step, make_schedule
from .errors import DataError, NumericError, UsageError
from .harness import PipelineConfig, emit_report, load_corpus, run_evaluate, run_sweep
from .mel import save_mel
from .metrics import METRIC_NAMES


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _pipeline_args(parser):
    parser.add_argument("--sample-rate", type=int, default=16000,
                        help="pipeline sample rate in Hz (default 16000)")
    parser.add_argument("--clip-seconds", type=float, default=10.0,
                        help="clips are truncated/zero-padded to this length (default 10)")


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(sample_rate=args.sample_rate, clip_seconds=args.clip_seconds)


def build_parser() -> _Parser:
    parser = _Parser(prog="genaudio-eval",
                     description="Evaluate generated audio sets and probe metric sensitivity.")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="score a generated directory against a reference directory")
    ev.add_argument("--generated", required=True, help="directory of generated WAV files")
    ev.add_argument("--reference", required=True, help="directory of reference WAV files")
    ev.add_argument("--backbone", default="melstats",
                    help="melstats | emb:DIR (DIR holds generated.emb1 + reference.emb1)")
    ev.add_argument("--fad-backbone", default=None,
                    help="backbone for the FAD pair (defaults to --backbone)")
    ev.add_argument("--metrics", default="fd,isc,kl,fad",
                    help="comma-separated subset of fd,isc,kl,fad")
    ev.add_argument("--out", default=None, help="write the report JSON here")
    _pipeline_args(ev)

    co = sub.add_parser("corrupt", help="write a corrupted copy of a corpus as MEL1 files")
    co.add_argument("--in", dest="in_dir", required=True, help="directory of WAV files")
    co.add_argument("--kind", required=True, choices=["noise", "mask", "interfere", "reorder"])
    co.add_argument("--fraction", type=float, required=True)
    co.add_argument("--seed", type=int, default=0)
    co.add_argument("--interferers", default=None, help="interferer WAV directory (kind=interfere)")
    co.add_argument("--segments", type=int, default=4, help="reorder segment count (default 4)")
    co.add_argument("--out", required=True, help="output directory for MEL1 files + metadata")
    _pipeline_args(co)

    sw = sub.add_parser("sweep", help="run a corruption-fraction sweep over a corpus")
    sw.add_argument("--corpus", required=True, help="directory of WAV files (>= 10 clips)")
    sw.add_argument("--kind", required=True, choices=["noise", "mask", "interfere", "reorder"])
    sw.add_argument("--steps", type=int, default=11, help="grid size including 0 and 1 (default 11)")
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--interferers", default=None)
    sw.add_argument("--segments", type=int, default=4)
    sw.add_argument("--out", default=None, help="CSV output path")
    sw.add_argument("--json", dest="json_out", default=None, help="JSON output path")
    sw.add_argument("--plot", default=None, help="SVG output path")
    _pipeline_args(sw)

    dd = sub.add_parser("diffusion-demo",
                        help="check composed forward steps against the closed-form marginal")
    dd.add_argument("--steps", type=int, default=10)
    dd.add_argument("--beta-start", type=float, default=1e-4)
    dd.add_argument("--beta-end", type=float, default=0.02)
    dd.add_argument("--dim", type=int, default=4)
    dd.add_argument("--trials", type=int, default=20000)
    dd.add_argument("--seed", type=int, default=0)
    dd.add_argument("--out", required=True, help="CSV of (n, empirical_variance, one_minus_alpha_bar)")
    return parser


def _cmd_evaluate(args) -> int:
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    for m in metrics:
        if m not in METRIC_NAMES:
            raise UsageError(f"unknown metric {m!r}")
    report = run_evaluate(
        args.generated,
        args.reference,
        metrics=metrics,
        backbone=args.backbone,
        fad_backbone=args.fad_backbone,
        config=_pipeline_config(args),
        out_json=args.out,
    )
    print(report.to_json())
    return 0


def _cmd_corrupt(args) -> int:
    config = _pipeline_config(args)
    mels = load_corpus(args.in_dir, config)
    pool = load_corpus(args.interferers, config) if args.interferers else None
    spec = CorruptionSpec(kind=args.kind, fraction=args.fraction, seed=args.seed,
                          segments=args.segments)
    meta: dict = {}
    corrupted = apply_corruption(mels, spec, interferer_pool=pool, meta=meta)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    touched = set(meta["corrupted_ids"])
    for mel in corrupted:
        name = corruption_file_id(mel.source_id, spec) if mel.source_id in touched else mel.source_id
        save_mel(out_dir / f"{name}.mel1", mel)
    (out_dir / "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(corrupted)} MEL1 files ({len(touched)} corrupted) to {out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    result = run_sweep(
        args.corpus,
        args.kind,
        steps=args.steps,
        seed=args.seed,
        interferer_dir=args.interferers,
        segments=args.segments,
        config=_pipeline_config(args),
    )
    written = emit_report(result, json_path=args.json_out, csv_path=args.out, svg_path=args.plot)
    for p in written:
        print(f"wrote {p}")
    if not written:
        print(json.dumps(result.to_dict(), indent=2))
    return 0


def _cmd_diffusion_demo(args) -> int:
    sched = make_schedule(args.steps, args.beta_start, args.beta_end)
    rng = np.random.default_rng(args.seed)
    # One flat latent batches trials x dim independent coordinates.
    z = Latent(np.zeros(args.trials * args.dim), 0)
    lines = ["n,empirical_variance,one_minus_alpha_bar"]
    for n in range(1, sched.n_steps + 1):
        z = forward_step(z, n, sched, rng)
        lines.append(f"{n},{z.values.var(ddof=1):.10g},{1.0 - sched.alpha_bar(n):.10g}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "evaluate": _cmd_evaluate,
    "corrupt": _cmd_corrupt,
    "sweep": _cmd_sweep,
    "diffusion-demo": _cmd_diffusion_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
