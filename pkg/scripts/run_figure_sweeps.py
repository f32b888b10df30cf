#!/usr/bin/env python3
"""Run all four corruption-sensitivity sweeps on a corpus and emit
CSV / JSON / SVG per corruption kind.

If --corpus is omitted, a synthetic corpus and interferer pool are generated
under the output directory first.
"""

import argparse
import sys
from pathlib import Path

from genaudio_eval.corpus import write_interferer_pool, write_synthetic_corpus
from genaudio_eval.harness import emit_report, run_sweep

KINDS = ("noise", "mask", "reorder", "interfere")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", default=None, help="WAV directory (>= 10 clips)")
    parser.add_argument("--interferers", default=None, help="WAV directory for the interference sweep")
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--steps", type=int, default=11)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    corpus = args.corpus
    interferers = args.interferers
    if corpus is None:
        corpus = out / "corpus"
        write_synthetic_corpus(corpus)
        print(f"generated synthetic corpus in {corpus}")
    if interferers is None:
        interferers = out / "interferers"
        write_interferer_pool(interferers)
        print(f"generated interferer pool in {interferers}")

    for kind in KINDS:
        result = run_sweep(corpus, kind, steps=args.steps, seed=args.seed,
                           interferer_dir=interferers if kind == "interfere" else None)
        written = emit_report(
            result,
            json_path=out / f"sweep_{kind}.json",
            csv_path=out / f"sweep_{kind}.csv",
            svg_path=out / f"sweep_{kind}.svg",
        )
        print(f"{kind}: " + ", ".join(str(p) for p in written))
    return 0


if __name__ == "__main__":
    sys.exit(main())
