#!/usr/bin/env python3
"""Generate the bundled synthetic evaluation corpus (and optionally an
interferer pool) as WAV files."""

import argparse
import sys

from genaudio_eval.corpus import write_interferer_pool, write_synthetic_corpus


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="corpus output directory")
    parser.add_argument("--clips", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sample-rate", type=int, default=16000)
    parser.add_argument("--seconds", type=float, default=10.0)
    parser.add_argument("--interferers", default=None,
                        help="also write an interferer pool to this directory")
    args = parser.parse_args(argv)

    paths = write_synthetic_corpus(args.out, n_clips=args.clips, seed=args.seed,
                                   sample_rate=args.sample_rate, seconds=args.seconds)
    print(f"wrote {len(paths)} clips to {args.out}")
    if args.interferers:
        pool = write_interferer_pool(args.interferers, seed=args.seed + 1,
                                     sample_rate=args.sample_rate, seconds=args.seconds)
        print(f"wrote {len(pool)} interferer clips to {args.interferers}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
