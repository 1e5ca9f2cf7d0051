#!/usr/bin/env python3
"""Generate the synthetic desk-scale corpora used in the experiments.

Default: 50,000 characters of a repeated 20-character phrase, the corpus the
convergence experiments train on. Any phrase and total length can be given.
"""

import argparse
from pathlib import Path


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--phrase", default="the quick brown fox ",
                    help="repeating unit (default is 20 chars long)")
    ap.add_argument("--length", type=int, default=50_000,
                    help="total corpus length in characters")
    ap.add_argument("--out", default="data/phrase.txt")
    args = ap.parse_args()

    reps = -(-args.length // len(args.phrase))
    text = (args.phrase * reps)[:args.length]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    print(f"wrote {len(text)} chars ({len(set(text))} unique) to {out}")


if __name__ == "__main__":
    main()
