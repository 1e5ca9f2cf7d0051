#!/usr/bin/env python3
"""Train all four schemes on one corpus and benchmark them.

Produces one run directory per scheme (metrics.csv, model.ckpt, ...) plus a
bench.csv, the inputs the plot tool consumes:

    python scripts/make_corpus.py --out data/phrase.txt
    python scripts/compare_schemes.py --dataset data/phrase.txt --out runs/
    plot perplexity --runs runs/scheme* --x sequences --out perplexity.svg
    plot timing --bench runs/bench/bench.csv --out timing.svg
"""

import argparse
import sys
from pathlib import Path

from charrnn.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dataset", required=True)
    ap.add_argument("--out", default="runs")
    ap.add_argument("--batches", type=int, default=500)
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--k1", type=int, default=20)
    ap.add_argument("--k2", type=int, default=40)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--eval-points", type=int, default=20)
    ap.add_argument("--bench-iters", type=int, default=10)
    ap.add_argument("--precision", default="f64")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = out / "base.cfg"
    base.write_text(f"""
dataset = {args.dataset}
k1 = {args.k1}
k2 = {args.k2}
total_batches = {args.batches}
hidden_size = {args.hidden}
dense_size = 1024
eval_points = {args.eval_points}
seed = {args.seed}
precision = {args.precision}
bench_iters = {args.bench_iters}
""", encoding="utf-8")

    for scheme in (1, 2, 3, 4):
        run_dir = out / f"scheme{scheme}"
        print(f"=== training scheme {scheme} -> {run_dir}")
        code = cli_main(["train", "--config", str(base),
                         "--override", f"scheme={scheme}",
                         "--override", f"out_dir={run_dir}"])
        if code != 0:
            print(f"scheme {scheme} failed with exit {code}", file=sys.stderr)
            return code

    print("=== benchmarking all schemes")
    return cli_main(["bench", "--config", str(base),
                     "--override", f"out_dir={out / 'bench'}",
                     "--override", "precision=f32"])


if __name__ == "__main__":
    sys.exit(main())
