"""Command-line entry points: train, eval, sample, bench, gradcheck.

Run directories have fixed names so downstream tooling needs no discovery:
config.snapshot, metrics.csv, model.ckpt, log.txt (and bench.csv for the
bench command). Relative out_dir values resolve under $CHARRNN_OUT_ROOT when
that variable is set.

Exit codes: 0 success, 1 config error, 2 IO error, 3 numerical failure
(non-finite loss), 4 gradcheck failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from .bptt import LossSpec, backward, finite_diff_gradient, loss_weights, max_relative_error
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .data import DataError, load_corpus, split_dataset
from .evaluate import (
    BENCH_HEADER,
    METRICS_HEADER,
    MetricsRecord,
    bench_sample,
    bench_train_group,
    eval_schedule,
    format_bench_row,
    format_metrics_row,
    perplexity,
)
from .model import ModelConfig, forward_sequence, init_parameters, initial_state
from .numerics import Rng
from .runconfig import ConfigError, RunConfig, load_run_config, snapshot
from .schemes import (
    NumericalError,
    SchemeId,
    TrainHooks,
    sample_progressive,
    sample_windowed,
    train,
)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_GRADCHECK = 0, 1, 2, 3, 4


def _out_dir(cfg_out: str) -> Path:
    root = os.environ.get("CHARRNN_OUT_ROOT")
    p = Path(cfg_out)
    if root and not p.is_absolute():
        p = Path(root) / p
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_train(args) -> int:
    try:
        cfg = load_run_config(args.config, args.override)
        tcfg = cfg.train_config()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        vocab, corpus = load_corpus(cfg.dataset)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DataError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rotation = cfg.resolved_rotation()
        split = split_dataset(corpus, rotation, cfg.test_len)
        mcfg = cfg.model_config(len(vocab))
    except (DataError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = _out_dir(cfg.out_dir)
    (out / "config.snapshot").write_text(snapshot(cfg), encoding="utf-8")
    schedule = set(eval_schedule(cfg.total_batches, cfg.eval_points))
    start = time.perf_counter()

    with open(out / "log.txt", "w", encoding="utf-8") as log, \
         open(out / "metrics.csv", "w", encoding="utf-8") as metrics:
        metrics.write(METRICS_HEADER + "\n")
        log.write(f"train start: scheme={cfg.scheme} |V|={len(vocab)} "
                  f"train={len(split.train)} test={len(split.test)}\n")

        def on_batch(b, loss, params):
            if b not in schedule:
                return
            ppl = perplexity(params, mcfg, split.test, cfg.k2)
            rec = MetricsRecord(
                batch_index=b, sequences_seen=b * cfg.lanes,
                wall_ms=(time.perf_counter() - start) * 1000.0,
                train_loss=loss, test_perplexity=ppl)
            metrics.write(format_metrics_row(rec) + "\n")
            metrics.flush()
            log.write(f"batch {b}: loss={loss:.6f} perplexity={ppl:.6f}\n")
            log.flush()

        try:
            result = train(mcfg, tcfg, split.train, hooks=TrainHooks(on_batch=on_batch))
        except NumericalError as exc:
            print(f"numerical failure: {exc}", file=sys.stderr)
            log.write(f"aborted: {exc}\n")
            return EXIT_NUMERIC
        save_checkpoint(out / "model.ckpt", Checkpoint(
            model_cfg=mcfg, params=result.params, vocab=vocab,
            scheme=int(cfg.scheme), k1=cfg.k1, k2=cfg.k2, rotation=rotation,
            test_len=cfg.test_len))
        log.write(f"train done: {result.batches_run} batches\n")
    return EXIT_OK


def _load_ckpt(path) -> Checkpoint:
    try:
        return load_checkpoint(path)
    except OSError as exc:
        raise SystemExit2(f"io error: {exc}", EXIT_IO)
    except CheckpointError as exc:
        raise SystemExit2(f"io error: {exc}", EXIT_IO)


class SystemExit2(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def cmd_eval(args) -> int:
    ckpt = _load_ckpt(args.checkpoint)
    try:
        text = Path(args.dataset).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        tokens = ckpt.vocab.encode(text)
    except DataError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    from .data import Corpus
    try:
        split = split_dataset(Corpus(tokens, args.dataset), ckpt.rotation,
                              ckpt.test_len)
    except DataError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ppl = perplexity(ckpt.params, ckpt.model_cfg, split.test, ckpt.k2)
    print(f"{ppl:.6f}")
    return EXIT_OK


def cmd_sample(args) -> int:
    ckpt = _load_ckpt(args.checkpoint)
    if args.seed_text is not None:
        try:
            seed = list(ckpt.vocab.encode(args.seed_text))
        except DataError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    elif args.dataset:
        try:
            text = Path(args.dataset).read_text(encoding="utf-8")
            tokens = ckpt.vocab.encode(text)
        except OSError as exc:
            print(f"io error: {exc}", file=sys.stderr)
            return EXIT_IO
        except DataError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        from .data import Corpus
        try:
            split = split_dataset(Corpus(tokens, args.dataset), ckpt.rotation,
                                  ckpt.test_len)
        except DataError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        seed = list(split.test.tokens[:ckpt.k2])
    else:
        print("config error: need --seed-text or --dataset for the seed",
              file=sys.stderr)
        return EXIT_CONFIG

    progressive = SchemeId(ckpt.scheme).progressive_sampling
    if args.sampler:
        progressive = args.sampler == "progressive"
    rng = Rng(args.sample_seed)
    try:
        if progressive:
            out = sample_progressive(ckpt.params, ckpt.model_cfg, seed,
                                     args.n, rng, args.mode)
        else:
            out = sample_windowed(ckpt.params, ckpt.model_cfg, seed,
                                  args.n, ckpt.k2, rng, args.mode)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(ckpt.vocab.decode(out))
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        cfg = load_run_config(args.config, args.override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.bench_iters < 5:
        print(f"config error: bench_iters must be >= 5, got {cfg.bench_iters}",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        vocab, corpus = load_corpus(cfg.dataset)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DataError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    arches = []
    for spec in (args.arch or [f"{cfg.num_layers}x{cfg.hidden_size}"]):
        try:
            r, g = spec.lower().split("x")
            arches.append((int(r), int(g)))
        except ValueError:
            print(f"config error: bad --arch {spec!r}, expected RxHIDDEN",
                  file=sys.stderr)
            return EXIT_CONFIG

    out = _out_dir(cfg.out_dir)
    rows = []
    from dataclasses import replace as dc_replace
    for r, g in arches:
        mcfg = ModelConfig(vocab_size=len(vocab), num_layers=r, hidden_size=g,
                           dense_size=cfg.dense_size, leakiness=cfg.leakiness)
        params = init_parameters(mcfg, Rng(cfg.seed),
                                 cfg.train_config().dtype)
        tcfgs = [dc_replace(cfg.train_config(), scheme=SchemeId(s),
                            loss=LossSpec(k3=None, decay=cfg.decay))
                 for s in (1, 2, 3, 4)]
        results = bench_train_group(mcfg, tcfgs, corpus,
                                    warmup=cfg.bench_warmup,
                                    iters=cfg.bench_iters)
        for scheme, res in zip((1, 2, 3, 4), results):
            windowed = not SchemeId(scheme).progressive_sampling
            ms_tok, cov = bench_sample(mcfg, params, cfg.k2, windowed,
                                       n_tokens=max(20, cfg.bench_iters),
                                       warmup=cfg.bench_warmup)
            res.sample_ms_per_token, res.sample_cov = ms_tok, cov
            rows.append(res)

    with open(out / "bench.csv", "w", encoding="utf-8") as fh:
        fh.write(BENCH_HEADER + "\n")
        for r_ in rows:
            fh.write(format_bench_row(r_) + "\n")
    print(f"{'scheme':>6} {'arch':>8} {'k1':>4} {'k2':>4} "
          f"{'train ms/batch':>15} {'sample ms/tok':>14}")
    for r_ in rows:
        print(f"{r_.scheme:>6} {r_.num_layers}x{r_.hidden_size:>6} {r_.k1:>4} "
              f"{r_.k2:>4} {r_.train_ms_per_batch:>15.2f} "
              f"{r_.sample_ms_per_token:>14.3f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seed = args.seed
    cases = args.cases
    rng = Rng(seed)
    worst_overall = 0.0
    for case in range(cases):
        v = 3 + rng.integer(6)
        g = 2 + rng.integer(7)
        r = 1 + rng.integer(2)
        seq = 3 + rng.integer(8)
        dense = 4 + rng.integer(13)
        mcfg = ModelConfig(vocab_size=v, num_layers=r, hidden_size=g,
                           dense_size=dense)
        params = init_parameters(mcfg, rng.derive(f"case{case}"))
        toks = np.array([rng.integer(v) for _ in range(seq)])
        tgts = np.array([rng.integer(v) for _ in range(seq)])
        weights = loss_weights(seq, LossSpec())
        tape, _ = forward_sequence(params, mcfg, toks, initial_state(params, mcfg))
        analytic, _ = backward(tape, params, mcfg, tgts, weights, horizon=seq)
        numeric = finite_diff_gradient(params, mcfg, toks, tgts, weights)
        err = max_relative_error(analytic, numeric)
        worst_overall = max(worst_overall, err)
        status = "ok" if err < 1e-4 else "FAIL"
        print(f"case {case}: |V|={v} r={r} hidden={g} seq={seq} "
              f"max_rel_err={err:.3e} {status}")
    if worst_overall >= 1e-4:
        print(f"gradcheck failed: max relative error {worst_overall:.3e} >= 1e-4",
              file=sys.stderr)
        return EXIT_GRADCHECK
    print(f"gradcheck passed: max relative error {worst_overall:.3e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="charrnn",
                                description="character-level LSTM engine")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model per a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="test-set perplexity of a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--dataset", required=True)
    e.set_defaults(fn=cmd_eval)

    s = sub.add_parser("sample", help="generate text from a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--n", type=int, default=500)
    s.add_argument("--mode", choices=["greedy", "multinomial"],
                   default="multinomial")
    s.add_argument("--seed-text", default=None)
    s.add_argument("--dataset", default=None,
                   help="seed with the first k2 test-set tokens of this dataset")
    s.add_argument("--sampler", choices=["windowed", "progressive"], default=None,
                   help="override the scheme-recorded sampling procedure")
    s.add_argument("--sample-seed", type=int, default=0)
    s.set_defaults(fn=cmd_sample)

    b = sub.add_parser("bench", help="timing table over schemes x architectures")
    b.add_argument("--config", required=True)
    b.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    b.add_argument("--arch", action="append", default=None, metavar="RxHIDDEN")
    b.set_defaults(fn=cmd_bench)

    g = sub.add_parser("gradcheck", help="finite-difference gradient check")
    g.add_argument("--cases", type=int, default=5)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(fn=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit2 as exc:
        print(exc, file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
