"""Test-set perplexity, the log-spaced evaluation schedule, and wall-clock
benchmarks for training and sampling.

Perplexity is exp of the mean negative natural-log probability of the true
next token, after the state has been burned in on the first k2 test tokens
starting from the learned initial state. A model with uniform outputs scores
exactly the vocabulary size.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .data import Corpus
from .model import ModelConfig, Parameters, initial_state, step_batch


def perplexity(params: Parameters, cfg: ModelConfig, test: Corpus, k2: int) -> float:
    """One continuous pass over the test corpus; the first k2 tokens only
    condition the state, every later token is scored."""
    tokens = np.asarray(test.tokens)
    n = len(tokens)
    if n <= k2:
        raise ValueError(f"test corpus of {n} tokens is too short for k2={k2}")
    state = initial_state(params, cfg)
    nll = 0.0
    scored = n - k2
    for t in range(n - 1):
        want_head = t >= k2 - 1
        cache, state = step_batch(params, cfg, tokens[t:t + 1], state,
                                  want_head=want_head)
        if want_head:
            with np.errstate(divide="ignore"):
                nll += -float(np.log(cache.y[0][tokens[t + 1]]))
    return float(np.exp(nll / scored))


def eval_schedule(total_batches: int, points: int = 40) -> list[int]:
    """Unique sorted log-spaced batch indices from 1 to total_batches, both
    endpoints always present."""
    if total_batches < 1:
        raise ValueError(f"total_batches must be >= 1, got {total_batches}")
    raw = np.logspace(0.0, np.log10(total_batches), num=max(points, 2))
    idx = sorted(set(int(i) for i in np.rint(raw)))
    idx = [i for i in idx if 1 <= i <= total_batches]
    if idx[0] != 1:
        idx.insert(0, 1)
    if idx[-1] != total_batches:
        idx.append(total_batches)
    return idx


@dataclass
class MetricsRecord:
    batch_index: int
    sequences_seen: int
    wall_ms: float
    train_loss: float
    test_perplexity: float


METRICS_HEADER = "batch_index,sequences_seen,wall_ms,train_loss,test_perplexity"


def format_metrics_row(rec: MetricsRecord) -> str:
    return (f"{rec.batch_index},{rec.sequences_seen},{rec.wall_ms:.17g},"
            f"{rec.train_loss:.17g},{rec.test_perplexity:.17g}")


@dataclass
class BenchResult:
    scheme: int
    num_layers: int
    hidden_size: int
    k1: int
    k2: int
    train_ms_per_batch: float = float("nan")
    sample_ms_per_token: float = float("nan")
    train_cov: float = float("nan")
    sample_cov: float = float("nan")


BENCH_HEADER = ("scheme,num_layers,hidden_size,k1,k2,"
                "train_ms_per_batch,sample_ms_per_token,train_cov,sample_cov")


def format_bench_row(r: BenchResult) -> str:
    return (f"{r.scheme},{r.num_layers},{r.hidden_size},{r.k1},{r.k2},"
            f"{r.train_ms_per_batch:.17g},{r.sample_ms_per_token:.17g},"
            f"{r.train_cov:.17g},{r.sample_cov:.17g}")


def _timed_mean_ms(fn, warmup: int, iters: int,
                   trim_top: float = 0.0) -> tuple[float, float]:
    """Mean ms per call and coefficient of variation over the warm iters.
    `trim_top` drops that fraction of the slowest samples (one-sided:
    scheduler stalls on shared hosts only ever add time)."""
    for _ in range(warmup):
        fn()
    samples = np.empty(iters)
    for k in range(iters):
        t0 = time.perf_counter()
        fn()
        samples[k] = (time.perf_counter() - t0) * 1000.0
    kept = np.sort(samples)[:iters - int(iters * trim_top)]
    mean = float(kept.mean())
    cov = float(kept.std() / mean) if mean > 0 else float("inf")
    return mean, cov


def _train_batch_closure(model_cfg: ModelConfig, tcfg, corpus: Corpus):
    from .data import batch_offsets, make_batch
    from .model import init_parameters, zero_state
    from .numerics import Rng
    from .optim import AdamState
    from .schemes import train_step_scheme123, train_step_scheme4

    params = init_parameters(model_cfg, Rng(tcfg.seed), tcfg.dtype)
    opt = AdamState.init(params, lr=tcfg.learning_rate)
    lane_states = zero_state(model_cfg, tcfg.lanes, tcfg.dtype)
    loss_spec = tcfg.resolved_loss()
    counter = [0]

    def one_batch():
        offsets = batch_offsets(counter[0], tcfg.k1, len(corpus), tcfg.lanes)
        batch = make_batch(corpus, offsets, tcfg.k2)
        counter[0] += 1
        if tcfg.scheme.carries_state:
            train_step_scheme4(params, model_cfg, tcfg, batch, lane_states, opt)
        else:
            train_step_scheme123(params, model_cfg, tcfg, batch, loss_spec, opt)

    return one_batch


def bench_train(model_cfg: ModelConfig, tcfg, corpus: Corpus,
                warmup: int = 5, iters: int = 20) -> BenchResult:
    """Mean wall-clock ms per training batch after warmup."""
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    one_batch = _train_batch_closure(model_cfg, tcfg, corpus)
    mean, cov = _timed_mean_ms(one_batch, warmup, iters)
    return BenchResult(scheme=int(tcfg.scheme), num_layers=model_cfg.num_layers,
                       hidden_size=model_cfg.hidden_size, k1=tcfg.k1, k2=tcfg.k2,
                       train_ms_per_batch=mean, train_cov=cov)


def bench_train_group(model_cfg: ModelConfig, tcfgs, corpus: Corpus,
                      warmup: int = 5, iters: int = 20,
                      trim_top: float = 0.0) -> list[BenchResult]:
    """Train-time comparison across configs with interleaved iterations, so
    slow load drift on the host lands evenly on every mean: the honest way to
    compare near-equal per-batch costs.

    `trim_top` drops that fraction of the slowest samples per config before
    averaging. Scheduler stalls on shared hosts only ever add time, so the
    trim is one-sided; at least 20 samples must survive it. The order of
    configs inside each round is shuffled (seeded) so host-speed oscillation
    cannot correlate with a config's position in the round.
    """
    import gc

    from .numerics import Rng

    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    keep = iters - int(iters * trim_top)
    if trim_top > 0 and keep < 20:
        raise ValueError(f"trim leaves {keep} samples, need >= 20")
    closures = [_train_batch_closure(model_cfg, t, corpus) for t in tcfgs]
    for fn in closures:
        for _ in range(warmup):
            fn()
    order_rng = Rng(0xBE7C)
    samples = np.empty((len(closures), iters))
    for k in range(iters):
        for ci in np.argsort(order_rng.raw_u64(len(closures))):
            gc.collect()  # keep collection debt out of the timed region
            t0 = time.perf_counter()
            closures[ci]()
            samples[ci, k] = (time.perf_counter() - t0) * 1000.0
    out = []
    for ci, tcfg in enumerate(tcfgs):
        kept = np.sort(samples[ci])[:keep]
        mean = float(kept.mean())
        cov = float(kept.std() / mean) if mean > 0 else float("inf")
        out.append(BenchResult(scheme=int(tcfg.scheme),
                               num_layers=model_cfg.num_layers,
                               hidden_size=model_cfg.hidden_size,
                               k1=tcfg.k1, k2=tcfg.k2,
                               train_ms_per_batch=mean, train_cov=cov))
    return out


def bench_sample(model_cfg: ModelConfig, params: Parameters, k2: int,
                 windowed: bool, n_tokens: int = 20, warmup: int = 5,
                 seed_tokens=None, trim_top: float = 0.0) -> tuple[float, float]:
    """Mean ms per generated token (and CoV). Windowed pays k2 forward steps
    per token; progressive pays one. The progressive bootstrap over the seed
    happens once, outside the timed region."""
    from .model import initial_state as init_state
    from .schemes import draw_token

    seed = (list(seed_tokens) if seed_tokens is not None
            else [i % model_cfg.vocab_size for i in range(k2)])
    if windowed:
        seq = list(seed)

        def one_token():
            state = init_state(params, model_cfg)
            y = None
            for tok in seq[-k2:]:
                cache, state = step_batch(params, model_cfg, np.array([tok]), state)
                y = cache.y[0]
            seq.append(draw_token(y, None, "greedy"))
    else:
        state = init_state(params, model_cfg)
        y_box = [None]
        for tok in seed:
            cache, state = step_batch(params, model_cfg, np.array([tok]), state)
            y_box[0] = cache.y[0]
        holder = [state]

        def one_token():
            t = draw_token(y_box[0], None, "greedy")
            cache, holder[0] = step_batch(params, model_cfg, np.array([t]), holder[0])
            y_box[0] = cache.y[0]

    return _timed_mean_ms(one_token, warmup, n_tokens, trim_top)
