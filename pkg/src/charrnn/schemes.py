"""The four training/sampling schemes and the batched training loop.

Scheme 1: multi-loss training, windowed sampling.
Scheme 2: single-loss training (loss on the final position only), windowed.
Scheme 3: multi-loss training, progressive sampling.
Scheme 4: conditional multi-loss training (per-lane hidden state carried
          across batches, captured after k1 tokens), progressive sampling.

Schemes 1-3 start every lane from the learned initial state and train it
alongside the weights. Scheme 4 starts lanes from the carried state (a
constant for the backward pass: gradients never flow into a previous batch),
resets the carried states to zero at each epoch boundary, and does not learn
an initial state at all.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import data as data_mod
from .bptt import LossSpec, backward, clip_elementwise, loss_weights
from .data import Batch, Corpus, batch_offsets, batches_per_epoch, circular_shift, make_batch
from .model import (
    LstmState,
    ModelConfig,
    Parameters,
    forward_sequence,
    init_parameters,
    initial_state,
    zero_state,
)
from .numerics import Rng, resolve_dtype
from .optim import AdamState, adam_step


class SchemeId(enum.IntEnum):
    SCHEME1 = 1
    SCHEME2 = 2
    SCHEME3 = 3
    SCHEME4 = 4

    @property
    def single_loss(self) -> bool:
        return self is SchemeId.SCHEME2

    @property
    def carries_state(self) -> bool:
        return self is SchemeId.SCHEME4

    @property
    def progressive_sampling(self) -> bool:
        return self in (SchemeId.SCHEME3, SchemeId.SCHEME4)

    def default_k3(self, k2: int) -> int:
        return 1 if self.single_loss else k2


@dataclass
class TrainConfig:
    scheme: SchemeId
    k1: int
    k2: int
    lanes: int = data_mod.DEFAULT_LANES
    total_batches: int = 12_800
    learning_rate: float = 0.001
    clip: float = 50.0
    loss: LossSpec = field(default_factory=LossSpec)
    seed: int = 0
    precision: str = "f64"
    step_clip: float | None = None   # optional per-step state-gradient clamp

    def validate(self) -> None:
        if not 1 <= self.k1 <= self.k2:
            raise ValueError(f"need 1 <= k1 <= k2, got k1={self.k1}, k2={self.k2}")
        if self.lanes < 1 or self.total_batches < 1:
            raise ValueError("lanes and total_batches must be >= 1")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.clip <= 0:
            raise ValueError(f"clip must be positive, got {self.clip}")
        self.loss.validate(self.k2)
        k3 = self.resolved_k3()
        if self.scheme.single_loss and k3 != 1:
            raise ValueError(f"scheme 2 requires k3=1, got {k3}")
        resolve_dtype(self.precision)

    def resolved_k3(self) -> int:
        return self.loss.k3 if self.loss.k3 is not None else self.scheme.default_k3(self.k2)

    def resolved_loss(self) -> LossSpec:
        return replace(self.loss, k3=self.resolved_k3())

    @property
    def dtype(self):
        return resolve_dtype(self.precision)


def train_step_scheme123(params: Parameters, cfg: ModelConfig, tcfg: TrainConfig,
                         batch: Batch, loss_spec: LossSpec,
                         opt_state: AdamState):
    """One update for schemes 1-3: every lane starts from the learned initial
    state; weights AND h0/c0 take the Adam step."""
    weights = loss_weights(batch.inputs.shape[0], loss_spec)
    state0 = initial_state(params, cfg, lanes=batch.inputs.shape[1])
    tape, _ = forward_sequence(params, cfg, batch.inputs, state0,
                               head_steps=weights != 0.0)
    grads, loss = backward(tape, params, cfg, batch.targets, weights,
                           horizon=tcfg.k2, step_clip=tcfg.step_clip)
    clip_elementwise(grads, tcfg.clip)
    params, opt_state = adam_step(params, grads, opt_state)
    return params, opt_state, loss


def train_step_scheme4(params: Parameters, cfg: ModelConfig, tcfg: TrainConfig,
                       batch: Batch, lane_states: LstmState,
                       opt_state: AdamState):
    """One update for scheme 4: lanes resume from the carried state, the
    state after k1 tokens is captured for the next batch, and the carried-in
    state is a constant (its gradient is discarded, as is any h0/c0 update)."""
    weights = loss_weights(batch.inputs.shape[0], tcfg.resolved_loss())
    tape, _, captured = forward_sequence(params, cfg, batch.inputs, lane_states,
                                         head_steps=weights != 0.0,
                                         capture_after=tcfg.k1)
    grads, loss = backward(tape, params, cfg, batch.targets, weights,
                           horizon=tcfg.k2, step_clip=tcfg.step_clip)
    for gl in grads.layers:
        gl.h0[:] = 0.0
        gl.c0[:] = 0.0
    clip_elementwise(grads, tcfg.clip)
    params, opt_state = adam_step(params, grads, opt_state)
    return params, opt_state, captured, loss


def draw_token(y: np.ndarray, rng: Rng | None, mode: str) -> int:
    """Greedy argmax (lowest index wins ties) or inverse-CDF multinomial."""
    if mode == "greedy":
        return int(np.argmax(y))
    if mode == "multinomial":
        u = rng.uniform(()) * 1.0
        cdf = np.cumsum(y.astype(np.float64))
        idx = int(np.searchsorted(cdf, u, side="right"))
        return min(idx, len(y) - 1)
    raise ValueError(f"unknown sampling mode {mode!r}")


def sample_windowed(params: Parameters, cfg: ModelConfig, seed_seq,
                    n: int, k2: int, rng: Rng | None, mode: str) -> list[int]:
    """Generate n tokens, resetting the state to the learned representation
    and re-feeding the trailing k2 tokens before each draw."""
    seq = [int(t) for t in seed_seq]
    if len(seq) < k2:
        raise ValueError(f"seed of {len(seq)} tokens is shorter than k2={k2}")
    for _ in range(n):
        state = initial_state(params, cfg)
        y = None
        for tok in seq[-k2:]:
            cache, state = _step_one(params, cfg, tok, state)
            y = cache.y[0]
        seq.append(draw_token(y, rng, mode))
    return seq


def sample_progressive(params: Parameters, cfg: ModelConfig, seed_seq,
                       n: int, rng: Rng | None, mode: str) -> list[int]:
    """Generate n tokens feeding each draw straight back in; the state starts
    from the learned representation for the seed and is never reset."""
    seq = [int(t) for t in seed_seq]
    if not seq:
        raise ValueError("progressive sampling needs a non-empty seed")
    state = initial_state(params, cfg)
    y = None
    for tok in seq:
        cache, state = _step_one(params, cfg, tok, state)
        y = cache.y[0]
    for _ in range(n):
        t = draw_token(y, rng, mode)
        seq.append(t)
        cache, state = _step_one(params, cfg, t, state)
        y = cache.y[0]
    return seq


def _step_one(params, cfg, token, state):
    from .model import step_batch
    return step_batch(params, cfg, np.array([token]), state)


@dataclass
class TrainHooks:
    """Callbacks the loop fires; the CLI wires these to metrics/log files."""
    on_batch: callable = None      # (batch_index, loss, params) after each update
    should_stop: callable = None   # (batch_index, loss) -> bool


@dataclass
class TrainResult:
    params: Parameters
    model_cfg: ModelConfig
    losses: list[float]
    batches_run: int


def train(model_cfg: ModelConfig, tcfg: TrainConfig, train_corpus: Corpus,
          hooks: TrainHooks | None = None) -> TrainResult:
    """Run the full batched loop for the configured scheme.

    An epoch ends once the batch stride has swept one inter-lane gap
    (i*k1 >= floor(train_len/lanes)); the train set is then circularly
    shifted by a seeded random amount, the in-epoch counter resets, and
    scheme 4's carried lane states drop back to zero.
    """
    tcfg.validate()
    model_cfg.validate()
    hooks = hooks or TrainHooks()
    dtype = tcfg.dtype
    rng = Rng(tcfg.seed)
    params = init_parameters(model_cfg, rng.derive("init"), dtype)
    shift_rng = rng.derive("epoch-shift")
    opt_state = AdamState.init(params, lr=tcfg.learning_rate)
    loss_spec = tcfg.resolved_loss()

    corpus = train_corpus
    epoch_len = batches_per_epoch(len(corpus), tcfg.lanes, tcfg.k1)
    lane_states = zero_state(model_cfg, tcfg.lanes, dtype)
    losses: list[float] = []
    i_epoch = 0

    for b in range(1, tcfg.total_batches + 1):
        if i_epoch >= epoch_len:
            corpus = circular_shift(corpus, shift_rng.integer(len(corpus)))
            lane_states = zero_state(model_cfg, tcfg.lanes, dtype)
            i_epoch = 0
        offsets = batch_offsets(i_epoch, tcfg.k1, len(corpus), tcfg.lanes)
        batch = make_batch(corpus, offsets, tcfg.k2)
        if tcfg.scheme.carries_state:
            params, opt_state, lane_states, loss = train_step_scheme4(
                params, model_cfg, tcfg, batch, lane_states, opt_state)
        else:
            params, opt_state, loss = train_step_scheme123(
                params, model_cfg, tcfg, batch, loss_spec, opt_state)
        losses.append(loss)
        i_epoch += 1
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite loss at batch {b}")
        if hooks.on_batch is not None:
            hooks.on_batch(b, loss, params)
        if hooks.should_stop is not None and hooks.should_stop(b, loss):
            return TrainResult(params, model_cfg, losses, b)
    return TrainResult(params, model_cfg, losses, tcfg.total_batches)


class NumericalError(RuntimeError):
    """Training produced a non-finite loss."""
