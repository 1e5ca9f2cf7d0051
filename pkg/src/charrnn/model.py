"""Stacked peephole-LSTM network with a leaky-ReLU dense layer and softmax head.

All state-carrying arrays have a leading lane axis: a single sequence is a
batch of one lane, and the 64-lane training batches reuse the same kernels.
The forward pass records a tape of per-step activations so the hand-written
reverse pass in `bptt` never has to recompute anything.

Gate equations per layer (peephole connections read the *previous* cell
state in all three gates):

    i = sigmoid(x U_i^T + h_prev W_i^T + p_i * c_prev + b_i)
    f = sigmoid(x U_f^T + h_prev W_f^T + p_f * c_prev + b_f)
    g = tanh   (x U_c^T + h_prev W_c^T + b_c)
    c = f * c_prev + i * g
    o = sigmoid(x U_o^T + h_prev W_o^T + p_o * c_prev + b_o)
    h = o * tanh(c)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    F64,
    Rng,
    glorot_uniform_init,
    leaky_relu,
    orthogonal_init,
    sigmoid,
    softmax,
)


@dataclass
class ModelConfig:
    vocab_size: int
    num_layers: int = 1
    hidden_size: int = 512
    dense_size: int = 1024
    leakiness: float = 0.01

    def validate(self) -> None:
        for name in ("vocab_size", "num_layers", "hidden_size", "dense_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.leakiness < 0:
            raise ValueError(f"leakiness must be >= 0, got {self.leakiness}")

    def layer_input_size(self, layer: int) -> int:
        # layer 0 reads the one-hot token, deeper layers read the h below
        return self.vocab_size if layer == 0 else self.hidden_size


@dataclass
class LayerParams:
    """One LSTM layer: input matrices u_*, recurrent matrices w_*, peephole
    vectors p_*, biases b_*, and the learned initial state h0/c0."""

    u_i: np.ndarray
    u_f: np.ndarray
    u_c: np.ndarray
    u_o: np.ndarray
    w_i: np.ndarray
    w_f: np.ndarray
    w_c: np.ndarray
    w_o: np.ndarray
    p_i: np.ndarray
    p_f: np.ndarray
    p_o: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray
    h0: np.ndarray
    c0: np.ndarray

    FIELDS = ("u_i", "u_f", "u_c", "u_o", "w_i", "w_f", "w_c", "w_o",
              "p_i", "p_f", "p_o", "b_i", "b_f", "b_c", "b_o", "h0", "c0")


@dataclass
class DenseParams:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)


@dataclass
class Parameters:
    """Every trainable tensor. `tensors()` yields them in a fixed declaration
    order that the optimizer, clipping, checkpoints and gradient checks all
    share. Gradients use this same container shape-for-shape."""

    layers: list[LayerParams]
    dense1: DenseParams
    dense2: DenseParams

    def tensors(self):
        for li, layer in enumerate(self.layers):
            for name in LayerParams.FIELDS:
                yield f"layer{li}.{name}", getattr(layer, name)
        yield "dense1.w", self.dense1.w
        yield "dense1.b", self.dense1.b
        yield "dense2.w", self.dense2.w
        yield "dense2.b", self.dense2.b

    def arrays(self) -> list[np.ndarray]:
        return [a for _, a in self.tensors()]

    @property
    def dtype(self) -> np.dtype:
        return self.layers[0].u_i.dtype

    def copy(self) -> "Parameters":
        return _map_params(self, np.copy)

    def zeros_like(self) -> "Parameters":
        return _map_params(self, np.zeros_like)

    def astype(self, dtype) -> "Parameters":
        return _map_params(self, lambda a: a.astype(dtype))

    def count(self) -> int:
        return sum(a.size for a in self.arrays())


# gradients are shape-congruent to the parameters; same container
Gradients = Parameters


def _map_params(p: Parameters, fn) -> Parameters:
    layers = [
        LayerParams(**{name: fn(getattr(layer, name)) for name in LayerParams.FIELDS})
        for layer in p.layers
    ]
    return Parameters(
        layers=layers,
        dense1=DenseParams(fn(p.dense1.w), fn(p.dense1.b)),
        dense2=DenseParams(fn(p.dense2.w), fn(p.dense2.b)),
    )


def init_parameters(cfg: ModelConfig, rng: Rng, dtype=F64) -> Parameters:
    """Orthogonal LSTM matrices, glorot-uniform dense layers, zero biases,
    zero peepholes and zero learned initial state. Draws are consumed in
    declaration order so a seed pins every tensor."""
    cfg.validate()
    g = cfg.hidden_size
    layers = []
    for li in range(cfg.num_layers):
        d_in = cfg.layer_input_size(li)
        layers.append(LayerParams(
            u_i=orthogonal_init(g, d_in, rng, dtype),
            u_f=orthogonal_init(g, d_in, rng, dtype),
            u_c=orthogonal_init(g, d_in, rng, dtype),
            u_o=orthogonal_init(g, d_in, rng, dtype),
            w_i=orthogonal_init(g, g, rng, dtype),
            w_f=orthogonal_init(g, g, rng, dtype),
            w_c=orthogonal_init(g, g, rng, dtype),
            w_o=orthogonal_init(g, g, rng, dtype),
            p_i=np.zeros(g, dtype), p_f=np.zeros(g, dtype), p_o=np.zeros(g, dtype),
            b_i=np.zeros(g, dtype), b_f=np.zeros(g, dtype),
            b_c=np.zeros(g, dtype), b_o=np.zeros(g, dtype),
            h0=np.zeros(g, dtype), c0=np.zeros(g, dtype),
        ))
    return Parameters(
        layers=layers,
        dense1=DenseParams(
            w=glorot_uniform_init(cfg.dense_size, g, rng, dtype),
            b=np.zeros(cfg.dense_size, dtype),
        ),
        dense2=DenseParams(
            w=glorot_uniform_init(cfg.vocab_size, cfg.dense_size, rng, dtype),
            b=np.zeros(cfg.vocab_size, dtype),
        ),
    )


def zero_parameters(cfg: ModelConfig, dtype=F64) -> Parameters:
    """All-zero parameter set with the shapes implied by cfg."""
    cfg.validate()
    g = cfg.hidden_size
    layers = []
    for li in range(cfg.num_layers):
        d_in = cfg.layer_input_size(li)
        kw = {n: np.zeros((g, d_in), dtype) for n in ("u_i", "u_f", "u_c", "u_o")}
        kw.update({n: np.zeros((g, g), dtype) for n in ("w_i", "w_f", "w_c", "w_o")})
        kw.update({n: np.zeros(g, dtype) for n in
                   ("p_i", "p_f", "p_o", "b_i", "b_f", "b_c", "b_o", "h0", "c0")})
        layers.append(LayerParams(**kw))
    return Parameters(
        layers=layers,
        dense1=DenseParams(np.zeros((cfg.dense_size, g), dtype),
                           np.zeros(cfg.dense_size, dtype)),
        dense2=DenseParams(np.zeros((cfg.vocab_size, cfg.dense_size), dtype),
                           np.zeros(cfg.vocab_size, dtype)),
    )


def one_hot(t: int, size: int, dtype=F64) -> np.ndarray:
    if not 0 <= t < size:
        raise IndexError(f"token id {t} out of range for vocabulary of {size}")
    v = np.zeros(size, dtype)
    v[t] = 1.0
    return v


def one_hot_rows(tokens: np.ndarray, size: int, dtype) -> np.ndarray:
    """(lanes,) token ids -> (lanes, size) one-hot matrix."""
    tokens = np.asarray(tokens)
    if tokens.min() < 0 or tokens.max() >= size:
        bad = tokens[(tokens < 0) | (tokens >= size)][0]
        raise IndexError(f"token id {bad} out of range for vocabulary of {size}")
    x = np.zeros((tokens.shape[0], size), dtype)
    x[np.arange(tokens.shape[0]), tokens] = 1.0
    return x


@dataclass
class LstmState:
    """Hidden and cell vectors per layer, one row per lane: each entry is a
    (lanes, hidden_size) array."""

    hs: list[np.ndarray]
    cs: list[np.ndarray]

    @property
    def lanes(self) -> int:
        return self.hs[0].shape[0]

    def copy(self) -> "LstmState":
        return LstmState([h.copy() for h in self.hs], [c.copy() for c in self.cs])


def initial_state(params: Parameters, cfg: ModelConfig, lanes: int = 1) -> LstmState:
    """The learned (h0, c0), copied and broadcast to the requested lane count."""
    return LstmState(
        hs=[np.tile(l.h0, (lanes, 1)) for l in params.layers],
        cs=[np.tile(l.c0, (lanes, 1)) for l in params.layers],
    )


def zero_state(cfg: ModelConfig, lanes: int, dtype=F64) -> LstmState:
    g = cfg.hidden_size
    return LstmState(
        hs=[np.zeros((lanes, g), dtype) for _ in range(cfg.num_layers)],
        cs=[np.zeros((lanes, g), dtype) for _ in range(cfg.num_layers)],
    )


@dataclass
class StepCache:
    """Per-step activations the backward pass consumes. Head fields are None
    on steps where the output distribution was not needed (single-loss
    training skips the dense head for zero-weight positions)."""

    tokens: np.ndarray                 # (lanes,)
    i_g: list[np.ndarray]              # per layer, (lanes, hidden)
    f_g: list[np.ndarray]
    o_g: list[np.ndarray]
    g_c: list[np.ndarray]              # tanh candidate
    c: list[np.ndarray]
    tanh_c: list[np.ndarray]
    h: list[np.ndarray]
    h_prev: list[np.ndarray]           # references into the previous step
    c_prev: list[np.ndarray]
    a1: np.ndarray | None = None       # dense1 output after leaky ReLU
    pos1: np.ndarray | None = None     # dense1 pre-activation >= 0 mask
    y: np.ndarray | None = None        # softmax output, (lanes, vocab)


@dataclass
class ForwardTape:
    initial_state: LstmState
    steps: list[StepCache] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)


def _lstm_layer_step(lp: LayerParams, x, h_prev, c_prev):
    i = sigmoid(x @ lp.u_i.T + h_prev @ lp.w_i.T + lp.p_i * c_prev + lp.b_i)
    f = sigmoid(x @ lp.u_f.T + h_prev @ lp.w_f.T + lp.p_f * c_prev + lp.b_f)
    g = np.tanh(x @ lp.u_c.T + h_prev @ lp.w_c.T + lp.b_c)
    c = f * c_prev + i * g
    o = sigmoid(x @ lp.u_o.T + h_prev @ lp.w_o.T + lp.p_o * c_prev + lp.b_o)
    tc = np.tanh(c)
    h = o * tc
    return i, f, o, g, c, tc, h


def lstm_step(params: Parameters, layer: int, x: np.ndarray, state_in):
    """Single-vector LSTM step for one layer; returns (h', c', gate_cache)."""
    h_prev, c_prev = state_in
    i, f, o, g, c, tc, h = _lstm_layer_step(
        params.layers[layer], x[None, :], h_prev[None, :], c_prev[None, :])
    cache = {"i": i[0], "f": f[0], "o": o[0], "g": g[0], "tanh_c": tc[0]}
    return h[0], c[0], cache


def step_batch(params: Parameters, cfg: ModelConfig, tokens: np.ndarray,
               state: LstmState, want_head: bool = True) -> tuple[StepCache, LstmState]:
    """Advance every lane by one token. Mutates nothing; returns the cache and
    the new state (arrays shared between the two)."""
    x = one_hot_rows(tokens, cfg.vocab_size, params.dtype)
    cache = StepCache(tokens=np.asarray(tokens), i_g=[], f_g=[], o_g=[], g_c=[],
                      c=[], tanh_c=[], h=[], h_prev=[], c_prev=[])
    inp = x
    new_hs, new_cs = [], []
    for li, lp in enumerate(params.layers):
        h_prev, c_prev = state.hs[li], state.cs[li]
        i, f, o, g, c, tc, h = _lstm_layer_step(lp, inp, h_prev, c_prev)
        cache.i_g.append(i); cache.f_g.append(f); cache.o_g.append(o)
        cache.g_c.append(g); cache.c.append(c); cache.tanh_c.append(tc)
        cache.h.append(h); cache.h_prev.append(h_prev); cache.c_prev.append(c_prev)
        new_hs.append(h); new_cs.append(c)
        inp = h
    if want_head:
        pre1 = inp @ params.dense1.w.T + params.dense1.b
        cache.pos1 = pre1 >= 0
        cache.a1 = leaky_relu(pre1, cfg.leakiness)
        logits = cache.a1 @ params.dense2.w.T + params.dense2.b
        cache.y = softmax(logits)
    return cache, LstmState(new_hs, new_cs)


def forward_step(params: Parameters, cfg: ModelConfig, token: int,
                 state_in: LstmState):
    """One token through the full network: (y, state_out, cache)."""
    cache, state_out = step_batch(params, cfg, np.array([token]), state_in)
    return cache.y[0], state_out, cache


def forward_sequence(params: Parameters, cfg: ModelConfig, tokens,
                     state_in: LstmState, head_steps=None,
                     capture_after: int | None = None):
    """Run a token sequence, recording the tape.

    `tokens` is (T,) for one lane or (T, lanes). `head_steps`, when given, is
    a boolean mask of the steps that need the dense head. `capture_after`
    copies the state after that many tokens (conditional multi-loss training
    carries it to the next batch). Returns (tape, state_out) or
    (tape, state_out, captured).
    """
    tokens = np.asarray(tokens)
    if tokens.size == 0:
        raise ValueError("forward_sequence needs at least one token")
    rows = tokens[:, None] if tokens.ndim == 1 else tokens
    tape = ForwardTape(initial_state=state_in.copy())
    state = state_in
    captured = None
    for t in range(rows.shape[0]):
        want = True if head_steps is None else bool(head_steps[t])
        cache, state = step_batch(params, cfg, rows[t], state, want_head=want)
        tape.steps.append(cache)
        if capture_after is not None and t == capture_after - 1:
            captured = state.copy()
    if capture_after is not None:
        return tape, state, captured
    return tape, state


def parameter_count(cfg: ModelConfig) -> int:
    """Closed-form trainable-scalar count implied by the declared shapes."""
    g, v, d = cfg.hidden_size, cfg.vocab_size, cfg.dense_size
    total = 0
    for li in range(cfg.num_layers):
        d_in = cfg.layer_input_size(li)
        total += 4 * (g * d_in + g * g + g)   # u_*, w_*, b_*
        total += 3 * g                        # peepholes
        total += 2 * g                        # learned h0, c0
    total += d * g + d                        # dense1
    total += v * d + v                        # dense2
    return total
