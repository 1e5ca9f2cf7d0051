"""Hand-derived reverse pass over a forward tape.

The loss is a weighted sum of per-position cross-entropies; the weight vector
generalizes the mean-over-all-positions and final-position-only schemes and
the decayed variants into one backward path. Within a batch the per-position
loss is the mean over lanes, so the learning-rate meaning is batch-size
invariant. Gradients flow back through at most `horizon` time steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    ForwardTape,
    Gradients,
    ModelConfig,
    Parameters,
    forward_sequence,
    one_hot_rows,
)


def cross_entropy(y: np.ndarray, target: int) -> float:
    """-log y[target], natural log."""
    if not 0 <= target < y.shape[-1]:
        raise IndexError(f"target {target} out of range for {y.shape[-1]} classes")
    return float(-np.log(y[target]))


@dataclass
class LossSpec:
    """Loss window and decay: k3 trailing positions carry weight, optionally
    decayed linearly or exponentially toward the sequence start, then the
    weights are renormalized to sum to one."""

    k3: int | None = None          # None means the full sequence length
    decay: str = "none"            # none | linear | exponential

    def validate(self, k2: int | None = None) -> None:
        if self.decay not in ("none", "linear", "exponential"):
            raise ValueError(f"unknown decay {self.decay!r}")
        if self.k3 is not None:
            if self.k3 < 1:
                raise ValueError(f"k3 must be >= 1, got {self.k3}")
            if k2 is not None and self.k3 > k2:
                raise ValueError(f"k3 ({self.k3}) must be <= k2 ({k2})")


def loss_weights(seq_len: int, spec: LossSpec) -> np.ndarray:
    """Per-position weight vector of length seq_len, summing to one.

    Decay profiles follow position index i over the whole sequence:
    linear i/(seq_len-1), exponential exp(i - seq_len + 1); both reach 1 at
    the final position. Positions outside the k3 window get weight zero.
    """
    if seq_len < 1:
        raise ValueError(f"seq_len must be >= 1, got {seq_len}")
    k3 = seq_len if spec.k3 is None else spec.k3
    spec.validate()
    if not 1 <= k3 <= seq_len:
        raise ValueError(f"k3 ({k3}) out of range for sequence of {seq_len}")
    idx = np.arange(seq_len, dtype=np.float64)
    if spec.decay == "none":
        raw = np.ones(seq_len)
    elif spec.decay == "linear":
        raw = idx / (seq_len - 1) if seq_len > 1 else np.ones(1)
    else:
        raw = np.exp(idx - seq_len + 1)
    raw[:seq_len - k3] = 0.0
    total = raw.sum()
    if total == 0.0:
        raise ValueError("loss window collapsed to all-zero weights")
    return raw / total


def backward(tape: ForwardTape, params: Parameters, cfg: ModelConfig,
             targets: np.ndarray, weights: np.ndarray, horizon: int,
             step_clip: float | None = None) -> tuple[Gradients, float]:
    """Exact reverse-mode gradient of the weighted cross-entropy sum.

    `targets` is (T,) or (T, lanes) matching the tape; `weights` is (T,). The
    gradient w.r.t. the tape's initial state lands on the h0/c0 slots (summed
    over lanes, since every lane starts from the same learned state).
    `step_clip`, when set, clamps the state gradients flowing between steps;
    off by default, the standard clip is applied once at the end by the
    caller.
    """
    T = len(tape)
    targets = np.asarray(targets)
    tgt = targets[:, None] if targets.ndim == 1 else targets
    if tgt.shape[0] != T or len(weights) != T:
        raise ValueError(
            f"length mismatch: tape {T}, targets {tgt.shape[0]}, weights {len(weights)}")
    if T > horizon:
        raise ValueError(f"tape length {T} exceeds BPTT horizon {horizon}")

    lanes = tape.steps[0].tokens.shape[0]
    grads = params.zeros_like()
    dh_next = [np.zeros_like(s) for s in tape.initial_state.hs]
    dc_next = [np.zeros_like(s) for s in tape.initial_state.cs]
    loss = 0.0

    for t in range(T - 1, -1, -1):
        cache = tape.steps[t]
        d_above = None
        w_t = float(weights[t])
        if w_t != 0.0:
            if cache.y is None:
                raise ValueError(f"step {t} carries loss weight but no head cache")
            picked = cache.y[np.arange(lanes), tgt[t]]
            with np.errstate(divide="ignore"):  # -log 0 saturates to inf
                loss += w_t * float(np.mean(-np.log(picked)))
            dlogits = cache.y.copy()
            dlogits[np.arange(lanes), tgt[t]] -= 1.0
            dlogits *= w_t / lanes
            h_top = cache.h[-1]
            grads.dense2.w += dlogits.T @ cache.a1
            grads.dense2.b += dlogits.sum(axis=0)
            da1 = dlogits @ params.dense2.w
            dpre1 = da1 * np.where(cache.pos1, 1.0, cfg.leakiness)
            grads.dense1.w += dpre1.T @ h_top
            grads.dense1.b += dpre1.sum(axis=0)
            d_above = dpre1 @ params.dense1.w

        for li in range(cfg.num_layers - 1, -1, -1):
            lp, gl = params.layers[li], grads.layers[li]
            dh = dh_next[li] if d_above is None else dh_next[li] + d_above
            i, f, o = cache.i_g[li], cache.f_g[li], cache.o_g[li]
            g, tc = cache.g_c[li], cache.tanh_c[li]
            h_prev, c_prev = cache.h_prev[li], cache.c_prev[li]

            dpre_o = dh * tc * o * (1.0 - o)
            dc = dc_next[li] + dh * o * (1.0 - tc * tc)
            dpre_i = dc * g * i * (1.0 - i)
            dpre_f = dc * c_prev * f * (1.0 - f)
            dpre_g = dc * i * (1.0 - g * g)

            x = (one_hot_rows(cache.tokens, cfg.vocab_size, params.dtype)
                 if li == 0 else cache.h[li - 1])
            gl.u_i += dpre_i.T @ x
            gl.u_f += dpre_f.T @ x
            gl.u_c += dpre_g.T @ x
            gl.u_o += dpre_o.T @ x
            gl.w_i += dpre_i.T @ h_prev
            gl.w_f += dpre_f.T @ h_prev
            gl.w_c += dpre_g.T @ h_prev
            gl.w_o += dpre_o.T @ h_prev
            gl.p_i += (dpre_i * c_prev).sum(axis=0)
            gl.p_f += (dpre_f * c_prev).sum(axis=0)
            gl.p_o += (dpre_o * c_prev).sum(axis=0)
            gl.b_i += dpre_i.sum(axis=0)
            gl.b_f += dpre_f.sum(axis=0)
            gl.b_c += dpre_g.sum(axis=0)
            gl.b_o += dpre_o.sum(axis=0)

            dh_prev = dpre_i @ lp.w_i + dpre_f @ lp.w_f + dpre_g @ lp.w_c + dpre_o @ lp.w_o
            dc_prev = dc * f + dpre_i * lp.p_i + dpre_f * lp.p_f + dpre_o * lp.p_o
            if step_clip is not None:
                np.clip(dh_prev, -step_clip, step_clip, out=dh_prev)
                np.clip(dc_prev, -step_clip, step_clip, out=dc_prev)
            dh_next[li], dc_next[li] = dh_prev, dc_prev
            d_above = None if li == 0 else (
                dpre_i @ lp.u_i + dpre_f @ lp.u_f + dpre_g @ lp.u_c + dpre_o @ lp.u_o)

    for li in range(cfg.num_layers):
        grads.layers[li].h0 += dh_next[li].sum(axis=0)
        grads.layers[li].c0 += dc_next[li].sum(axis=0)
    return grads, loss


def sequence_loss(tape: ForwardTape, targets: np.ndarray, weights: np.ndarray) -> float:
    """Weighted cross-entropy of an already-run tape (forward only)."""
    targets = np.asarray(targets)
    tgt = targets[:, None] if targets.ndim == 1 else targets
    lanes = tape.steps[0].tokens.shape[0]
    loss = 0.0
    for t, w_t in enumerate(weights):
        if w_t == 0.0:
            continue
        picked = tape.steps[t].y[np.arange(lanes), tgt[t]]
        with np.errstate(divide="ignore"):
            loss += float(w_t) * float(np.mean(-np.log(picked)))
    return loss


def clip_elementwise(grads: Gradients, threshold: float) -> Gradients:
    """Clamp every gradient entry to [-threshold, threshold], in place."""
    if threshold <= 0:
        raise ValueError(f"clip threshold must be positive, got {threshold}")
    for _, a in grads.tensors():
        np.clip(a, -threshold, threshold, out=a)
    return grads


def finite_diff_gradient(params: Parameters, cfg: ModelConfig, tokens,
                         targets, weights, eps: float = 1e-5,
                         state_in=None) -> Gradients:
    """Central-difference gradient of the same weighted loss, one scalar at a
    time. Forward-only: the oracle never touches `backward`.

    The loss is evaluated in extended precision where the platform has it
    (80-bit on x86), so the difference quotient is not swamped by float64
    round-off for gradient entries near the comparison floor.
    """
    from .model import LstmState, initial_state

    if params.dtype != np.float64:
        raise ValueError("finite differences need 64-bit parameters")
    wide = np.longdouble if np.finfo(np.longdouble).eps < 1e-17 else np.float64
    work = params.astype(wide)
    tgt = np.asarray(targets)
    tgt = tgt[:, None] if tgt.ndim == 1 else tgt

    def loss_now():
        if state_in is None:
            state = initial_state(work, cfg)
        else:
            state = LstmState([h.astype(wide) for h in state_in.hs],
                              [c.astype(wide) for c in state_in.cs])
        tape, _ = forward_sequence(work, cfg, tokens, state)
        lanes = tape.steps[0].tokens.shape[0]
        total = wide(0.0)
        for t, w_t in enumerate(weights):
            if w_t == 0.0:
                continue
            picked = tape.steps[t].y[np.arange(lanes), tgt[t]]
            total += wide(w_t) * np.mean(-np.log(picked))
        return total

    eps_w = wide(eps)
    grads = params.zeros_like()
    for (name, p_arr), (_, g_arr) in zip(work.tensors(), grads.tensors()):
        flat_p, flat_g = p_arr.ravel(), g_arr.ravel()
        if not np.shares_memory(flat_p, p_arr):
            raise ValueError(f"{name} is not row-major contiguous")
        for idx in range(flat_p.size):
            orig = flat_p[idx]
            flat_p[idx] = orig + eps_w
            up = loss_now()
            flat_p[idx] = orig - eps_w
            down = loss_now()
            flat_p[idx] = orig
            flat_g[idx] = float((up - down) / (2.0 * eps_w))
    return grads


def max_relative_error(analytic: Gradients, numeric: Gradients,
                       floor: float = 1e-8) -> float:
    """Max over entries of |a-n| / max(|a|,|n|), skipping entries where both
    magnitudes sit below the floor."""
    worst = 0.0
    for (_, a), (_, n) in zip(analytic.tensors(), numeric.tensors()):
        aa, nn = np.abs(a), np.abs(n)
        mask = (aa >= floor) | (nn >= floor)
        if not mask.any():
            continue
        rel = np.abs(a - n)[mask] / np.maximum(aa, nn)[mask]
        worst = max(worst, float(rel.max()))
    return worst
