"""Dense float array primitives: activations, softmax, seeded RNG, initializers.

Matrices are 2-D numpy arrays in row-major (C) order, vectors are 1-D arrays.
Precision is a run-level switch: every routine here preserves the dtype of its
inputs, and initializers take an explicit dtype (float64 for gradient checks,
float32 allowed for throughput runs).
"""

from __future__ import annotations

import numpy as np

F32 = np.float32
F64 = np.float64

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def resolve_dtype(name: str) -> np.dtype:
    """Map the config-level precision name ('f32' or 'f64') to a numpy dtype."""
    table = {"f32": np.dtype(F32), "f64": np.dtype(F64)}
    if name not in table:
        raise ValueError(f"unknown precision {name!r}, expected 'f32' or 'f64'")
    return table[name]


class Rng:
    """Counter-based deterministic generator (splitmix64 output function).

    Draw i of a stream seeded with s is mix64(s + (i+1)*GOLDEN), the standard
    splitmix64 step, evaluated with wrapping 64-bit arithmetic. The counter
    advances by the number of values drawn, so identical seeds give identical
    sequences on every platform, and blocks of any size can be generated with
    vectorized integer ops.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._counter = 0

    @staticmethod
    def _mix(x: np.ndarray) -> np.ndarray:
        z = x
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))

    def raw_u64(self, n: int) -> np.ndarray:
        """Next n raw 64-bit draws."""
        start = self._counter + 1
        self._counter += n
        with np.errstate(over="ignore"):
            idx = np.arange(start, start + n, dtype=np.uint64)
            return self._mix(np.uint64(self.seed) + idx * _GOLDEN)

    def uniform(self, shape, dtype=F64) -> np.ndarray:
        """Uniform draws on [0, 1) with 53-bit resolution."""
        n = int(np.prod(shape)) if shape else 1
        bits = self.raw_u64(n) >> np.uint64(11)
        out = bits.astype(F64) * (2.0 ** -53)
        return out.reshape(shape).astype(dtype, copy=False)

    def normal(self, shape, dtype=F64) -> np.ndarray:
        """Standard normal draws via Box-Muller on consecutive uniform pairs."""
        n = int(np.prod(shape)) if shape else 1
        m = (n + 1) // 2
        bits = self.raw_u64(2 * m)
        # u1 in (0, 1] so the log is always finite
        u1 = (bits[:m] >> np.uint64(11)).astype(F64) * (2.0 ** -53) + 2.0 ** -54
        u2 = (bits[m:] >> np.uint64(11)).astype(F64) * (2.0 ** -53)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return out.reshape(shape).astype(dtype, copy=False)

    def integer(self, bound: int) -> int:
        """One draw uniform on [0, bound). Modulo reduction; bias is < 2^-40
        for any bound this artifact uses (corpus lengths, vocab sizes)."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        return int(self.raw_u64(1)[0] % np.uint64(bound))

    def derive(self, tag: str) -> "Rng":
        """Independent child stream keyed by a label (FNV-1a of the tag folded
        into the seed). Used to keep init draws separate from run-time draws."""
        h = np.uint64(0xCBF29CE484222325)
        with np.errstate(over="ignore"):
            for b in tag.encode("utf-8"):
                h = (h ^ np.uint64(b)) * np.uint64(0x100000001B3)
            return Rng(int(self._mix(np.uint64(self.seed) ^ h)))


def sigmoid(x):
    """Logistic function 1/(1+exp(-x)), saturating without overflow."""
    x = np.asarray(x)
    out = np.empty_like(x, dtype=x.dtype if x.dtype.kind == "f" else F64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else out[()]


def tanh_act(x):
    return np.tanh(x)


def leaky_relu(x, leakiness: float):
    if leakiness < 0:
        raise ValueError(f"leakiness must be >= 0, got {leakiness}")
    x = np.asarray(x)
    return np.where(x >= 0, x, x * np.asarray(leakiness, dtype=x.dtype))


def softmax(v: np.ndarray) -> np.ndarray:
    """Softmax over the last axis with max-subtraction, so the argmax entry
    never underflows to zero and the output is shift-invariant."""
    v = np.asarray(v)
    if v.size == 0:
        raise ValueError("softmax of an empty vector")
    shifted = v - v.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ValueError(f"matvec shape mismatch: matrix {m.shape} vs vector {v.shape}")
    return m @ v


def orthogonal_init(rows: int, cols: int, rng: Rng, dtype=F64) -> np.ndarray:
    """Gain-1 orthogonal matrix from the QR factorization of a Gaussian draw.

    Orthonormal rows when rows <= cols, orthonormal columns otherwise. The
    sign of each Q column is fixed from R's diagonal so the result is a
    deterministic function of the draws.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"invalid shape ({rows}, {cols})")
    flat = max(rows, cols), min(rows, cols)
    a = rng.normal(flat, dtype=F64)
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    # row-major copy: every array in this module is C-ordered
    return np.ascontiguousarray(q, dtype=dtype)


def glorot_uniform_init(rows: int, cols: int, rng: Rng, dtype=F64) -> np.ndarray:
    """Uniform on [-L, L] with L = sqrt(6 / (rows + cols))."""
    if rows < 1 or cols < 1:
        raise ValueError(f"invalid shape ({rows}, {cols})")
    limit = np.sqrt(6.0 / (rows + cols))
    u = rng.uniform((rows, cols), dtype=F64)
    return ((2.0 * u - 1.0) * limit).astype(dtype)
