"""Reverse-mode autodiff over float64 numpy arrays.

Covers exactly the operations the retrieval/classification graph needs:
dense affine ops, LSTM gating, softmax attention, column-wise 1-D
convolution and max pooling, and the reductions used by the losses.
A fresh tape is built on every forward pass; ``Tensor.backward`` walks
it once in reverse topological order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

__all__ = [
    "Tensor", "LstmParams", "lstm_cell", "zero_state",
    "matmul", "add", "add_n", "mul", "scale", "add_const", "transpose",
    "sigmoid", "tanh", "relu", "abs_", "sqrt_", "softmax", "cross_entropy",
    "concat", "slice_cols", "take_rows", "stack_rows", "reshape",
    "sum_all", "sum_rows", "mean_over_time", "l2_normalize",
    "conv1d_col", "maxpool_col", "conv1d_out_rows", "conv1d_valid_rows",
    "maxpool_out_rows", "maxpool_valid_rows",
]


class Tensor:
    """One node of the taped graph: a float64 value plus its backward rule.

    Leaves (parameters, constants) have no parents. Every public op
    validates that its output is finite, so NaN/Inf cannot propagate
    silently through a graph.
    """

    __slots__ = ("data", "grad", "op", "_parents", "_backward")

    def __init__(self, data, parents=(), op="leaf"):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite values entering graph at op '{op}'")
        self.data = arr
        self.grad = None
        self.op = op
        self._parents = parents
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.data.shape})"

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every node of its tape.

        Each reachable node is visited exactly once; nodes whose value does
        not influence this scalar keep an all-zero gradient.
        """
        if self.data.shape != ():
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        for node in topo:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# arithmetic


def matmul(a, b) -> Tensor:
    """Matrix/vector product with the standard dA = dC·Bᵀ, dB = Aᵀ·dC rules."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise DimensionError(f"matmul needs 1-D or 2-D operands, got {a.shape} and {b.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise DimensionError(f"matmul: inner extents differ, {a.shape} vs {b.shape}")
    out = Tensor(a.data @ b.data, (a, b), "matmul")
    an, bn = a.data.ndim, b.data.ndim

    def _bw(g):
        if an == 1 and bn == 1:
            a.grad += g * b.data
            b.grad += g * a.data
        elif an == 1 and bn == 2:
            a.grad += b.data @ g
            b.grad += np.outer(a.data, g)
        elif an == 2 and bn == 1:
            a.grad += np.outer(g, b.data)
            b.grad += a.data.T @ g
        else:
            a.grad += g @ b.data.T
            b.grad += a.data.T @ g

    out._backward = _bw
    return out


def add(a, b) -> Tensor:
    """Elementwise sum; a 1-D right operand broadcasts over the rows of a 2-D left."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape == b.data.shape:
        out = Tensor(a.data + b.data, (a, b), "add")

        def _bw(g):
            a.grad += g
            b.grad += g

    elif a.data.ndim == 2 and b.data.ndim == 1 and a.data.shape[1] == b.data.shape[0]:
        out = Tensor(a.data + b.data, (a, b), "add")

        def _bw(g):
            a.grad += g
            b.grad += g.sum(axis=0)

    else:
        raise DimensionError(f"add: incompatible shapes {a.shape} and {b.shape}")
    out._backward = _bw
    return out


def add_n(tensors) -> Tensor:
    """Sum of same-shape tensors."""
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise ValueError("add_n of empty list")
    shape = ts[0].data.shape
    for t in ts:
        if t.data.shape != shape:
            raise DimensionError(f"add_n: shapes {shape} and {t.shape} differ")
    out = Tensor(sum(t.data for t in ts), tuple(ts), "add_n")

    def _bw(g):
        for t in ts:
            t.grad += g

    out._backward = _bw
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} differ")
    out = Tensor(a.data * b.data, (a, b), "mul")

    def _bw(g):
        a.grad += g * b.data
        b.grad += g * a.data

    out._backward = _bw
    return out


def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)
    out = Tensor(a.data * c, (a,), "scale")

    def _bw(g):
        a.grad += g * c

    out._backward = _bw
    return out


def add_const(a, c: float) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data + float(c), (a,), "add_const")

    def _bw(g):
        a.grad += g

    out._backward = _bw
    return out


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise DimensionError(f"transpose needs a 2-D operand, got {a.shape}")
    out = Tensor(a.data.T, (a,), "transpose")

    def _bw(g):
        a.grad += g.T

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# elementwise nonlinearities


def _sigmoid_stable(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    s = _sigmoid_stable(a.data)
    out = Tensor(s, (a,), "sigmoid")

    def _bw(g):
        a.grad += g * s * (1.0 - s)

    out._backward = _bw
    return out


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    t = np.tanh(a.data)
    out = Tensor(t, (a,), "tanh")

    def _bw(g):
        a.grad += g * (1.0 - t * t)

    out._backward = _bw
    return out


def relu(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0), (a,), "relu")

    def _bw(g):
        a.grad += g * (a.data > 0)

    out._backward = _bw
    return out


def abs_(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.abs(a.data), (a,), "abs")

    def _bw(g):
        a.grad += g * np.sign(a.data)

    out._backward = _bw
    return out


def sqrt_(a) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data < 0):
        raise ValueError("sqrt of negative value")
    root = np.sqrt(a.data)
    out = Tensor(root, (a,), "sqrt")

    def _bw(g):
        a.grad += g / (2.0 * np.maximum(root, 1e-300))

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# softmax / loss


def softmax(z) -> Tensor:
    """Stabilized softmax over the last axis (whole vector, or each row)."""
    z = _as_tensor(z)
    if z.data.ndim not in (1, 2) or z.data.shape[-1] == 0:
        raise ValueError(f"softmax needs a nonempty 1-D or 2-D input, got shape {z.shape}")
    shifted = z.data - z.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(p, (z,), "softmax")

    def _bw(g):
        dot = (p * g).sum(axis=-1, keepdims=True)
        z.grad += p * (g - dot)

    out._backward = _bw
    return out


def cross_entropy(probs, labels) -> Tensor:
    """Negative log likelihood of the given class under an already-normalized
    distribution. 1-D probs with an int label yields a scalar; 2-D probs with
    a label per row yields the per-row loss vector."""
    probs = _as_tensor(probs)
    if probs.data.ndim == 1:
        label = int(labels)
        k = probs.data.shape[0]
        if not 0 <= label < k:
            raise IndexError(f"label {label} out of range for {k} classes")
        out = Tensor(-math.log(probs.data[label]), (probs,), "cross_entropy")

        def _bw(g):
            probs.grad[label] -= g / probs.data[label]

    elif probs.data.ndim == 2:
        labels = np.asarray(labels, dtype=np.int64)
        n, k = probs.data.shape
        if labels.shape != (n,):
            raise DimensionError(f"labels shape {labels.shape} does not match {n} rows")
        if labels.min(initial=0) < 0 or labels.max(initial=-1) >= k:
            raise IndexError(f"label out of range for {k} classes")
        rows = np.arange(n)
        picked = probs.data[rows, labels]
        out = Tensor(-np.log(picked), (probs,), "cross_entropy")

        def _bw(g):
            probs.grad[rows, labels] -= g / picked

    else:
        raise DimensionError(f"cross_entropy needs 1-D or 2-D probs, got {probs.shape}")
    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# shape plumbing


def concat(a, b) -> Tensor:
    """Concatenate along the last axis. Backward splits the upstream gradient."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != b.data.ndim or a.data.ndim not in (1, 2):
        raise DimensionError(f"concat: incompatible shapes {a.shape} and {b.shape}")
    if a.data.ndim == 2 and a.data.shape[0] != b.data.shape[0]:
        raise DimensionError(f"concat: row counts differ, {a.shape} vs {b.shape}")
    na = a.data.shape[-1]
    out = Tensor(np.concatenate([a.data, b.data], axis=-1), (a, b), "concat")

    def _bw(g):
        a.grad += g[..., :na]
        b.grad += g[..., na:]

    out._backward = _bw
    return out


def slice_cols(a, lo: int, hi: int) -> Tensor:
    a = _as_tensor(a)
    if not 0 <= lo < hi <= a.data.shape[-1]:
        raise DimensionError(f"slice [{lo}:{hi}] out of range for shape {a.shape}")
    out = Tensor(a.data[..., lo:hi].copy(), (a,), "slice_cols")

    def _bw(g):
        a.grad[..., lo:hi] += g

    out._backward = _bw
    return out


def take_rows(m, idx) -> Tensor:
    """Gather rows by index (embedding lookup). Backward scatter-adds."""
    m = _as_tensor(m)
    if m.data.ndim != 2:
        raise DimensionError(f"take_rows needs a 2-D table, got {m.shape}")
    idx = np.asarray(idx, dtype=np.int64)
    out = Tensor(m.data[idx], (m,), "take_rows")

    def _bw(g):
        np.add.at(m.grad, idx, g)

    out._backward = _bw
    return out


def stack_rows(vectors) -> Tensor:
    vs = [_as_tensor(v) for v in vectors]
    if not vs:
        raise ValueError("stack_rows of empty list")
    for v in vs:
        if v.data.shape != vs[0].data.shape or v.data.ndim != 1:
            raise DimensionError("stack_rows needs equal-length 1-D inputs")
    out = Tensor(np.stack([v.data for v in vs]), tuple(vs), "stack_rows")

    def _bw(g):
        for i, v in enumerate(vs):
            v.grad += g[i]

    out._backward = _bw
    return out


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.reshape(shape).copy(), (a,), "reshape")

    def _bw(g):
        a.grad += g.reshape(a.data.shape)

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# reductions


def sum_all(a) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.sum(), (a,), "sum_all")

    def _bw(g):
        a.grad += g

    out._backward = _bw
    return out


def sum_rows(a) -> Tensor:
    """Row sums of a 2-D tensor."""
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise DimensionError(f"sum_rows needs a 2-D operand, got {a.shape}")
    out = Tensor(a.data.sum(axis=1), (a,), "sum_rows")

    def _bw(g):
        a.grad += g[:, None]

    out._backward = _bw
    return out


def mean_over_time(hs, mask) -> Tensor:
    """Mean of per-step hidden states over the real (non-padding) steps only.

    ``hs`` is one tensor per step, each (n,) or (batch, n); ``mask`` is a bool
    array (T,) or (batch, T). Backward distributes 1/count to real steps and
    exactly zero to padding steps.
    """
    hs = [_as_tensor(h) for h in hs]
    mask = np.asarray(mask, dtype=bool)
    if not hs:
        raise ValueError("mean_over_time of empty sequence")
    if mask.shape[-1] != len(hs):
        raise DimensionError(f"mask covers {mask.shape[-1]} steps, got {len(hs)} states")
    if hs[0].data.ndim == 1:
        count = int(mask.sum())
        if count == 0:
            raise ValueError("mean_over_time needs at least one real step")
        acc = np.zeros_like(hs[0].data)
        for t, h in enumerate(hs):
            if mask[t]:
                acc += h.data
        out = Tensor(acc / count, tuple(hs), "mean_over_time")

        def _bw(g):
            for t, h in enumerate(hs):
                if mask[t]:
                    h.grad += g / count

    else:
        counts = mask.sum(axis=1)
        if np.any(counts == 0):
            raise ValueError("mean_over_time needs at least one real step per row")
        inv = (1.0 / counts)[:, None]
        acc = np.zeros_like(hs[0].data)
        for t, h in enumerate(hs):
            acc += h.data * mask[:, t : t + 1]
        out = Tensor(acc * inv, tuple(hs), "mean_over_time")

        def _bw(g):
            for t, h in enumerate(hs):
                h.grad += g * (mask[:, t : t + 1] * inv)

    out._backward = _bw
    return out


def l2_normalize(a) -> Tensor:
    """Scale a vector (or each row of a matrix) to unit Euclidean norm."""
    a = _as_tensor(a)
    if a.data.ndim == 1:
        norm = float(np.linalg.norm(a.data))
        if norm == 0.0:
            raise ValueError("cannot normalize a zero vector")
        unit = a.data / norm
        out = Tensor(unit, (a,), "l2_normalize")

        def _bw(g):
            a.grad += (g - unit * (unit @ g)) / norm

    elif a.data.ndim == 2:
        norms = np.linalg.norm(a.data, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ValueError("cannot normalize a zero row")
        unit = a.data / norms
        out = Tensor(unit, (a,), "l2_normalize")

        def _bw(g):
            dots = (unit * g).sum(axis=1, keepdims=True)
            a.grad += (g - unit * dots) / norms

    else:
        raise DimensionError(f"l2_normalize needs a 1-D or 2-D operand, got {a.shape}")
    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# column-wise convolution / pooling over stacked cluster members
#
# Matrices are (rows=cluster members, cols=embedding dimensions). Member
# rows are stacked real-members-first; `n_valid` counts the real rows so
# that windows lying entirely in zero padding can be dropped.


def conv1d_out_rows(rows: int, k: int, stride: int) -> int:
    return (rows - k) // stride + 1


def conv1d_valid_rows(n_valid: int, k: int, stride: int, out_rows: int) -> int:
    """Output rows whose window touches at least one real input row."""
    return min(out_rows, -(-n_valid // stride))


def conv1d_col(m, filt, stride: int = 1, n_valid: int | None = None) -> Tensor:
    """Slide a shared 1-D filter down each column independently.

    out[i, j] = sum_z filt[z] * m[i*stride + z, j]. Rows whose window lies
    entirely inside padding (window start >= n_valid) are zeroed and carry
    no gradient.
    """
    m, filt = _as_tensor(m), _as_tensor(filt)
    if m.data.ndim != 2 or filt.data.ndim != 1:
        raise DimensionError(f"conv1d_col needs a 2-D input and 1-D filter, got {m.shape}, {filt.shape}")
    q, _cols = m.data.shape
    k = filt.data.shape[0]
    if k > q:
        raise DimensionError(f"filter length {k} exceeds {q} input rows")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    q_out = conv1d_out_rows(q, k, stride)
    starts = np.arange(q_out) * stride
    if n_valid is None:
        live = np.ones(q_out, dtype=bool)
    else:
        live = starts < n_valid
    out_data = np.zeros((q_out, m.data.shape[1]))
    for i, s in enumerate(starts):
        if live[i]:
            out_data[i] = filt.data @ m.data[s : s + k]
    out = Tensor(out_data, (m, filt), "conv1d_col")

    def _bw(g):
        for i, s in enumerate(starts):
            if live[i]:
                m.grad[s : s + k] += np.outer(filt.data, g[i])
                filt.grad += m.data[s : s + k] @ g[i]

    out._backward = _bw
    return out


def maxpool_out_rows(rows: int, window: int) -> int:
    return -(-rows // window)


def maxpool_valid_rows(n_valid: int, window: int, out_rows: int) -> int:
    return min(out_rows, -(-n_valid // window))


def maxpool_col(m, window: int, n_valid: int | None = None) -> Tensor:
    """Per-column max over non-overlapping row windows (stride = window).

    A trailing partial window is pooled as-is. With ``n_valid`` set, only
    real rows compete for the max; windows with no real row yield zeros.
    """
    m = _as_tensor(m)
    if m.data.ndim != 2:
        raise DimensionError(f"maxpool_col needs a 2-D operand, got {m.shape}")
    p, cols = m.data.shape
    if window <= 0:
        raise ValueError(f"pool window must be >= 1, got {window}")
    if window > p:
        raise DimensionError(f"pool window {window} exceeds {p} rows")
    p_out = maxpool_out_rows(p, window)
    out_data = np.zeros((p_out, cols))
    arg = np.full((p_out, cols), -1, dtype=np.int64)
    for i in range(p_out):
        lo = i * window
        hi = min(lo + window, p)
        if n_valid is not None:
            hi = min(hi, n_valid)
        if hi <= lo:
            continue
        block = m.data[lo:hi]
        rows_in_block = block.argmax(axis=0)
        arg[i] = lo + rows_in_block
        out_data[i] = block[rows_in_block, np.arange(cols)]
    out = Tensor(out_data, (m,), "maxpool_col")

    def _bw(g):
        for i in range(p_out):
            for j in range(cols):
                if arg[i, j] >= 0:
                    m.grad[arg[i, j], j] += g[i, j]

    out._backward = _bw
    return out


# ---------------------------------------------------------------------------
# LSTM cell


@dataclass
class LstmParams:
    """Gate parameters; columns ordered input, forget, output, candidate."""

    w_x: Tensor  # (input_dim, 4*hidden)
    w_h: Tensor  # (hidden, 4*hidden)
    bias: Tensor  # (4*hidden,)

    @property
    def hidden_dim(self) -> int:
        return self.w_h.data.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_x.data.shape[0]

    def tensors(self) -> dict[str, Tensor]:
        return {"w_x": self.w_x, "w_h": self.w_h, "bias": self.bias}


def init_lstm_params(input_dim: int, hidden_dim: int, rng: np.random.Generator,
                     sigma: float = 0.2) -> LstmParams:
    s = sigma / math.sqrt(max(input_dim, 1))
    return LstmParams(
        w_x=Tensor(rng.normal(0.0, s, size=(input_dim, 4 * hidden_dim))),
        w_h=Tensor(rng.normal(0.0, sigma / math.sqrt(hidden_dim), size=(hidden_dim, 4 * hidden_dim))),
        bias=Tensor(np.zeros(4 * hidden_dim)),
    )


def zero_state(hidden_dim: int, batch: int | None = None) -> tuple[Tensor, Tensor]:
    shape = (hidden_dim,) if batch is None else (batch, hidden_dim)
    return Tensor(np.zeros(shape)), Tensor(np.zeros(shape))


def lstm_cell(x, state, params: LstmParams) -> tuple[Tensor, Tensor]:
    """Standard LSTM update: logistic input/forget/output gates, tanh candidate.

    ``x`` is (d,) or (batch, d); ``state`` is the (h, c) pair with matching
    leading shape. Returns the next (h, c).
    """
    h, c = state
    x = _as_tensor(x)
    n = params.hidden_dim
    if x.data.shape[-1] != params.input_dim:
        raise DimensionError(f"input dim {x.data.shape[-1]} != parameter dim {params.input_dim}")
    if h.data.shape[-1] != n or c.data.shape[-1] != n:
        raise DimensionError(f"state dim mismatch: {h.shape}, {c.shape} vs hidden {n}")
    z = add(add(matmul(x, params.w_x), matmul(h, params.w_h)), params.bias)
    i = sigmoid(slice_cols(z, 0, n))
    f = sigmoid(slice_cols(z, n, 2 * n))
    o = sigmoid(slice_cols(z, 2 * n, 3 * n))
    cand = tanh(slice_cols(z, 3 * n, 4 * n))
    c_next = add(mul(f, c), mul(i, cand))
    h_next = mul(o, tanh(c_next))
    return h_next, c_next
