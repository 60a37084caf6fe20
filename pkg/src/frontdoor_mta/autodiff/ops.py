"""Differentiable primitives.

Each primitive computes its forward value in float64 and registers a backward rule.
Broadcasting is limited to bias-add: a (n, k) matrix plus a (k,) vector.
"""

from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit, log_softmax, logsumexp, softmax

from frontdoor_mta.autodiff.value import Value
from frontdoor_mta.errors import ContractViolation, NumericError

LOG_CLAMP = 1e-7

ArrayLike = Union[Value, np.ndarray, float, int, Sequence[float]]


def as_value(x: ArrayLike) -> Value:
    """Wrap constants as leaf Values; pass Values through."""
    return x if isinstance(x, Value) else Value(x, op="const")


def _finite(*values: Value) -> None:
    for v in values:
        if not np.all(np.isfinite(v.data)):
            raise NumericError(f"non-finite input to primitive ({v!r})")


def _node(data, parents, op, backward) -> Value:
    return Value(data, parents=parents, op=op, backward=backward)


def matmul(a: ArrayLike, b: ArrayLike) -> Value:
    """Matrix product of a 2-D value with a 2-D or 1-D value."""
    a, b = as_value(a), as_value(b)
    _finite(a, b)
    if a.data.ndim != 2 or b.data.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise ContractViolation(f"matmul shapes incompatible: {a.shape} @ {b.shape}")

    def _backward(g):
        if b.data.ndim == 1:
            return np.outer(g, b.data), a.data.T @ g
        return g @ b.data.T, a.data.T @ g

    return _node(a.data @ b.data, (a, b), "matmul", _backward)


def _broadcast_check(a: Value, b: Value, op: str) -> bool:
    if a.shape == b.shape:
        return False
    if a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        return True
    raise ContractViolation(f"{op} shapes incompatible: {a.shape} and {b.shape}")


def add(a: ArrayLike, b: ArrayLike) -> Value:
    """Elementwise sum, or bias-add of a (k,) vector onto every row of (n, k)."""
    a, b = as_value(a), as_value(b)
    _finite(a, b)
    bias = _broadcast_check(a, b, "add")

    def _backward(g):
        return g, (g.sum(axis=0) if bias else g)

    return _node(a.data + b.data, (a, b), "add", _backward)


def sub(a: ArrayLike, b: ArrayLike) -> Value:
    """Elementwise difference with the same broadcasting rule as :func:`add`."""
    a, b = as_value(a), as_value(b)
    _finite(a, b)
    bias = _broadcast_check(a, b, "sub")

    def _backward(g):
        return g, -(g.sum(axis=0) if bias else g)

    return _node(a.data - b.data, (a, b), "sub", _backward)


def mul(a: ArrayLike, b: ArrayLike) -> Value:
    """Elementwise product of equal shapes."""
    a, b = as_value(a), as_value(b)
    _finite(a, b)
    if a.shape != b.shape:
        raise ContractViolation(f"mul shapes differ: {a.shape} and {b.shape}")

    def _backward(g):
        return g * b.data, g * a.data

    return _node(a.data * b.data, (a, b), "mul", _backward)


def scale_rows(a: ArrayLike, s: ArrayLike) -> Value:
    """Multiply row i of a (n, k) value by s[i]."""
    a, s = as_value(a), as_value(s)
    _finite(a, s)
    if a.data.ndim != 2 or s.shape != (a.shape[0],):
        raise ContractViolation(f"scale_rows shapes incompatible: {a.shape} and {s.shape}")

    def _backward(g):
        return g * s.data[:, None], (g * a.data).sum(axis=1)

    return _node(a.data * s.data[:, None], (a, s), "scale_rows", _backward)


def scale(a: ArrayLike, c: float) -> Value:
    """Multiply by a constant."""
    a = as_value(a)
    _finite(a)
    c = float(c)
    return _node(a.data * c, (a,), "scale", lambda g: (g * c,))


def sigmoid(a: ArrayLike) -> Value:
    a = as_value(a)
    _finite(a)
    out = expit(a.data)
    return _node(out, (a,), "sigmoid", lambda g: (g * out * (1.0 - out),))


def tanh(a: ArrayLike) -> Value:
    a = as_value(a)
    _finite(a)
    out = np.tanh(a.data)
    return _node(out, (a,), "tanh", lambda g: (g * (1.0 - out * out),))


def relu(a: ArrayLike) -> Value:
    a = as_value(a)
    _finite(a)
    mask = a.data > 0
    return _node(a.data * mask, (a,), "relu", lambda g: (g * mask,))


def log(a: ArrayLike) -> Value:
    """Natural log with the argument clamped at LOG_CLAMP."""
    a = as_value(a)
    _finite(a)
    clamped = np.maximum(a.data, LOG_CLAMP)
    active = a.data >= LOG_CLAMP
    return _node(np.log(clamped), (a,), "log", lambda g: (g * active / clamped,))


def exp(a: ArrayLike) -> Value:
    a = as_value(a)
    _finite(a)
    out = np.exp(a.data)
    return _node(out, (a,), "exp", lambda g: (g * out,))


def sum(a: ArrayLike) -> Value:
    """Sum of all entries (scalar)."""
    a = as_value(a)
    _finite(a)
    return _node(a.data.sum(), (a,), "sum", lambda g: (np.full_like(a.data, g),))


def mean(a: ArrayLike) -> Value:
    """Mean of all entries (scalar)."""
    a = as_value(a)
    _finite(a)
    n = a.data.size
    return _node(a.data.mean(), (a,), "mean", lambda g: (np.full_like(a.data, g / n),))


def l2_norm(a: ArrayLike, squared: bool = False) -> Value:
    """Euclidean norm of all entries, or its square."""
    a = as_value(a)
    _finite(a)
    sq = float(np.square(a.data).sum())
    if squared:
        return _node(sq, (a,), "l2_norm_sq", lambda g: (2.0 * g * a.data,))
    norm = np.sqrt(sq)
    safe = norm if norm > 0 else 1.0
    return _node(norm, (a,), "l2_norm", lambda g: (g * a.data / safe,))


def dot(a: ArrayLike, b: ArrayLike) -> Value:
    """Inner product of two vectors, or row-wise inner products of two (n, k) values."""
    a, b = as_value(a), as_value(b)
    _finite(a, b)
    if a.shape != b.shape or a.data.ndim not in (1, 2):
        raise ContractViolation(f"dot shapes incompatible: {a.shape} and {b.shape}")
    if a.data.ndim == 1:
        return _node(a.data @ b.data, (a, b), "dot", lambda g: (g * b.data, g * a.data))

    def _backward(g):
        return g[:, None] * b.data, g[:, None] * a.data

    return _node((a.data * b.data).sum(axis=1), (a, b), "dot", _backward)


def concat(values: Sequence[ArrayLike], axis: int = -1) -> Value:
    """Concatenate along ``axis``."""
    values = [as_value(v) for v in values]
    _finite(*values)
    try:
        out = np.concatenate([v.data for v in values], axis=axis)
    except ValueError as exc:
        raise ContractViolation(f"concat shapes incompatible: {exc}") from exc
    bounds = np.cumsum([v.shape[axis] for v in values])[:-1]

    def _backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _node(out, tuple(values), "concat", _backward)


def take_rows(table: ArrayLike, index: np.ndarray) -> Value:
    """Gather rows ``table[index]``; backward scatter-adds into the table."""
    table = as_value(table)
    _finite(table)
    index = np.asarray(index, dtype=np.int64)
    if table.data.ndim != 2:
        raise ContractViolation(f"take_rows needs a 2-D table, got {table.shape}")
    if index.size and (index.min() < 0 or index.max() >= table.shape[0]):
        raise ContractViolation(f"row index outside [0, {table.shape[0]})")

    def _backward(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, index, g)
        return (grad,)

    return _node(table.data[index], (table,), "take_rows", _backward)


def segment_sum(a: ArrayLike, segments: np.ndarray, n_segments: int) -> Value:
    """Sum the rows of a (n, k) value into ``n_segments`` groups."""
    a = as_value(a)
    _finite(a)
    segments = np.asarray(segments, dtype=np.int64)
    if a.data.ndim != 2 or segments.shape != (a.shape[0],):
        raise ContractViolation(f"segment_sum shapes incompatible: {a.shape}, {segments.shape}")
    out = np.zeros((n_segments, a.shape[1]))
    np.add.at(out, segments, a.data)
    return _node(out, (a,), "segment_sum", lambda g: (g[segments],))


def segment_softmax(scores: ArrayLike, segments: np.ndarray, n_segments: int) -> Value:
    """Softmax of a (n,) score vector within each segment."""
    scores = as_value(scores)
    _finite(scores)
    segments = np.asarray(segments, dtype=np.int64)
    if scores.data.ndim != 1 or segments.shape != scores.shape:
        raise ContractViolation("segment_softmax needs matching (n,) scores and segments")
    peak = np.full(n_segments, -np.inf)
    np.maximum.at(peak, segments, scores.data)
    shifted = np.exp(scores.data - peak[segments])
    totals = np.zeros(n_segments)
    np.add.at(totals, segments, shifted)
    out = shifted / totals[segments]

    def _backward(g):
        weighted = np.zeros(n_segments)
        np.add.at(weighted, segments, g * out)
        return (out * (g - weighted[segments]),)

    return _node(out, (scores,), "segment_softmax", _backward)


def softmax_cross_entropy(
    logits: ArrayLike, targets: np.ndarray, weights: Optional[np.ndarray] = None
) -> Value:
    """Mean (optionally weighted) cross-entropy of (n, k) logits against integer targets."""
    logits = as_value(logits)
    _finite(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ContractViolation(
            f"softmax_cross_entropy shapes incompatible: {logits.shape}, {targets.shape}"
        )
    n = logits.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    rows = np.arange(n)
    log_p = log_softmax(logits.data, axis=1)
    loss = -(w * log_p[rows, targets]).sum() / n

    def _backward(g):
        grad = softmax(logits.data, axis=1)
        grad[rows, targets] -= 1.0
        return (g * grad * (w / n)[:, None],)

    return _node(loss, (logits,), "softmax_cross_entropy", _backward)


def binary_cross_entropy(
    p: ArrayLike, y: np.ndarray, weights: Optional[np.ndarray] = None
) -> Value:
    """Mean (optionally weighted) BCE of probabilities against (soft) targets in [0, 1].

    Probabilities are clamped to [LOG_CLAMP, 1 - LOG_CLAMP].
    """
    p = as_value(p)
    _finite(p)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != p.shape:
        raise ContractViolation(f"binary_cross_entropy shapes differ: {p.shape}, {y.shape}")
    n = max(p.data.size, 1)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64)
    q = np.clip(p.data, LOG_CLAMP, 1.0 - LOG_CLAMP)
    inside = (p.data >= LOG_CLAMP) & (p.data <= 1.0 - LOG_CLAMP)
    loss = -(w * (y * np.log(q) + (1.0 - y) * np.log(1.0 - q))).sum() / n

    def _backward(g):
        return (g * w * inside * (q - y) / (q * (1.0 - q)) / n,)

    return _node(loss, (p,), "binary_cross_entropy", _backward)


def logsumexp_rows(a: ArrayLike) -> Value:
    """Row-wise log-sum-exp of a (n, k) value."""
    a = as_value(a)
    _finite(a)
    out = logsumexp(a.data, axis=1)
    probs = softmax(a.data, axis=1)
    return _node(out, (a,), "logsumexp", lambda g: (g[:, None] * probs,))


def scale_grad(a: ArrayLike, alpha: float) -> Value:
    """Identity forward; multiplies the backward gradient by ``alpha``."""
    a = as_value(a)
    alpha = float(alpha)
    if not np.isfinite(alpha):
        raise NumericError(f"gradient scale must be finite, got {alpha}")
    return _node(a.data.copy(), (a,), "scale_grad", lambda g: (g * alpha,))


def grad_reverse(a: ArrayLike, lam: float) -> Value:
    """Gradient-reversal layer: identity forward, backward multiplies by -lam."""
    lam = float(lam)
    if not np.isfinite(lam):
        raise NumericError(f"reversal strength must be finite, got {lam}")
    if lam < 0:
        raise ContractViolation(f"reversal strength must be >= 0, got {lam}")
    a = as_value(a)
    return _node(a.data.copy(), (a,), "grad_reverse", lambda g: (g * -lam,))


def reshape(a: ArrayLike, shape: tuple[int, ...]) -> Value:
    """Reshape without copying semantics; backward restores the input shape."""
    a = as_value(a)
    original = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ContractViolation(f"cannot reshape {original} to {shape}") from exc
    return _node(out, (a,), "reshape", lambda g: (g.reshape(original),))


def transpose(a: ArrayLike) -> Value:
    """Transpose of a 2-D value."""
    a = as_value(a)
    if a.data.ndim != 2:
        raise ContractViolation(f"transpose needs a 2-D value, got {a.shape}")
    return _node(a.data.T, (a,), "transpose", lambda g: (g.T,))
