"""Softmax and the per-class binary cross-entropy loss.

The loss is the literal sum over classes of binary cross-entropy terms,

    L = -sum_i( t_i*log(p_i) + (1 - t_i)*log(1 - p_i) ),

averaged over the batch, with probabilities clamped to [1e-7, 1 - 1e-7]
before the logs. A categorical variant (-sum t*log p) exists behind the
`kind` switch for comparison; it is not the default.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatchError

CLAMP_EPS = 1e-7


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(probs: np.ndarray, dprobs: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. logits given gradient w.r.t. softmax outputs."""
    inner = (dprobs * probs).sum(axis=-1, keepdims=True)
    return probs * (dprobs - inner)


def _check_pair(probs: np.ndarray, onehot: np.ndarray) -> None:
    if probs.shape != onehot.shape or probs.ndim != 2:
        raise ShapeMismatchError(
            f"probs {probs.shape} and onehot {onehot.shape} must be equal 2d shapes"
        )


def cross_entropy(probs: np.ndarray, onehot: np.ndarray, kind: str = "binary_sum") -> float:
    """Loss summed over classes, averaged over the batch."""
    _check_pair(probs, onehot)
    p = np.clip(probs, CLAMP_EPS, 1.0 - CLAMP_EPS)
    if kind == "binary_sum":
        terms = onehot * np.log(p) + (1.0 - onehot) * np.log1p(-p)
    elif kind == "categorical":
        terms = onehot * np.log(p)
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return float(-terms.sum(axis=1).mean())


def cross_entropy_grad(probs: np.ndarray, onehot: np.ndarray,
                       kind: str = "binary_sum") -> np.ndarray:
    """Gradient of cross_entropy w.r.t. probs (zero where the clamp is active)."""
    _check_pair(probs, onehot)
    n = probs.shape[0]
    p = np.clip(probs, CLAMP_EPS, 1.0 - CLAMP_EPS)
    active = (probs > CLAMP_EPS) & (probs < 1.0 - CLAMP_EPS)
    if kind == "binary_sum":
        g = -(onehot / p - (1.0 - onehot) / (1.0 - p)) / n
    elif kind == "categorical":
        g = -(onehot / p) / n
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return np.where(active, g, 0.0).astype(probs.dtype)


def onehot_encode(labels: np.ndarray, num_classes: int, dtype=np.float64) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], num_classes), dtype=dtype)
    out[np.arange(labels.shape[0]), labels] = 1
    return out
