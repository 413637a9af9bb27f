"""Content-addressed working memory.

The memory is an N x n_s matrix whose columns are both slot values and keys.
Reads and writes share one set of softmax attention weights computed from the
query (the current hidden-layer output).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MemoryState", "attention", "read", "write_deriv"]


@dataclass
class MemoryState:
    mu: np.ndarray
    c_w: float = 0.75
    enable_info_term: bool = True
    enable_error_term: bool = True
    temperature: float = 1.0

    def __post_init__(self):
        self.mu = np.atleast_2d(np.asarray(self.mu, dtype=float))
        if self.mu.shape[1] < 1:
            raise ValueError("memory needs at least one slot")
        if not np.all(np.isfinite(self.mu)):
            raise ValueError("memory contents must be finite")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    @property
    def n_slots(self) -> int:
        return self.mu.shape[1]


def attention(mu, q, temperature: float = 1.0) -> np.ndarray:
    """Softmax of the slot/query dot products, shifted by the max logit."""
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    q = np.asarray(q, dtype=float)
    if q.shape != (mu.shape[0],):
        raise ValueError(f"query has shape {q.shape}, memory rows are {mu.shape[0]}")
    logits = (mu.T @ q) / temperature
    w = np.exp(logits - logits.max())
    return w / w.sum()


def read(mu, z) -> np.ndarray:
    """Convex combination ``mu @ z`` of the memory columns."""
    mu = np.atleast_2d(np.asarray(mu, dtype=float))
    z = np.asarray(z, dtype=float)
    if z.shape != (mu.shape[1],):
        raise ValueError(f"attention has shape {z.shape}, memory has {mu.shape[1]} slots")
    return mu @ z


def write_deriv(mem: MemoryState, z, a, W, q_mu) -> np.ndarray:
    """Time derivative of the memory matrix.

    Column i moves as ``z_i * (-mu_i + c_w a + W q_mu^T)``; the last two terms
    can be switched off independently for ablations.
    """
    z = np.asarray(z, dtype=float)
    a = np.asarray(a, dtype=float)
    W = np.atleast_2d(np.asarray(W, dtype=float))
    q = np.atleast_1d(np.asarray(q_mu, dtype=float))
    N = mem.mu.shape[0]
    if a.shape != (N,) or W.shape != (N, q.size) or z.shape != (mem.n_slots,):
        raise ValueError("write vector, weights or attention have inconsistent shapes")

    target = np.zeros(N)
    if mem.enable_info_term:
        target = target + mem.c_w * a
    if mem.enable_error_term:
        target = target + W @ q
    return (target[:, None] - mem.mu) * z[None, :]
