"""Two-layer sigmoid network used as the adaptive element.

Shapes follow the controller convention: ``W`` is N x m (hidden -> output),
``V`` is n x N (input -> hidden), ``bw`` has length m and ``bv`` length N.
Vectors are plain 1-D arrays.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TwoLayerNet",
    "NnGains",
    "NetDeriv",
    "sigmoid",
    "hidden",
    "sigma_signals",
    "nn_output",
    "update_derivs",
    "net_to_json",
    "net_from_json",
]


def sigmoid(s):
    return 1.0 / (1.0 + np.exp(-s))


@dataclass
class TwoLayerNet:
    W: np.ndarray
    V: np.ndarray
    bw: np.ndarray
    bv: np.ndarray

    def __post_init__(self):
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        self.V = np.atleast_2d(np.asarray(self.V, dtype=float))
        self.bw = np.atleast_1d(np.asarray(self.bw, dtype=float))
        self.bv = np.atleast_1d(np.asarray(self.bv, dtype=float))
        n, N = self.V.shape
        if N < 1:
            raise ValueError("network needs at least one hidden neuron")
        if self.W.shape[0] != N or self.bv.shape != (N,) or self.bw.shape != (self.W.shape[1],):
            raise ValueError(
                f"inconsistent shapes W{self.W.shape} V{self.V.shape} "
                f"bw{self.bw.shape} bv{self.bv.shape}"
            )
        for name in ("W", "V", "bw", "bv"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def N(self) -> int:
        return self.V.shape[1]

    @property
    def m(self) -> int:
        return self.W.shape[1]

    @classmethod
    def zeros(cls, n: int, N: int, m: int) -> "TwoLayerNet":
        return cls(np.zeros((N, m)), np.zeros((n, N)), np.zeros(m), np.zeros(N))

    def copy(self) -> "TwoLayerNet":
        return TwoLayerNet(self.W.copy(), self.V.copy(), self.bw.copy(), self.bv.copy())


@dataclass(frozen=True)
class NnGains:
    """Learning rates ``gamma_w``, ``gamma_v`` and the e-modification gain ``kappa``."""

    gamma_w: float = 10.0
    gamma_v: float = 10.0
    kappa: float = 0.0

    def __post_init__(self):
        if not (self.gamma_w > 0 and self.gamma_v > 0):
            raise ValueError("gamma_w and gamma_v must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")


@dataclass
class NetDeriv:
    dW: np.ndarray
    dV: np.ndarray
    dbw: np.ndarray
    dbv: np.ndarray


def _check_input(net: TwoLayerNet, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (net.n,):
        raise ValueError(f"input has shape {x.shape}, network expects ({net.n},)")
    return x


def hidden(net: TwoLayerNet, x) -> np.ndarray:
    """Hidden-layer output ``sigma(V^T x + bv)``."""
    x = _check_input(net, x)
    return sigmoid(net.V.T @ x + net.bv)


def sigma_signals(net: TwoLayerNet, x):
    """Return ``(sig_hat, sig_hat_prime)``.

    ``sig_hat = [h; 1]`` has length N+1 and ``sig_hat_prime`` is the
    (N+1) x N matrix ``[diag(h * (1 - h)); 0^T]``.
    """
    h = hidden(net, x)
    N = h.size
    sig = np.empty(N + 1)
    sig[:N] = h
    sig[N] = 1.0
    dsig = np.zeros((N + 1, N))
    dsig[np.arange(N), np.arange(N)] = h * (1.0 - h)
    return sig, dsig


def nn_output(net: TwoLayerNet, x, Mr) -> np.ndarray:
    """``u_ad = -W^T (sigma(V^T x + bv) + Mr) - bw``; ``Mr = 0`` gives the plain NN."""
    Mr = np.asarray(Mr, dtype=float)
    if Mr.shape != (net.N,):
        raise ValueError(f"memory read has shape {Mr.shape}, expected ({net.N},)")
    return -(net.W.T @ (hidden(net, x) + Mr)) - net.bw


def update_derivs(net: TwoLayerNet, gains: NnGains, x, q_mu, e_norm: float) -> NetDeriv:
    """Weight derivatives of the two-layer update law.

    Output weights and bias are updated as one stacked block ``[W; bw^T]``
    driven by ``(sig_hat - sig_hat' (V^T x + bv)) q_mu``; the hidden block
    ``[V; bv^T]`` is driven by ``[x; 1] q_mu [W; bw^T]^T sig_hat'``. Both
    carry the ``-kappa * gamma * ||e||`` leakage.
    """
    x = _check_input(net, x)
    q = np.atleast_1d(np.asarray(q_mu, dtype=float))
    if q.shape != (net.m,):
        raise ValueError(f"q_mu has shape {q.shape}, expected ({net.m},)")
    n, N = net.n, net.N
    sig, dsig = sigma_signals(net, x)
    pre = net.V.T @ x + net.bv

    outer = np.vstack([net.W, net.bw[None, :]])  # (N+1) x m
    inner = np.vstack([net.V, net.bv[None, :]])  # (n+1) x N
    xe = np.append(x, 1.0)

    d_outer = gains.gamma_w * np.outer(sig - dsig @ pre, q) - gains.kappa * gains.gamma_w * e_norm * outer
    d_inner = gains.gamma_v * np.outer(xe, q @ outer.T @ dsig) - gains.kappa * gains.gamma_v * e_norm * inner
    return NetDeriv(d_outer[:N], d_inner[:n], d_outer[N], d_inner[n])


def net_to_json(net: TwoLayerNet) -> str:
    """Serialise weights as row-major arrays with explicit shapes."""
    payload = {
        name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
        for name, arr in (("W", net.W), ("V", net.V), ("bw", net.bw), ("bv", net.bv))
    }
    return json.dumps(payload, sort_keys=True)


def net_from_json(text: str) -> TwoLayerNet:
    payload = json.loads(text)
    arrays = {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in payload.items()}
    return TwoLayerNet(arrays["W"], arrays["V"], arrays["bw"], arrays["bv"])
