"""Memory-augmented NN model-reference adaptive controller.

The base law is LQR state feedback designed for ``Q = K_v I``, ``R = K_r I``;
the closed loop under LQR is the reference model. A two-layer network plus
working memory compensates the matched uncertainty, and the tracking error
enters the adaptation through ``q_mu = e^T P B``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import memory as memlib
from . import nn
from .numerics import OdeField, is_hurwitz, lqr_gain, solve_care, solve_lyapunov
from .scenario import PlantModel, Scenario, command, uncertainty

__all__ = [
    "ControllerConfig",
    "ControllerConsts",
    "LoopLayout",
    "build_controller",
    "theorem_gains",
    "q_mu",
    "robust_term",
    "control",
    "closed_loop_field",
]


@dataclass(frozen=True)
class ControllerConfig:
    K_v: float = 1.0
    K_r: float = 1.0
    k_z: float = 0.0
    Z_m: float = 1.0
    gains: nn.NnGains = field(default_factory=nn.NnGains)
    N: int = 4
    c_w: float = 0.75
    n_s: int = 1
    enable_info_term: bool = True
    enable_error_term: bool = True
    memory_enabled: bool = True
    nn_enabled: bool = True
    temperature: float = 1.0
    lyapunov_rhs_factor: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (self.K_v > 0 and self.K_r > 0):
            raise ValueError("K_v and K_r must be positive")
        if self.k_z < 0:
            raise ValueError("k_z must be non-negative")
        if not self.Z_m > 0:
            raise ValueError("Z_m must be positive")
        if self.N < 1 or self.n_s < 1:
            raise ValueError("N and n_s must be at least 1")
        if self.lyapunov_rhs_factor not in (1, 2):
            raise ValueError("lyapunov_rhs_factor must be 1 or 2")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    def with_(self, **changes) -> "ControllerConfig":
        return replace(self, **changes)


def theorem_gains(K_v: float) -> nn.NnGains:
    """Gain schedule of the uniform-boundedness result: gamma = K_v, kappa = K_v^0.75.

    ``k_z`` is left to the caller; its lower bound is not constructive.
    """
    return nn.NnGains(gamma_w=K_v, gamma_v=K_v, kappa=K_v ** 0.75)


@dataclass(frozen=True)
class ControllerConsts:
    P_tilde: np.ndarray
    K_lqr: np.ndarray
    A_ref: np.ndarray
    P: np.ndarray


def build_controller(plant: PlantModel, cfg: ControllerConfig) -> ControllerConsts:
    n, m = plant.n, plant.m
    P_tilde = solve_care(plant.A, plant.B, cfg.K_v * np.eye(n), cfg.K_r * np.eye(m))
    K = lqr_gain(P_tilde, plant.B, cfg.K_r * np.eye(m))
    A_ref = plant.A - plant.B @ K
    assert is_hurwitz(A_ref)
    P = solve_lyapunov(A_ref, cfg.lyapunov_rhs_factor * cfg.K_v * np.eye(n))
    return ControllerConsts(P_tilde, K, A_ref, P)


def q_mu(e, P, B) -> np.ndarray:
    """``e^T P B`` as a length-m vector."""
    e = np.asarray(e, dtype=float)
    return (e @ P) @ np.asarray(B, dtype=float)


def robust_term(net: nn.TwoLayerNet, Z_m: float, e, k_z: float) -> np.ndarray:
    """``-k_z (||W||_F + ||V||_F + Z_m) ||e||_2``, repeated on every input channel."""
    e = np.asarray(e, dtype=float)
    val = -k_z * (np.linalg.norm(net.W) + np.linalg.norm(net.V) + Z_m) * math.sqrt(float(e @ e))
    return np.full(net.m, val)


def control(consts: ControllerConsts, cfg: ControllerConfig, net: nn.TwoLayerNet, mem: memlib.MemoryState,
            x, x_ref, B=None):
    """Control input and its parts.

    Returns ``(u, diag)`` where ``diag`` holds ``u_bl``, ``u_ad``, ``v``,
    ``hidden``, ``M_r``, ``z`` and ``q_mu``. ``B`` is only needed for
    ``q_mu``; without it that entry is ``None``.
    """
    x = np.asarray(x, dtype=float)
    x_ref = np.asarray(x_ref, dtype=float)
    e = x - x_ref
    u_bl = -(consts.K_lqr @ x)
    h = nn.hidden(net, x)
    z = memlib.attention(mem.mu, h, cfg.temperature)
    if cfg.memory_enabled:
        Mr = memlib.read(mem.mu, z)
    else:
        Mr = np.zeros(net.N)
    if cfg.nn_enabled:
        u_ad = nn.nn_output(net, x, Mr)
    else:
        u_ad = np.zeros(net.m)
    v = robust_term(net, cfg.Z_m, e, cfg.k_z)
    u = u_bl + u_ad + v
    qm = None if B is None else q_mu(e, consts.P, B)
    return u, {"u_bl": u_bl, "u_ad": u_ad, "v": v, "hidden": h, "M_r": Mr, "z": z, "q_mu": qm}


@dataclass(frozen=True)
class LoopLayout:
    """Flat packing ``[x, x_ref, W, V, bw, bv, mu]`` (matrices row-major)."""

    n: int
    N: int
    m: int
    n_s: int

    @property
    def sizes(self) -> tuple[int, ...]:
        n, N, m, s = self.n, self.N, self.m, self.n_s
        return (n, n, N * m, n * N, m, N, N * s)

    @property
    def size(self) -> int:
        return sum(self.sizes)

    def offsets(self) -> list[int]:
        out, acc = [], 0
        for s in self.sizes:
            out.append(acc)
            acc += s
        return out

    def pack(self, x, x_ref, net: nn.TwoLayerNet, mu) -> np.ndarray:
        parts = [np.asarray(x, float), np.asarray(x_ref, float), net.W, net.V, net.bw, net.bv,
                 np.asarray(mu, float)]
        flat = np.concatenate([np.ravel(p) for p in parts])
        if flat.size != self.size:
            raise ValueError("state does not match layout")
        return flat

    def unpack(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.size,):
            raise ValueError(f"flat state has shape {y.shape}, layout needs ({self.size},)")
        o = self.offsets()
        n, N, m, s = self.n, self.N, self.m, self.n_s
        x = y[o[0]:o[0] + n]
        x_ref = y[o[1]:o[1] + n]
        net = nn.TwoLayerNet(
            y[o[2]:o[2] + N * m].reshape(N, m),
            y[o[3]:o[3] + n * N].reshape(n, N),
            y[o[4]:o[4] + m],
            y[o[5]:o[5] + N],
        )
        mu = y[o[6]:o[6] + N * s].reshape(N, s)
        return x, x_ref, net, mu


def closed_loop_field(plant: PlantModel, consts: ControllerConsts, cfg: ControllerConfig,
                      scenario: Scenario, horizon: float | None = None) -> OdeField:
    """Derivative of the state packed by :class:`LoopLayout`, for :func:`integrate_segmented`.

    Event times are the scenario's jump and command-switch times up to ``horizon``.
    """
    layout = LoopLayout(plant.n, cfg.N, plant.m, cfg.n_s)
    A, B, B_r = plant.A, plant.B, plant.B_r[:, 0]
    A_ref = consts.A_ref

    def fn(t, y):
        x, x_ref, net, mu = layout.unpack(y)
        mem = memlib.MemoryState(mu, cfg.c_w, cfg.enable_info_term, cfg.enable_error_term, cfg.temperature)
        u, d = control(consts, cfg, net, mem, x, x_ref, B)
        s = command(scenario.command, t)
        f = uncertainty(scenario.schedule, t, x)
        dx = A @ x + B @ (u + f) + B_r * s
        dx_ref = A_ref @ x_ref + B_r * s
        e = x - x_ref
        if cfg.nn_enabled:
            dn = nn.update_derivs(net, cfg.gains, x, d["q_mu"], math.sqrt(float(e @ e)))
        else:
            dn = nn.NetDeriv(*(np.zeros_like(a) for a in (net.W, net.V, net.bw, net.bv)))
        if cfg.memory_enabled:
            dmu = memlib.write_deriv(mem, d["z"], d["hidden"], net.W, d["q_mu"])
        else:
            dmu = np.zeros_like(mu)
        return np.concatenate([dx, dx_ref, dn.dW.ravel(), dn.dV.ravel(), dn.dbw, dn.dbv, dmu.ravel()])

    return OdeField(fn, scenario.events(horizon))
