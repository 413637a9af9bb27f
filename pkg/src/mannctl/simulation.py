"""Closed-loop runs: variants, integration engines and recorded diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .controller import ControllerConfig, ControllerConsts, LoopLayout, build_controller, closed_loop_field
from .nn import sigmoid
from .numerics import NonFiniteState, Trajectory, integrate_segmented, segment_grid
from .scenario import ALPHA, Scenario, command, equal_param_n, init_weights

__all__ = ["VARIANTS", "variant_config", "RunResult", "simulate", "record_diagnostics"]

VARIANTS = ("mann", "nn", "mann_no_cw", "mann_no_err", "nn_equal_params", "lqr_only")


def variant_config(cfg: ControllerConfig, variant: str, n: int, m: int) -> ControllerConfig:
    """Controller settings for a named variant, starting from the MANN settings ``cfg``."""
    if variant == "mann":
        return cfg.with_(memory_enabled=True, nn_enabled=True)
    if variant == "nn":
        return cfg.with_(memory_enabled=False, nn_enabled=True)
    if variant == "mann_no_cw":
        return cfg.with_(memory_enabled=True, nn_enabled=True, enable_info_term=False)
    if variant == "mann_no_err":
        return cfg.with_(memory_enabled=True, nn_enabled=True, enable_error_term=False)
    if variant == "nn_equal_params":
        return cfg.with_(memory_enabled=False, nn_enabled=True, N=equal_param_n(cfg.N, n, m, cfg.n_s))
    if variant == "lqr_only":
        return cfg.with_(memory_enabled=False, nn_enabled=False)
    raise ValueError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")


@dataclass
class RunResult:
    scenario: Scenario
    cfg: ControllerConfig
    consts: ControllerConsts
    layout: LoopLayout
    traj: Trajectory


def initial_state(scenario: Scenario, cfg: ControllerConfig, layout: LoopLayout) -> np.ndarray:
    plant = scenario.plant
    net, mu = init_weights((plant.n, cfg.N, plant.m, cfg.n_s), cfg.seed)
    zeros = np.zeros(plant.n)
    return layout.pack(zeros, zeros, net, mu)


def _kernel_args(scenario: Scenario, cfg: ControllerConfig, consts: ControllerConsts):
    plant = scenario.plant
    sch = scenario.schedule
    dims = np.array([plant.n, cfg.N, plant.m, cfg.n_s], dtype=np.int64)
    mats = (plant.A, plant.B, plant.B_r[:, 0].copy(), consts.K_lqr, consts.A_ref, consts.P)
    g = cfg.gains
    gains = np.array([g.gamma_w, g.gamma_v, g.kappa, cfg.k_z, cfg.Z_m, cfg.c_w, cfg.temperature])
    flags = np.array([cfg.enable_info_term, cfg.enable_error_term, cfg.memory_enabled, cfg.nn_enabled,
                      sch.sq_mode == "alpha"], dtype=np.bool_)
    sched = (np.array(sch.cf_const, dtype=float), np.array(sch.cf_norm, dtype=float),
             np.array([sch.sq_gain, sch.sq_base, sch.offset]))
    c = scenario.command
    cmd = (_kernel.CMD_CODES[c.kind], float(c.amplitude), float(c.period), float(c.phase))
    return dims, mats, gains, flags, sched, cmd


def simulate(scenario: Scenario, cfg: ControllerConfig, horizon: float | None = None, step: float = 1e-3,
             engine: str = "compiled") -> RunResult:
    """Integrate the closed loop from ``x = x_ref = 0`` over ``[0, horizon]``.

    ``engine="compiled"`` uses the numba kernel; ``"reference"`` integrates
    :func:`closed_loop_field` with :func:`integrate_segmented`. Both raise
    :class:`NonFiniteState` on blow-up.
    """
    T = scenario.horizon if horizon is None else float(horizon)
    plant = scenario.plant
    consts = build_controller(plant, cfg)
    layout = LoopLayout(plant.n, cfg.N, plant.m, cfg.n_s)
    y0 = initial_state(scenario, cfg, layout)
    events = scenario.events(T)

    if engine == "reference":
        field = closed_loop_field(plant, consts, cfg, scenario, horizon=T)
        traj = integrate_segmented(field, y0, 0.0, T, step)
    elif engine == "compiled":
        pieces = segment_grid(0.0, T, step, events)
        seg_a = np.array([p[0] for p in pieces])
        seg_b = np.array([p[-1] for p in pieces])
        seg_b_left = np.nextafter(seg_b, -np.inf)
        seg_n = np.array([len(p) - 1 for p in pieces], dtype=np.int64)
        seg_epoch = np.array([scenario.schedule.epoch(a) for a in seg_a], dtype=np.int64)
        t, Y, fail = _kernel.run(y0, seg_a, seg_b, seg_b_left, seg_n, seg_epoch,
                                 *_kernel_args(scenario, cfg, consts))
        if fail >= 0:
            raise NonFiniteState(t[-1])
        traj = Trajectory(t, Y)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return RunResult(scenario, cfg, consts, layout, traj)


def _schedule_f(scenario: Scenario, t: np.ndarray, X: np.ndarray) -> np.ndarray:
    sch = scenario.schedule
    k = np.searchsorted(sch.jump_times, t, side="right")
    norm2 = np.einsum("ij,ij->i", X, X)
    cf = np.asarray(sch.cf_const)[k] + np.asarray(sch.cf_norm)[k] * np.sqrt(norm2)
    sq = norm2 if sch.sq_mode == "norm" else X[:, ALPHA] ** 2
    return (sch.sq_gain * cf + sch.sq_base) * sq + sch.offset * cf


def record_diagnostics(result: RunResult) -> Trajectory:
    """Recompute control-loop signals at every grid point and attach them as channels.

    Channels: ``x``, ``x_ref``, ``e_norm``, ``alpha``, ``s``, ``u``, ``u_bl``,
    ``u_ad``, ``v``, ``f_true``, ``f_hat``, ``hidden``, ``M_r``, ``mu``.
    Signals are evaluated right-continuously at event times.
    """
    traj, lay, cfg, consts = result.traj, result.layout, result.cfg, result.consts
    scenario = result.scenario
    n, N, m, ns = lay.n, lay.N, lay.m, lay.n_s
    o = lay.offsets()
    Y = traj.y
    T = len(traj.t)
    X = Y[:, o[0]:o[0] + n]
    Xr = Y[:, o[1]:o[1] + n]
    W = Y[:, o[2]:o[2] + N * m].reshape(T, N, m)
    V = Y[:, o[3]:o[3] + n * N].reshape(T, n, N)
    bw = Y[:, o[4]:o[4] + m]
    bv = Y[:, o[5]:o[5] + N]
    mu = Y[:, o[6]:o[6] + N * ns].reshape(T, N, ns)

    E = X - Xr
    e_norm = np.sqrt(np.einsum("ij,ij->i", E, E))
    h = sigmoid(np.einsum("tij,ti->tj", V, X) + bv)
    logits = np.einsum("tjk,tj->tk", mu, h) / cfg.temperature
    z = np.exp(logits - logits.max(axis=1, keepdims=True))
    z /= z.sum(axis=1, keepdims=True)
    Mr = np.einsum("tjk,tk->tj", mu, z) if cfg.memory_enabled else np.zeros((T, N))
    if cfg.nn_enabled:
        u_ad = -np.einsum("tjc,tj->tc", W, h + Mr) - bw
    else:
        u_ad = np.zeros((T, m))
    u_bl = -X @ consts.K_lqr.T
    wn = np.sqrt(np.einsum("tjc,tjc->t", W, W))
    vn = np.sqrt(np.einsum("tij,tij->t", V, V))
    v = -cfg.k_z * (wn + vn + cfg.Z_m) * e_norm
    u = u_bl + u_ad + v[:, None]
    s = np.array([command(scenario.command, float(t)) for t in traj.t])
    f = _schedule_f(scenario, traj.t, X)

    for name, val in (("x", X), ("x_ref", Xr), ("e_norm", e_norm), ("alpha", X[:, ALPHA]), ("s", s),
                      ("u", u), ("u_bl", u_bl), ("u_ad", u_ad), ("v", v), ("f_true", f),
                      ("f_hat", -u_ad[:, 0]), ("hidden", h), ("M_r", Mr), ("mu", mu.reshape(T, N * ns))):
        traj.add(name, val)
    return traj


def slot_bound_margin(result: RunResult) -> float:
    """Worst violation of the memory slot-norm bound along the run (<= 0 means it holds).

    Each slot obeys ``d mu_i = z_i (target - mu_i)``, so its norm never exceeds
    ``max(||mu_i(0)||, sup ||target||)``.
    """
    traj, cfg = result.traj, result.cfg
    if not cfg.memory_enabled:
        return -math.inf
    ch = traj.channels if "hidden" in traj.channels else record_diagnostics(result).channels
    lay = result.layout
    T = len(traj.t)
    o = lay.offsets()
    W = traj.y[:, o[2]:o[2] + lay.N * lay.m].reshape(T, lay.N, lay.m)
    B = result.scenario.plant.B
    E = ch["x"] - ch["x_ref"]
    qm = (E @ result.consts.P) @ B
    target = np.zeros((T, lay.N))
    if cfg.enable_info_term:
        target += cfg.c_w * ch["hidden"]
    if cfg.enable_error_term:
        target += np.einsum("tjc,tc->tj", W, qm)
    sup_target = np.sqrt(np.einsum("tj,tj->t", target, target)).max()
    mu = ch["mu"].reshape(T, lay.N, lay.n_s)
    slot_norm = np.sqrt(np.einsum("tjk,tjk->tk", mu, mu))
    bound = np.maximum(slot_norm[0], sup_target) + 1e-6
    return float((slot_norm - bound[None, :]).max())
