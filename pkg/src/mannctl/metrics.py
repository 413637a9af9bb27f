"""Tracking metrics, induced-learning diagnostics and the Riccati scaling sweep."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .numerics import Trajectory, lqr_gain, solve_care, solve_lyapunov, sym_eigvals
from .scenario import CommandSpec, PlantModel, command

__all__ = [
    "peak_deviation",
    "settling_time",
    "estimation_error_trace",
    "hidden_layer_diag",
    "RunMetrics",
    "run_metrics",
    "SweepTable",
    "riccati_scaling_sweep",
    "scalar_plant",
    "reduction_pct",
    "summarize",
]

DEG = 180.0 / math.pi


def _tracking(traj: Trajectory, cmd):
    alpha = traj.channels["alpha"]
    if isinstance(cmd, CommandSpec):
        s = np.array([command(cmd, float(t)) for t in traj.t])
    elif cmd is None:
        s = traj.channels["s"]
    else:
        s = np.asarray(cmd, dtype=float)
    return alpha, s


def _mask(t: np.ndarray, epoch) -> np.ndarray:
    ta, tb = epoch
    return (t >= ta) & (t < tb)


def peak_deviation(traj: Trajectory, cmd, epoch) -> float:
    """``max |alpha - s|`` over grid points in ``[t_a, t_b)``, in degrees.

    ``cmd`` is a :class:`CommandSpec`, an array of command samples, or
    ``None`` to use the recorded ``s`` channel.
    """
    alpha, s = _tracking(traj, cmd)
    m = _mask(traj.t, epoch)
    if not m.any():
        return 0.0
    return float(np.max(np.abs(alpha[m] - s[m]))) * DEG


def settling_time(traj: Trajectory, cmd, epoch, band_frac: float = 0.01, floor: float = 1e-3) -> float:
    """Time after ``t_a`` from which ``|alpha - s|`` stays inside the band.

    The band is ``band_frac * max(|s|, floor)`` (radians). The exit from the
    band is located by linear interpolation between grid points. Returns the
    epoch length when the error is still outside the band at the last grid
    point of the epoch.
    """
    alpha, s = _tracking(traj, cmd)
    ta, tb = epoch
    m = _mask(traj.t, epoch)
    t = traj.t[m]
    if t.size == 0:
        return 0.0
    excess = np.abs(alpha[m] - s[m]) - band_frac * np.maximum(np.abs(s[m]), floor)
    out = np.flatnonzero(excess > 0.0)
    if out.size == 0:
        return 0.0
    k = out[-1]
    if k == t.size - 1:
        return float(tb - ta)
    e0, e1 = excess[k], excess[k + 1]
    tc = t[k] + (t[k + 1] - t[k]) * e0 / (e0 - e1)
    return float(tc - ta)


def estimation_error_trace(traj: Trajectory) -> np.ndarray:
    """``f(x(t)) - f_hat(t)`` with ``f_hat = -u_ad``."""
    return traj.channels["f_true"] - traj.channels["f_hat"]


def hidden_layer_diag(traj: Trajectory, c_w: float) -> dict[str, np.ndarray]:
    """Hidden outputs and memory reads scaled by ``1 / c_w`` (raw reads if ``c_w`` is 0)."""
    h = traj.channels["hidden"]
    Mr = traj.channels["M_r"]
    scale = 1.0 / c_w if c_w else 1.0
    out = {f"hidden_{j}": h[:, j] for j in range(h.shape[1])}
    out.update({f"mr_{j}": Mr[:, j] * scale for j in range(Mr.shape[1])})
    return out


@dataclass
class RunMetrics:
    epochs: list
    peak_deviation_deg: list
    settling_time_s: list
    peak_overall_deg: float
    peak_disturbed_deg: float
    settling_disturbed_s: float
    final_error: float
    max_error_norm: float
    bounded: bool
    max_mu_fro: float

    def as_dict(self) -> dict:
        return asdict(self)


def run_metrics(traj: Trajectory, epochs, jump_times=(), band_frac: float = 0.01, e_bound: float = 10.0,
                ) -> RunMetrics:
    """All metrics of one run from its recorded channels.

    ``peak_disturbed_deg`` is the peak over every epoch that starts at or
    after the first jump, and ``settling_disturbed_s`` the mean settling time
    over those epochs. Without jumps both fall back to the whole run.
    """
    epochs = [tuple(map(float, ep)) for ep in epochs]
    peaks = [peak_deviation(traj, None, ep) for ep in epochs]
    settle = [settling_time(traj, None, ep, band_frac) for ep in epochs]
    first = min(jump_times) if len(jump_times) else None
    idx = [i for i, ep in enumerate(epochs) if first is not None and ep[0] >= first] or list(range(len(epochs)))
    span = (epochs[0][0], math.inf)
    e_norm = traj.channels["e_norm"]
    mu = traj.channels.get("mu")
    finite = bool(np.all(np.isfinite(traj.y)))
    return RunMetrics(
        epochs=[list(ep) for ep in epochs],
        peak_deviation_deg=peaks,
        settling_time_s=settle,
        peak_overall_deg=peak_deviation(traj, None, span),
        peak_disturbed_deg=max(peaks[i] for i in idx),
        settling_disturbed_s=float(np.mean([settle[i] for i in idx])),
        final_error=float(e_norm[-1]),
        max_error_norm=float(e_norm.max()),
        bounded=finite and float(e_norm.max()) <= e_bound,
        max_mu_fro=float(np.sqrt((mu ** 2).sum(axis=1)).max()) if mu is not None and mu.size else 0.0,
    )


def reduction_pct(baseline: float, value: float) -> float:
    """Relative improvement of ``value`` over ``baseline`` in percent."""
    if baseline == 0:
        return 0.0
    return 100.0 * (baseline - value) / baseline


def summarize(values) -> dict:
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"median": float(med), "q1": float(q1), "q3": float(q3), "n": int(v.size)}


def _slope(xs, ys) -> float:
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass
class SweepTable:
    K_v: list
    lam_min: list
    lam_max: list
    pb_norm: list
    slope_min: float
    slope_max: float
    slope_pb: float
    eig_ok: bool
    pb_ok: bool

    def rows(self):
        return list(zip(self.K_v, self.lam_min, self.lam_max, self.pb_norm))

    def as_dict(self) -> dict:
        return asdict(self)


def riccati_scaling_sweep(plant: PlantModel, K_v_list, K_r: float = 1.0, rhs_factor: int = 1,
                          eig_range=(0.45, 1.05), pb_max: float = 0.85) -> SweepTable:
    """Eigenvalues of the CARE solution and ``||PB||_F`` across ``K_v``, with log-log slopes."""
    K_v_list = [float(k) for k in K_v_list]
    if len(K_v_list) < 4:
        raise ValueError("need at least four K_v values")
    n, m = plant.n, plant.m
    lo, hi, pb = [], [], []
    for kv in K_v_list:
        Pt = solve_care(plant.A, plant.B, kv * np.eye(n), K_r * np.eye(m))
        lam = sym_eigvals(Pt)
        A_ref = plant.A - plant.B @ lqr_gain(Pt, plant.B, K_r * np.eye(m))
        P = solve_lyapunov(A_ref, rhs_factor * kv * np.eye(n))
        lo.append(float(lam[0]))
        hi.append(float(lam[-1]))
        pb.append(float(np.linalg.norm(P @ plant.B)))
    s_lo, s_hi, s_pb = _slope(K_v_list, lo), _slope(K_v_list, hi), _slope(K_v_list, pb)
    eig_ok = all(eig_range[0] <= s <= eig_range[1] for s in (s_lo, s_hi))
    return SweepTable(K_v_list, lo, hi, pb, s_lo, s_hi, s_pb, eig_ok, s_pb <= pb_max)


def scalar_plant(a: float = 0.0, b: float = 1.0) -> PlantModel:
    return PlantModel(np.array([[a]]), np.array([[b]]), np.zeros((1, 1)), ("x",))
