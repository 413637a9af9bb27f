"""Online estimation of a drifting function, with and without working memory.

The unknown signal is ``y = W^T sigma(V(t)^T x) + delta(t)``. Its hidden
weights ``V`` change quickly (``dV/dt = d_f``) while the input ``x`` and the
estimator weights move on a slow timescale scaled by ``eps``. The memory is
fast: it is written with the same three-term rule the controller uses, with
the output error standing in for ``q_mu``.

Weights use the estimation convention ``W`` (N,), ``V`` (n, N), no biases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .memory import MemoryState, attention, read, write_deriv
from .nn import sigmoid
from .numerics import OdeField, Trajectory, integrate_segmented

__all__ = [
    "NotIrreducible",
    "TrueFunction",
    "EstimationConfig",
    "EstimatorState",
    "plain_estimate",
    "mem_estimate",
    "equivalent_init",
    "run_two_timescale",
    "boundary_layer_run",
    "memory_boundary_layer_run",
    "Theorem1Report",
    "theorem1_check",
    "random_step_experiment",
    "run_experiment",
]


class NotIrreducible(ValueError):
    pass


@dataclass(frozen=True)
class TrueFunction:
    """Ground-truth network with a piecewise description of ``d_f``.

    ``ramps`` holds ``(t_start, t_end, rate)`` triples during which
    ``dV/dt = rate``; ``jumps`` holds ``(t, dV)`` impulses. ``delta(t)`` is
    ``delta_bar * sin(delta_omega * t)``.
    """

    W: np.ndarray
    V0: np.ndarray
    ramps: tuple = ()
    jumps: tuple = ()
    delta_bar: float = 0.0
    delta_omega: float = 1.0

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float).ravel()
        V0 = np.atleast_2d(np.asarray(self.V0, dtype=float))
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "V0", V0)
        if V0.shape[1] != W.size:
            raise ValueError("V0 must have one column per hidden neuron")
        if np.any(W == 0.0) or np.any(np.all(V0 == 0.0, axis=0)):
            raise NotIrreducible("every hidden neuron needs non-zero input and output weights")
        for i in range(W.size):
            for j in range(i + 1, W.size):
                if np.array_equal(V0[:, i], V0[:, j]):
                    raise NotIrreducible(f"hidden neurons {i} and {j} have identical input weights")

    @property
    def n(self) -> int:
        return self.V0.shape[0]

    @property
    def N(self) -> int:
        return self.W.size

    def V(self, t: float) -> np.ndarray:
        V = self.V0.copy()
        for t0, t1, rate in self.ramps:
            V += np.asarray(rate) * min(max(t - t0, 0.0), t1 - t0)
        for tj, dV in self.jumps:
            if t >= tj:
                V += np.asarray(dV)
        return V

    def delta(self, t: float) -> float:
        return self.delta_bar * math.sin(self.delta_omega * t)

    def y(self, t: float, x) -> float:
        return float(self.W @ sigmoid(self.V(t).T @ x)) + self.delta(t)

    def events(self) -> tuple[float, ...]:
        ev = {float(t) for t, _ in self.jumps}
        for t0, t1, _ in self.ramps:
            ev.update((float(t0), float(t1)))
        return tuple(sorted(ev))


@dataclass(frozen=True)
class EstimationConfig:
    eps: float = 1e-3
    horizon: float = 10.0
    step: float = 1e-2
    gamma_w: float = 1.0
    gamma_v: float = 1.0
    alpha: float = 1.0
    c_w: float = 1.0
    n_s: int = 1
    x0: tuple = (0.5, -0.5)
    d_s: tuple = (1.0, 1.0)

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.n_s < 1:
            raise ValueError("need at least one memory slot")

    def x(self, t: float) -> np.ndarray:
        return np.asarray(self.x0, dtype=float) + self.eps * t * np.asarray(self.d_s, dtype=float)


@dataclass
class EstimatorState:
    W: np.ndarray
    V: np.ndarray
    W_m: np.ndarray
    V_m: np.ndarray
    mu: np.ndarray
    alpha: float


def plain_estimate(W_hat, V_hat, x, y):
    """``(y_hat, e)`` with ``y_hat = W^T sigma(V^T x)``."""
    y_hat = float(np.asarray(W_hat) @ sigmoid(np.asarray(V_hat).T @ np.asarray(x)))
    return y_hat, y - y_hat


def mem_estimate(W_m, V_m, x, mu, alpha: float, y, temperature: float = 1.0):
    """``(y_hat_m, e_m)`` with ``y_hat_m = W_m^T (sigma(V_m^T x) + alpha M_r)``."""
    h = sigmoid(np.asarray(V_m).T @ np.asarray(x))
    Mr = read(mu, attention(mu, h, temperature))
    y_hat = float(np.asarray(W_m) @ (h + alpha * Mr))
    return y_hat, y - y_hat


def equivalent_init(true_fn: TrueFunction, alpha: float, x0, n_s: int = 1, perm=None) -> EstimatorState:
    """Estimators that reproduce ``W^T sigma(V(0)^T x0)`` exactly at t = 0.

    The memory estimator gets ``W / (1 + alpha)`` and every memory column set
    to its own hidden output, so ``M_r`` equals that output. ``perm`` applies
    the same permutation to the hidden neurons of both estimators.
    """
    W, V = true_fn.W.copy(), true_fn.V0.copy()
    if perm is not None:
        W, V = W[perm], V[:, perm]
    h0 = sigmoid(V.T @ np.asarray(x0, dtype=float))
    mu = np.repeat(h0[:, None], n_s, axis=1)
    return EstimatorState(W, V, W / (1.0 + alpha), V.copy(), mu, alpha)


@dataclass
class EstimationTrace:
    t: np.ndarray
    e: np.ndarray
    e_m: np.ndarray
    y: np.ndarray
    delta: np.ndarray
    Mr_dev: np.ndarray
    traj: Trajectory = field(repr=False, default=None)


def _pack(st: EstimatorState) -> np.ndarray:
    return np.concatenate([st.W, st.V.ravel(), st.W_m, st.V_m.ravel(), st.mu.ravel()])


def _unpack(y, n: int, N: int, n_s: int):
    o = 0
    W = y[o:o + N]; o += N
    V = y[o:o + n * N].reshape(n, N); o += n * N
    W_m = y[o:o + N]; o += N
    V_m = y[o:o + n * N].reshape(n, N); o += n * N
    mu = y[o:o + N * n_s].reshape(N, n_s)
    return W, V, W_m, V_m, mu


def _grad_step(W, V, x, e, gw, gv):
    # gradient descent on e^2 / 2 for y_hat = W^T sigma(V^T x)
    h = sigmoid(V.T @ x)
    dW = gw * e * h
    dV = gv * e * np.outer(x, W * h * (1.0 - h))
    return dW, dV


def run_two_timescale(true_fn: TrueFunction, cfg: EstimationConfig, state: EstimatorState | None = None,
                      ) -> EstimationTrace:
    """Integrate both estimators against the same disturbance realisation.

    Slow weights follow ``eps * gamma`` gradient steps on their own error; the
    memory is written at unit rate with the memory estimator's error as the
    correction signal.
    """
    n, N, n_s = true_fn.n, true_fn.N, cfg.n_s
    if N < 2:
        raise ValueError("memory estimation needs at least two hidden neurons")
    if state is None:
        state = equivalent_init(true_fn, cfg.alpha, cfg.x(0.0), n_s)
    alpha = state.alpha
    eps = cfg.eps

    def fn(t, yv):
        W, V, W_m, V_m, mu = _unpack(yv, n, N, n_s)
        x = cfg.x(t)
        y = true_fn.y(t, x)
        _, e = plain_estimate(W, V, x, y)
        _, e_m = mem_estimate(W_m, V_m, x, mu, alpha, y)
        dW, dV = _grad_step(W, V, x, e, cfg.gamma_w, cfg.gamma_v)
        dWm, dVm = _grad_step(W_m, V_m, x, e_m, cfg.gamma_w, cfg.gamma_v)
        h_m = sigmoid(V_m.T @ x)
        z = attention(mu, h_m)
        dmu = write_deriv(MemoryState(mu, cfg.c_w), z, h_m, W_m[:, None], np.array([e_m]))
        return np.concatenate([eps * dW, eps * dV.ravel(), eps * dWm, eps * dVm.ravel(), dmu.ravel()])

    events = tuple(t for t in true_fn.events() if 0.0 <= t <= cfg.horizon)
    traj = integrate_segmented(OdeField(fn, events), _pack(state), 0.0, cfg.horizon, cfg.step)

    k = len(traj.t)
    e = np.empty(k); e_m = np.empty(k); ys = np.empty(k); dl = np.empty(k); dev = np.empty(k)
    for i, (t, yv) in enumerate(zip(traj.t, traj.y)):
        W, V, W_m, V_m, mu = _unpack(yv, n, N, n_s)
        x = cfg.x(t)
        ys[i] = true_fn.y(t, x)
        dl[i] = true_fn.delta(t)
        e[i] = plain_estimate(W, V, x, ys[i])[1]
        e_m[i] = mem_estimate(W_m, V_m, x, mu, alpha, ys[i])[1]
        h_m = sigmoid(V_m.T @ x)
        dev[i] = np.linalg.norm(read(mu, attention(mu, h_m)) - h_m)
    return EstimationTrace(traj.t, e, e_m, ys, dl, dev, traj)


def boundary_layer_run(true_fn: TrueFunction, cfg: EstimationConfig, t=None):
    """Plain-estimator error with its weights and input frozen at t = 0.

    With nothing slow moving, the error has the closed form
    ``W^T (sigma(V(t)^T x0) - sigma(V(0)^T x0)) + delta(t)``.
    Returns ``(t, e_bl, e_bl_max)``.
    """
    if t is None:
        t = np.linspace(0.0, cfg.horizon, int(round(cfg.horizon / cfg.step)) + 1)
    x0 = cfg.x(0.0)
    y_hat0 = float(true_fn.W @ sigmoid(true_fn.V0.T @ x0))
    e_bl = np.array([true_fn.y(float(ti), x0) - y_hat0 for ti in t])
    return t, e_bl, float(np.max(np.abs(e_bl)))


def memory_boundary_layer_run(true_fn: TrueFunction, cfg: EstimationConfig):
    """Memory estimator with slow states frozen; only the memory evolves.

    Returns ``(t, e_m_bl, delta_m_est)`` where ``delta_m_est`` is the largest
    distance between the memory read and the true hidden output
    ``sigma(V(t)^T x0)``.
    """
    n, N, n_s = true_fn.n, true_fn.N, cfg.n_s
    x0 = cfg.x(0.0)
    st = equivalent_init(true_fn, cfg.alpha, x0, n_s)
    h_m = sigmoid(st.V_m.T @ x0)
    W_m = st.W_m

    def read_out(mu):
        return read(mu, attention(mu, h_m))

    def fn(t, yv):
        mu = yv.reshape(N, n_s)
        y = true_fn.y(t, x0)
        e_m = y - float(W_m @ (h_m + cfg.alpha * read_out(mu)))
        z = attention(mu, h_m)
        return write_deriv(MemoryState(mu, cfg.c_w), z, h_m, W_m[:, None], np.array([e_m])).ravel()

    events = tuple(t for t in true_fn.events() if 0.0 <= t <= cfg.horizon)
    traj = integrate_segmented(OdeField(fn, events), st.mu.ravel(), 0.0, cfg.horizon, cfg.step)
    e_m = np.empty(len(traj.t))
    dev = np.empty(len(traj.t))
    for i, (t, yv) in enumerate(zip(traj.t, traj.y)):
        Mr = read_out(yv.reshape(N, n_s))
        e_m[i] = true_fn.y(t, x0) - float(W_m @ (h_m + cfg.alpha * Mr))
        dev[i] = np.linalg.norm(Mr - sigmoid(true_fn.V(t).T @ x0))
    return traj.t, e_m, float(dev.max())


@dataclass(frozen=True)
class Theorem1Report:
    max_e_m: float
    e_bl_max: float
    bound: float
    ratio: float
    passed: bool

    def as_dict(self) -> dict:
        return {"max_e_m": self.max_e_m, "e_bl_max": self.e_bl_max, "bound": self.bound,
                "ratio": self.ratio, "pass": self.passed}


def theorem1_check(e_m, e_bl_max: float, alpha: float, delta_bar: float, delta_m_est: float,
                   c: float = 2.0) -> Theorem1Report:
    """Compare ``max |e_m|`` with ``e_bl_max / (1 + alpha) + c * alpha * (delta_bar + delta_m_est)``."""
    max_em = float(np.max(np.abs(e_m)))
    bound = e_bl_max / (1.0 + alpha) + c * alpha * (delta_bar + delta_m_est)
    ratio = max_em / e_bl_max if e_bl_max > 0 else (0.0 if max_em == 0 else math.inf)
    return Theorem1Report(max_em, float(e_bl_max), float(bound), float(ratio), bool(max_em <= bound))


def random_step_experiment(seed: int, n: int = 2, N: int = 4, delta_bar: float = 0.0,
                           t_on: float = 1.0, duration: float = 1.0):
    """A random true network whose hidden weights ramp during ``[t_on, t_on + duration]``.

    ``d_f`` is a step in the rate of change (on at ``t_on``, off again after
    ``duration``). Output weights have magnitude in [1, 2] with random sign;
    ``V0``, the rate, ``x0`` and ``d_s`` are uniform on [-1, 1].
    """
    rng = np.random.default_rng(seed)
    W = rng.uniform(1.0, 2.0, N) * rng.choice([-1.0, 1.0], N)
    V0 = rng.uniform(-1.0, 1.0, (n, N))
    rate = rng.uniform(-1.0, 1.0, (n, N))
    x0 = rng.uniform(-1.0, 1.0, n)
    d_s = rng.uniform(-1.0, 1.0, n)
    true_fn = TrueFunction(W, V0, ramps=((t_on, t_on + duration, rate),), delta_bar=delta_bar)
    return true_fn, tuple(x0), tuple(d_s)


def run_experiment(seed: int, cfg: EstimationConfig | None = None, c: float = 2.0, **kwargs) -> dict:
    """One seeded experiment: both estimators, both boundary-layer references and the bound check."""
    cfg = cfg or EstimationConfig()
    true_fn, x0, d_s = random_step_experiment(seed, **kwargs)
    cfg = EstimationConfig(**{**cfg.__dict__, "x0": x0, "d_s": d_s})
    trace = run_two_timescale(true_fn, cfg)
    _, _, e_bl_max = boundary_layer_run(true_fn, cfg, trace.t)
    _, _, dm = memory_boundary_layer_run(true_fn, cfg)
    rep = theorem1_check(trace.e_m, e_bl_max, cfg.alpha, true_fn.delta_bar, dm, c)
    return {"seed": seed, "max_e": float(np.max(np.abs(trace.e))), "delta_m_est": dm, **rep.as_dict(),
            "trace": trace}
