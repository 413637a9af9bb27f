"""Benchmark definitions for the B-747 longitudinal flight-control problem."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import NotStabilizable, stabilizing_gain
from .nn import TwoLayerNet

__all__ = [
    "PlantModel",
    "b747_plant",
    "UncertaintySchedule",
    "example_schedule",
    "uncertainty",
    "CommandSpec",
    "command",
    "command_events",
    "Scenario",
    "SCENARIOS",
    "get_scenario",
    "SplitMix64",
    "init_weights",
    "equal_param_n",
]

ALPHA = 1  # index of angle of attack in the B-747 state [e_I, alpha, q]


@dataclass(frozen=True)
class PlantModel:
    A: np.ndarray
    B: np.ndarray
    B_r: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float).reshape(A.shape[0], -1)
        B_r = np.asarray(self.B_r, dtype=float).reshape(A.shape[0], -1)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "B_r", B_r)
        try:
            stabilizing_gain(A, B)
        except NotStabilizable as exc:
            raise NotStabilizable(f"plant (A, B) is not stabilizable: {exc}") from exc

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


def b747_plant() -> PlantModel:
    """Longitudinal B-747 dynamics (0.8 Mach, 6000 m) with an integrator on alpha - s."""
    A = np.array(
        [
            [0.0, 1.0, 0.0],
            [0.0, -0.32, 0.86],
            [0.0, -0.93, -0.43],
        ]
    )
    B = np.array([[0.0], [-0.02], [-1.16]])
    B_r = np.array([[-1.0], [0.0], [0.0]])
    return PlantModel(A, B, B_r, ("e_I", "alpha", "q"))


@dataclass(frozen=True)
class UncertaintySchedule:
    """Matched uncertainty ``f = (sq_gain * C_f + sq_base) * sq(x) + offset * C_f``.

    ``C_f`` is piecewise defined on the epochs delimited by ``jump_times``:
    in epoch k it equals ``cf_const[k] + cf_norm[k] * ||x||_2``. ``sq(x)`` is
    ``||x||_2^2`` in ``"norm"`` mode and ``alpha^2`` in ``"alpha"`` mode.
    """

    name: str
    jump_times: tuple[float, ...]
    cf_const: tuple[float, ...]
    cf_norm: tuple[float, ...]
    sq_gain: float = 0.0
    sq_base: float = 1.0
    offset: float = 0.1
    sq_mode: str = "norm"

    def __post_init__(self):
        k = len(self.jump_times) + 1
        if len(self.cf_const) != k or len(self.cf_norm) != k:
            raise ValueError("need one C_f entry per epoch")
        if any(b <= a for a, b in zip(self.jump_times, self.jump_times[1:])):
            raise ValueError("jump times must be strictly increasing")
        if self.sq_mode not in ("norm", "alpha"):
            raise ValueError("sq_mode must be 'norm' or 'alpha'")

    def epoch(self, t: float) -> int:
        """Index of the epoch containing t (right-continuous at jumps)."""
        return int(np.searchsorted(self.jump_times, t, side="right"))


def _cumulative(c0: float, factors) -> tuple[float, ...]:
    values = [c0]
    for f in factors:
        values.append(values[-1] * f)
    return tuple(values)


def example_schedule(example: int, sq_mode: str = "norm") -> UncertaintySchedule:
    """The four uncertainty schedules of the flight-control benchmark (C_f = 0.1 at t = 0)."""
    jumps = (5.0, 25.0)
    if example == 1:
        return UncertaintySchedule(
            "b747-ex1", jumps, _cumulative(0.1, (50, 2)), (0.0, 0.0, 0.0),
            sq_gain=1.0, sq_base=0.0, offset=0.0, sq_mode=sq_mode,
        )
    if example == 2:
        return UncertaintySchedule("b747-ex2", jumps, _cumulative(0.1, (10, 2)), (0.0, 0.0, 0.0), sq_mode=sq_mode)
    if example == 3:
        return UncertaintySchedule("b747-ex3", jumps, _cumulative(0.1, (100, 2)), (0.0, 0.0, 0.0), sq_mode=sq_mode)
    if example == 4:
        return UncertaintySchedule("b747-ex4", jumps, (0.1, 0.0, 0.0), (0.0, 1.0, 10.0), sq_mode=sq_mode)
    raise ValueError(f"unknown example {example}")


def nominal_schedule() -> UncertaintySchedule:
    return UncertaintySchedule("b747-nominal", (), (0.0,), (0.0,), sq_gain=0.0, sq_base=0.0, offset=0.0)


def uncertainty(schedule: UncertaintySchedule, t: float, x) -> np.ndarray:
    """Matched uncertainty f(t, x) as a length-1 array."""
    x = np.asarray(x, dtype=float)
    k = schedule.epoch(t)
    norm = math.sqrt(float(x @ x))
    cf = schedule.cf_const[k] + schedule.cf_norm[k] * norm
    sq = norm * norm if schedule.sq_mode == "norm" else float(x[ALPHA]) ** 2
    return np.array([(schedule.sq_gain * cf + schedule.sq_base) * sq + schedule.offset * cf])


COMMAND_KINDS = ("step", "square", "sine", "constant")


@dataclass(frozen=True)
class CommandSpec:
    kind: str = "step"
    amplitude: float = math.pi / 180.0
    period: float = 20.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in COMMAND_KINDS:
            raise ValueError(f"unknown command kind {self.kind!r}; choose from {COMMAND_KINDS}")
        if not math.isfinite(self.amplitude):
            raise ValueError("command amplitude must be finite")
        if self.kind in ("square", "sine") and not self.period > 0:
            raise ValueError("period must be positive")


def command(spec: CommandSpec, t: float) -> float:
    """Command signal s(t) in radians. ``phase`` is a time offset in seconds."""
    if spec.kind in ("step", "constant"):
        return spec.amplitude if (spec.kind == "constant" or t >= spec.phase) else 0.0
    if spec.kind == "sine":
        return spec.amplitude * math.sin(2.0 * math.pi * (t - spec.phase) / spec.period)
    frac = ((t - spec.phase) / spec.period) % 1.0
    return spec.amplitude if frac < 0.5 else -spec.amplitude


def command_events(spec: CommandSpec, t0: float, t1: float) -> tuple[float, ...]:
    """Times in (t0, t1) at which s(t) is discontinuous."""
    if spec.kind == "step":
        return (spec.phase,) if t0 < spec.phase < t1 else ()
    if spec.kind == "square":
        half = 0.5 * spec.period
        k0 = math.floor((t0 - spec.phase) / half) + 1
        out = []
        t = spec.phase + k0 * half
        while t < t1:
            if t > t0:
                out.append(t)
            k0 += 1
            t = spec.phase + k0 * half
        return tuple(out)
    return ()


@dataclass(frozen=True)
class Scenario:
    name: str
    plant: PlantModel
    schedule: UncertaintySchedule
    command: CommandSpec = field(default_factory=CommandSpec)
    horizon: float = 50.0
    epochs: tuple[tuple[float, float], ...] = ((0.0, 5.0), (5.0, 25.0), (25.0, 50.0))

    def events(self, horizon: float | None = None) -> tuple[float, ...]:
        T = self.horizon if horizon is None else horizon
        ev = {t for t in self.schedule.jump_times if 0.0 < t < T}
        ev.update(command_events(self.command, 0.0, T))
        return tuple(sorted(ev))


def _build_scenarios() -> dict[str, Scenario]:
    plant = b747_plant()
    out = {f"b747-ex{k}": Scenario(f"b747-ex{k}", plant, example_schedule(k)) for k in (1, 2, 3, 4)}
    out["b747-nominal"] = Scenario("b747-nominal", plant, nominal_schedule())
    return out


SCENARIOS = _build_scenarios()


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(sorted(SCENARIOS))}") from None


class SplitMix64:
    """SplitMix64 generator.

    ``next_u64`` follows the reference constants; ``uniform`` maps the top 53
    bits to [0, 1). Any implementation with the same recipe reproduces the
    same stream for a given seed.
    """

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = int(seed) & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniforms(self, shape) -> np.ndarray:
        size = int(np.prod(shape))
        return np.array([self.uniform() for _ in range(size)]).reshape(shape)


def init_weights(dims, seed: int):
    """Initial network and memory for one run.

    ``dims = (n, N, m, n_s)``. Output weights and bias start at zero; V, bv
    and the memory are filled, in that order and row-major, with uniforms on
    [0, 1) from ``SplitMix64(seed)``.
    """
    n, N, m, n_s = (int(d) for d in dims)
    rng = SplitMix64(seed)
    V = rng.uniforms((n, N))
    bv = rng.uniforms((N,))
    mu = rng.uniforms((N, n_s)) if n_s > 0 else np.zeros((N, 0))
    return TwoLayerNet(np.zeros((N, m)), V, np.zeros(m), bv), mu


def param_count(n: int, N: int, m: int, n_s: int = 0) -> int:
    return (n + 1) * N + (N + 1) * m + n_s * N


def equal_param_n(N: int, n: int, m: int, n_s: int) -> int:
    """Smallest hidden width whose plain network has at least as many parameters as the MANN."""
    if min(N, n, m) < 1 or n_s < 0:
        raise ValueError("dimensions must be positive")
    target = param_count(n, N, m, n_s)
    Np = N
    while param_count(n, Np, m) < target:
        Np += 1
    return Np
