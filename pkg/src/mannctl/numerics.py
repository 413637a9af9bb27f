"""Dense linear-algebra helpers and a fixed-step integrator.

Everything here works on tiny matrices (n <= 4 in the benchmarks), so the
solvers favour transparency over asymptotic speed: Lyapunov equations are
solved by Kronecker vectorisation, the Riccati equation by Newton-Kleinman
iteration on top of that, and symmetric eigenvalues by cyclic Jacobi sweeps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "NumericsError",
    "NotHurwitz",
    "SingularSystem",
    "NotStabilizable",
    "NoConvergence",
    "NotSymmetric",
    "NonFiniteState",
    "OdeField",
    "Trajectory",
    "is_hurwitz",
    "solve_lyapunov",
    "lyapunov_residual",
    "solve_care",
    "care_residual",
    "lqr_gain",
    "stabilizing_gain",
    "sym_eigvals",
    "sym_eig",
    "integrate_segmented",
]


class NumericsError(Exception):
    """Base class for solver failures."""


class NotHurwitz(NumericsError):
    pass


class SingularSystem(NumericsError):
    pass


class NotStabilizable(NumericsError):
    pass


class NoConvergence(NumericsError):
    pass


class NotSymmetric(NumericsError):
    pass


class NonFiniteState(NumericsError):
    """Raised when an integrated state picks up a NaN or Inf."""

    def __init__(self, t: float, message: str | None = None):
        self.t = float(t)
        super().__init__(message or f"non-finite state encountered at t = {self.t:.6g} s")


def _as_square(M, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    return M


def is_hurwitz(A, margin: float = 1e-9) -> bool:
    A = _as_square(A, "A")
    return bool(np.all(np.linalg.eigvals(A).real < -margin))


def lyapunov_residual(A_ref, P, Q) -> float:
    """Frobenius norm of ``A_ref^T P + P A_ref + Q``."""
    A_ref, P, Q = (np.asarray(M, dtype=float) for M in (A_ref, P, Q))
    return float(np.linalg.norm(A_ref.T @ P + P @ A_ref + Q))


def solve_lyapunov(A_ref, Q) -> np.ndarray:
    """Solve ``A_ref^T P + P A_ref = -Q`` for symmetric positive definite P.

    The equation is vectorised row-major, ``(A^T kron I + I kron A^T) vec(P)
    = -vec(Q)``, and solved directly. That is an n^2 x n^2 system, fine for
    the n <= 4 problems this package targets.

    Raises
    ------
    NotHurwitz
        If some eigenvalue of ``A_ref`` has real part >= -1e-9.
    SingularSystem
        If the Kronecker system cannot be solved.
    """
    A_ref = _as_square(A_ref, "A_ref")
    Q = _as_square(Q, "Q")
    n = A_ref.shape[0]
    if Q.shape != (n, n):
        raise ValueError(f"Q has shape {Q.shape}, expected {(n, n)}")
    if not is_hurwitz(A_ref):
        raise NotHurwitz(f"A_ref is not Hurwitz: eigenvalues {np.linalg.eigvals(A_ref)}")
    if np.linalg.norm(Q - Q.T) > 1e-9 * max(np.linalg.norm(Q), 1.0):
        raise ValueError("Q must be symmetric")
    if np.linalg.eigvalsh(0.5 * (Q + Q.T))[0] <= 0.0:
        raise ValueError("Q must be positive definite")

    return _lyap_kron(A_ref, Q)


def _lyap_kron(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    # No definiteness checks: also used with rank-deficient right-hand sides.
    n = A.shape[0]
    eye = np.eye(n)
    kron = np.kron(A.T, eye) + np.kron(eye, A.T)
    try:
        vec = np.linalg.solve(kron, -Q.ravel())
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(vec)):
        raise SingularSystem("Lyapunov solve produced non-finite entries")
    P = vec.reshape(n, n)
    return 0.5 * (P + P.T)


def care_residual(A, B, Q, R, P) -> float:
    A, B, Q, R, P = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Q, R, P))
    return float(np.linalg.norm(A.T @ P + P @ A - P @ B @ np.linalg.solve(R, B.T @ P) + Q))


def _controllable_basis(A: np.ndarray, B: np.ndarray, tol: float = 1e-10):
    """Orthonormal basis whose leading ``r`` columns span the controllable subspace."""
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    ctrb = np.hstack(blocks)
    U, s, _ = np.linalg.svd(ctrb)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    r = int(np.sum(s > tol * scale))
    return U, r


def stabilizing_gain(A, B) -> np.ndarray:
    """Return some K with A - B K Hurwitz.

    Uses a Kalman decomposition and Bass's shifted-Gramian construction on the
    controllable part: with ``beta`` exceeding every ``|Re lambda|`` of A11,
    solving ``(A11 + beta I) X + X (A11 + beta I)^T = B1 B1^T`` and taking
    ``K1 = B1^T X^{-1}`` places the closed-loop spectrum left of ``-beta``.
    """
    A = _as_square(A, "A")
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n, m = B.shape
    if A.shape[0] != n:
        raise ValueError(f"A is {A.shape} but B is {B.shape}")
    if is_hurwitz(A):
        return np.zeros((m, n))

    U, r = _controllable_basis(A, B)
    At = U.T @ A @ U
    Bt = U.T @ B
    if r < n and not is_hurwitz(At[r:, r:]):
        raise NotStabilizable("uncontrollable modes are not asymptotically stable")
    if r == 0:
        raise NotStabilizable("no controllable modes and A is not Hurwitz")

    A11, B1 = At[:r, :r], Bt[:r, :]
    beta = float(np.max(np.abs(np.linalg.eigvals(A11).real))) + 1.0
    shifted = A11 + beta * np.eye(r)
    # (-S)^T X + X (-S) = -B1 B1^T  <=>  S X + X S^T = B1 B1^T
    gram = _lyap_kron(-shifted.T, B1 @ B1.T)
    K1 = B1.T @ np.linalg.inv(gram)
    Kt = np.zeros((m, n))
    Kt[:, :r] = K1
    return Kt @ U.T


def solve_care(A, B, Q, R, K0=None, max_iter: int = 200, rtol: float = 1e-12) -> np.ndarray:
    """Stabilising solution of ``A^T P + P A - P B R^{-1} B^T P + Q = 0``.

    Newton-Kleinman: starting from a stabilising gain ``K0`` (computed by
    :func:`stabilizing_gain` when not supplied), repeatedly solve
    ``(A - B K)^T P + P (A - B K) = -(Q + K^T R K)`` and set ``K = R^{-1} B^T P``
    until the relative change in P drops below ``rtol``.
    """
    A = _as_square(A, "A")
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    if B.shape[0] != n:
        raise ValueError(f"A is {A.shape} but B is {B.shape}")
    m = B.shape[1]
    Q = _as_square(Q, "Q")
    R = _as_square(R, "R")
    if Q.shape != (n, n) or R.shape != (m, m):
        raise ValueError("Q or R has the wrong shape")

    K = stabilizing_gain(A, B) if K0 is None else np.atleast_2d(np.asarray(K0, dtype=float))
    if not is_hurwitz(A - B @ K):
        raise NotStabilizable("initial gain does not stabilise (A, B)")

    P_prev = None
    best_step, stalled = np.inf, 0
    for _ in range(max_iter):
        Ak = A - B @ K
        P = solve_lyapunov(Ak, Q + K.T @ R @ K)
        K = np.linalg.solve(R, B.T @ P)
        if P_prev is not None:
            step = np.linalg.norm(P - P_prev)
            if step <= rtol * np.linalg.norm(P):
                return P
            # roundoff floor: quadratic convergence has stopped
            stalled = stalled + 1 if step >= best_step else 0
            best_step = min(best_step, step)
            if stalled >= 5:
                break
        P_prev = P
    if care_residual(A, B, Q, R, P) <= 1e-8 * np.linalg.norm(Q):
        return P
    raise NoConvergence(f"Newton-Kleinman did not converge in {max_iter} iterations")


def lqr_gain(P_tilde, B, R) -> np.ndarray:
    """``K = R^{-1} B^T P_tilde`` as an m x n array."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    R = _as_square(R, "R")
    return np.linalg.solve(R, B.T @ np.asarray(P_tilde, dtype=float))


def sym_eig(M, tol: float = 1e-9, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and the
    vectors as matching columns.
    """
    M = _as_square(M, "M")
    norm = float(np.linalg.norm(M))
    if np.linalg.norm(M - M.T) > tol * norm:
        raise NotSymmetric("matrix is not symmetric to working tolerance")
    a = 0.5 * (M + M.T)
    n = a.shape[0]
    v = np.eye(n)
    if norm == 0.0:
        return np.zeros(n), v

    for _ in range(max_sweeps):
        off = math.sqrt(sum(a[i, j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off <= 1e-15 * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(a[p, q])
                if abs(apq) <= 1e-18 * (abs(a[p, p]) + abs(a[q, q])) or abs(apq) < 1e-300:
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = float(a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
                v = v @ rot
    else:
        raise NoConvergence("Jacobi sweeps did not converge")

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def sym_eigvals(M, tol: float = 1e-9) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix (cyclic Jacobi)."""
    return sym_eig(M, tol=tol)[0]


@dataclass(frozen=True)
class OdeField:
    """Right-hand side ``fn(t, y) -> dy/dt`` that is smooth between ``events``.

    The field may jump at each event time; it is evaluated right-continuously
    there, and :func:`integrate_segmented` takes care of asking for left
    limits at segment ends.
    """

    fn: Callable[[float, np.ndarray], np.ndarray]
    events: tuple[float, ...] = ()


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    channels: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    def add(self, name: str, values) -> None:
        values = np.asarray(values)
        if values.shape[0] != len(self.t):
            raise ValueError(f"channel {name!r} has {values.shape[0]} rows, grid has {len(self.t)}")
        self.channels[name] = values


def segment_grid(t0: float, t1: float, h: float, events: Sequence[float] = ()) -> list[np.ndarray]:
    """Split ``[t0, t1]`` at the events and grid each piece with steps <= h.

    Consecutive pieces share their boundary point.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    if t1 <= t0:
        raise ValueError("t1 must exceed t0")
    cuts = sorted({float(e) for e in events if t0 < e < t1})
    bounds = [float(t0), *cuts, float(t1)]
    pieces = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        n = max(1, math.ceil((b - a) / h - 1e-9))
        grid = a + (b - a) * np.arange(n + 1) / n
        grid[-1] = b
        pieces.append(grid)
    return pieces


def integrate_segmented(field: OdeField, y0, t0: float, t1: float, h: float = 1e-3) -> Trajectory:
    """Classic RK4 on each smooth piece of ``field``.

    The grid is cut exactly at every event inside ``(t0, t1)``, so no RK4
    stage straddles a jump. The last stage of each piece is evaluated at the
    left limit of its right end, which keeps a right-continuous field from
    leaking the post-jump value into the pre-jump step. The state itself is
    carried across events unchanged.
    """
    y = np.array(y0, dtype=float)
    if y.ndim != 1:
        raise ValueError("y0 must be a flat vector")
    for e in field.events:
        if not (t0 <= e <= t1):
            raise ValueError(f"event time {e} outside [{t0}, {t1}]")

    pieces = segment_grid(t0, t1, h, field.events)
    total = 1 + sum(len(p) - 1 for p in pieces)
    ts = np.empty(total)
    ys = np.empty((total, y.size))
    ts[0] = t0
    ys[0] = y
    k = 0
    f = field.fn
    for grid in pieces:
        b = grid[-1]
        b_left = np.nextafter(b, -np.inf)
        for i in range(len(grid) - 1):
            t = grid[i]
            dt = grid[i + 1] - t
            t_half = t + 0.5 * dt
            t_end = b_left if i == len(grid) - 2 else grid[i + 1]
            k1 = f(t, y)
            k2 = f(t_half, y + 0.5 * dt * k1)
            k3 = f(t_half, y + 0.5 * dt * k2)
            k4 = f(t_end, y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            k += 1
            if not np.all(np.isfinite(y)):
                raise NonFiniteState(grid[i + 1])
            ts[k] = grid[i + 1]
            ys[k] = y
    return Trajectory(ts, ys)
