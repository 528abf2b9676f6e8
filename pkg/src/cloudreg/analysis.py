"""Baseline design and verification math: LQ state feedback via the
continuous Riccati equation, positive-definiteness and Lyapunov residual
checks, and step/regulation response metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .plants import Trajectory

# Positive-definiteness certificates reported for the benchmark closed-loop
# system, checked as-is; the generating relation (phi_k, gamma -> P_i) is not
# documented anywhere, so those two constants travel as opaque metadata.
REFERENCE_P_MATRICES = {
    "P1": ((5.7838, 0.9475), (0.9475, 8.4630)),
    "P2": ((3.5593, 0.6051), (0.6051, 5.2080)),
    "P3": ((4.0042, 0.6808), (0.6808, 5.8590)),
    "P4": ((4.8940, 0.8321), (0.8321, 7.1610)),
}
REFERENCE_PHI_K = 0.4
REFERENCE_GAMMA = 3.0

DEFAULT_LQ_WEIGHTS = {"q_diag": (20.0, 0.1), "r": 0.1}


class RiccatiError(RuntimeError):
    """Riccati design failed; carries the residual trace when iterating."""

    def __init__(self, message: str, trace: tuple[float, ...] = ()):
        if trace:
            message += f" (residual trace: {', '.join(f'{v:.3e}' for v in trace)})"
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True, eq=False)
class LqDesign:
    """Riccati solution bundle: weights, P, gain row K, and residual norm."""

    q: np.ndarray
    r: np.ndarray
    p: np.ndarray
    k: np.ndarray
    residual: float
    iterations: int


def _as_matrix(m, name: str) -> np.ndarray:
    a = np.atleast_2d(np.asarray(m, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got {a.shape}")
    return a


def _solve_lyapunov(a: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Solve A^T P + P A = -Q by the Kronecker linear system (small n)."""
    n = a.shape[0]
    lhs = np.kron(a.T, np.eye(n)) + np.kron(np.eye(n), a.T)
    p = np.linalg.solve(lhs, -q.reshape(-1)).reshape(n, n)
    return 0.5 * (p + p.T)


def _is_hurwitz(a: np.ndarray) -> bool:
    return bool(np.all(np.linalg.eigvals(a).real < 0.0))


def _ackermann_gain(a: np.ndarray, b: np.ndarray, poles) -> np.ndarray:
    """Single-input pole placement; needs a controllable (A, b) pair."""
    n = a.shape[0]
    cols = [b]
    for _ in range(n - 1):
        cols.append(a @ cols[-1])
    ctrb = np.column_stack(cols)
    if abs(np.linalg.det(ctrb)) < 1e-12 * max(1.0, np.abs(ctrb).max()) ** n:
        raise RiccatiError("(A, B) pair is not controllable; cannot seed a stabilizing gain")
    coeffs = np.poly(np.asarray(poles))
    chi = np.zeros_like(a)
    for c in coeffs:
        chi = chi @ a + c * np.eye(n)
    en = np.zeros(n)
    en[-1] = 1.0
    return (en @ np.linalg.solve(ctrb, chi)).reshape(1, n)


def lq_design(a, b, q, r, tol: float = 1e-10, max_iter: int = 60) -> LqDesign:
    """LQ state feedback by Newton-Kleinman iteration on the continuous ARE.

    Starting from a stabilizing gain (zero if A is already Hurwitz, else a
    pole-placement seed), each step solves one Lyapunov equation and updates
    K = R^-1 B^T P until the Riccati residual norm drops below tol.
    """
    a = _as_matrix(a, "A")
    n = a.shape[0]
    b = np.asarray(b, dtype=float).reshape(n, -1)
    q = _as_matrix(q, "Q")
    r = _as_matrix(r, "R")
    if np.abs(q - q.T).max() > 1e-9 or np.any(np.linalg.eigvalsh(q) < -1e-12):
        raise ValueError("Q must be symmetric positive semidefinite")
    if np.abs(r - r.T).max() > 1e-9 or np.any(np.linalg.eigvalsh(r) <= 0):
        raise ValueError("R must be symmetric positive definite")
    r_inv = np.linalg.inv(r)
    if _is_hurwitz(a):
        k = np.zeros((b.shape[1], n))
    else:
        if b.shape[1] != 1:
            raise RiccatiError("stabilizing seed gain is only implemented for single-input B")
        scale = 1.0 + float(np.max(np.abs(np.linalg.eigvals(a).real)))
        poles = [-scale * (1.0 + i) for i in range(n)]
        k = _ackermann_gain(a, b.reshape(n), poles)
        if not _is_hurwitz(a - b @ k):
            raise RiccatiError("pole-placement seed failed to stabilize (A, B)")
    def _residual(p):
        return float(np.linalg.norm(a.T @ p + p @ a - p @ b @ r_inv @ b.T @ p + q))

    trace: list[float] = []
    for it in range(1, max_iter + 1):
        acl = a - b @ k
        p = _solve_lyapunov(acl, q + k.T @ r @ k)
        k = r_inv @ b.T @ p
        res_norm = _residual(p)
        trace.append(res_norm)
        if res_norm <= tol:
            # one quadratic-convergence polish step once inside tolerance
            p = _solve_lyapunov(a - b @ k, q + k.T @ r @ k)
            k = r_inv @ b.T @ p
            res_norm = _residual(p)
            trace.append(res_norm)
            if not _is_hurwitz(a - b @ k):
                raise RiccatiError("converged P does not stabilize A - BK", tuple(trace))
            return LqDesign(q=q, r=r, p=p, k=k, residual=res_norm, iterations=it + 1)
    raise RiccatiError(
        f"Newton-Kleinman did not reach tol={tol} in {max_iter} iterations",
        tuple(trace),
    )


def is_positive_definite(p) -> bool:
    """Cholesky-based test; rejects inputs asymmetric beyond 1e-9."""
    p = _as_matrix(p, "P")
    if np.abs(p - p.T).max() > 1e-9:
        raise ValueError("P must be symmetric within 1e-9")
    try:
        np.linalg.cholesky(p)
        return True
    except np.linalg.LinAlgError:
        return False


def lyapunov_residual(a, p) -> tuple[np.ndarray, np.ndarray]:
    """Return S = A^T P + P A and its eigenvalues (reporting, no assertion)."""
    a = _as_matrix(a, "A")
    p = _as_matrix(p, "P")
    if a.shape != p.shape:
        raise ValueError(f"dimension mismatch: A {a.shape} vs P {p.shape}")
    s = a.T @ p + p @ a
    return s, np.linalg.eigvalsh(s)


@dataclass(frozen=True)
class ResponseMetrics:
    """Band-entry settling, steady error, overshoot, chatter, max amplitude.

    Amplitude-type metrics carry the caller's unit scale (degrees for the
    pendulum); settling is in seconds and errors in percent of span.
    """

    settling_time: float | None
    settled: bool
    steady_state_error_pct: float
    overshoot_pct: float
    chatter_width: float
    max_amplitude: float
    band: float


def compute_metrics(
    traj: Trajectory, band: float = 0.02, amplitude_scale: float = 1.0
) -> ResponseMetrics:
    """Derive response metrics from a trajectory.

    Span is |final setpoint - initial output| (falling back to the peak
    error for zero-span runs); settling is the first grid instant after
    which |y - r| stays within band * span; steady error averages the final
    10%; chatter is the output peak-to-peak over the final 20%.
    """
    if len(traj.t) < 2:
        raise ValueError("trajectory must hold at least two samples")
    y, r, t = traj.y, traj.r, traj.t
    err = y - r
    span = abs(float(r[-1]) - float(y[0]))
    if span == 0.0:
        span = float(np.abs(err).max())
    n = len(t)
    tail10 = y[max(n - max(n // 10, 1), 0):]
    rtail10 = r[max(n - max(n // 10, 1), 0):]
    tail20 = y[max(n - max(n // 5, 1), 0):]
    chatter = float(tail20.max() - tail20.min()) * amplitude_scale
    max_amp = float(np.abs(y).max()) * amplitude_scale
    if span == 0.0:
        return ResponseMetrics(0.0, True, 0.0, 0.0, chatter, max_amp, band)
    sse = float(np.mean(np.abs(tail10 - rtail10))) / span * 100.0
    e0 = float(err[0])
    if e0 != 0.0:
        overshoot = max(0.0, float(np.max(-err * math.copysign(1.0, e0)))) / span * 100.0
    else:
        overshoot = float(np.abs(err).max()) / span * 100.0
    outside = np.abs(err) > band * span
    if not outside.any():
        return ResponseMetrics(float(t[0]), True, sse, overshoot, chatter, max_amp, band)
    last_violation = int(np.max(np.nonzero(outside)[0]))
    if last_violation == n - 1:
        return ResponseMetrics(None, False, sse, overshoot, chatter, max_amp, band)
    return ResponseMetrics(
        float(t[last_violation + 1]), True, sse, overshoot, chatter, max_amp, band
    )


class LqController:
    """Full-state feedback u = -K x for the closed-loop simulator."""

    def __init__(self, k):
        self.k = np.atleast_2d(np.asarray(k, dtype=float))

    def reset(self):
        pass

    def compute(self, t, r, y, x) -> float:
        return float(-(self.k @ np.asarray(x, dtype=float))[0])


def build_stability_report() -> dict:
    """Check the reference P matrices and report Lyapunov spectra.

    The reported closed-loop A has an unstable eigenvalue, so the residual
    spectra are informational; only the positive-definiteness flags are
    assertions.
    """
    from .plants import REFERENCE_CLOSED_LOOP_A

    a = np.asarray(REFERENCE_CLOSED_LOOP_A)
    report: dict = {
        "phi_k": REFERENCE_PHI_K,
        "gamma": REFERENCE_GAMMA,
        "closed_loop_a": [list(row) for row in REFERENCE_CLOSED_LOOP_A],
        "closed_loop_a_eigenvalues": sorted(float(v) for v in np.linalg.eigvals(a).real),
        "matrices": {},
    }
    for name, rows in REFERENCE_P_MATRICES.items():
        p = np.asarray(rows)
        _, eigs = lyapunov_residual(a, p)
        report["matrices"][name] = {
            "value": [list(r) for r in rows],
            "positive_definite": is_positive_definite(p),
            "lyapunov_residual_eigenvalues": [float(v) for v in eigs],
        }
    return report
