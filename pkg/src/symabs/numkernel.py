"""Minimal dense-matrix numerics.

Symmetric eigensolves, definiteness tests, a small continuous-time Riccati
solver, and a fixed-step RK4 integrator. Everything here is deterministic
and sized for desk-scale problems (matrices up to ~8x8, state dimensions
up to a few).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (
    NoConvergenceError,
    NonFiniteError,
    NonSymmetricError,
    NotStabilizableError,
)

# Any state entry beyond this magnitude is treated as blow-up.
STATE_LIMIT = 1e12

_SYM_TOL = 1e-12


@dataclass(frozen=True)
class SymSpectrum:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""

    eigenvalues: np.ndarray
    basis: np.ndarray  # columns are eigenvectors, basis @ diag @ basis.T reconstructs

    @property
    def min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max(self) -> float:
        return float(self.eigenvalues[-1])

    def reconstruct(self) -> np.ndarray:
        return self.basis @ np.diag(self.eigenvalues) @ self.basis.T


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def sym_eigen(m, rel_tol: float = _SYM_TOL) -> SymSpectrum:
    """Eigendecomposition of a symmetric matrix, eigenvalues sorted ascending.

    Raises NonSymmetricError if the relative asymmetry exceeds ``rel_tol``
    and NonFiniteError on NaN/Inf entries.
    """
    m = _as_square(m)
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m))))
    if float(np.max(np.abs(m - m.T))) > rel_tol * scale:
        raise NonSymmetricError(
            f"asymmetry {np.max(np.abs(m - m.T)):.3e} exceeds {rel_tol:.1e} * {scale:.3e}"
        )
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    return SymSpectrum(eigenvalues=w, basis=v)


def is_negative_semidefinite(m, tol: float = 1e-9) -> bool:
    """True iff the largest eigenvalue of symmetric ``m`` is at most ``tol``."""
    return sym_eigen(m).max <= tol


def spectral_abscissa(a) -> float:
    """Largest real part over the eigenvalues of a general square matrix."""
    return float(np.max(np.real(np.linalg.eigvals(_as_square(a)))))


def solve_lyapunov(a, q) -> np.ndarray:
    """Solve A^T X + X A + Q = 0 by vectorizing into a linear system.

    Row-major vec convention: vec(M X N) = kron(M, N^T) vec(X).
    """
    a = _as_square(a)
    q = _as_square(q)
    n = a.shape[0]
    eye = np.eye(n)
    lhs = np.kron(a.T, eye) + np.kron(eye, a.T)
    x = np.linalg.solve(lhs, -q.reshape(-1)).reshape(n, n)
    return 0.5 * (x + x.T)


def solve_riccati(a, b, q, max_iter: int = 200) -> np.ndarray:
    """Stabilizing solution of A^T P + P A - P B B^T P + Q = 0.

    Kleinman iteration: seed with a gain K = c * B^T for the smallest
    c in {1, 2, 4, ...} that makes A - B K Hurwitz, then alternate
    Lyapunov solves (A-BK)^T P + P(A-BK) + Q + K^T K = 0 with gain
    updates K = B^T P. Quadratic convergence from a stabilizing seed.
    """
    a = _as_square(a)
    b = np.asarray(b, dtype=float)
    q = _as_square(q)
    n = a.shape[0]
    if b.ndim != 2 or b.shape[0] != n:
        raise ValueError(f"B must be {n}xm, got {b.shape}")

    k = None
    c = 1.0
    for _ in range(60):
        cand = c * b.T
        if spectral_abscissa(a - b @ cand) < 0.0:
            k = cand
            break
        c *= 2.0
    if k is None:
        raise NotStabilizableError(
            "no gain of the form c*B^T stabilizes A - B K for c in {1,2,4,...}"
        )

    p_prev = None
    for _ in range(max_iter):
        acl = a - b @ k
        p = solve_lyapunov(acl, q + k.T @ k)
        k = b.T @ p
        if p_prev is not None:
            if float(np.max(np.abs(p - p_prev))) <= 1e-13 * max(1.0, float(np.max(np.abs(p)))):
                break
        p_prev = p
    else:
        raise NoConvergenceError("Riccati iteration did not converge")

    residual = a.T @ p + p @ a - p @ b @ b.T @ p + q
    if float(np.linalg.norm(residual)) > 1e-8:
        raise NoConvergenceError(
            f"Riccati residual {np.linalg.norm(residual):.3e} exceeds 1e-8"
        )
    return p


class IntegrationResult(NamedTuple):
    """Sampled solution path: times (T,), states (T, *state_shape)."""

    times: np.ndarray
    states: np.ndarray


def _check_finite(x: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(x)) or float(np.max(np.abs(x))) > STATE_LIMIT:
        raise NonFiniteError(f"state left the finite range at t={t}")


def rk4_step(field: Callable, t: float, x: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of size ``h``."""
    k1 = field(t, x)
    k2 = field(t + 0.5 * h, x + (0.5 * h) * k1)
    k3 = field(t + 0.5 * h, x + (0.5 * h) * k2)
    k4 = field(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def time_grid(t_span: Sequence[float], dt: float) -> np.ndarray:
    """Sample grid t0, t0+dt, ..., t1 with the final partial step shortened."""
    t0, t1 = float(t_span[0]), float(t_span[1])
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if t1 < t0:
        raise ValueError("t_span must be increasing")
    n_full = int(np.floor((t1 - t0) / dt + 1e-9))
    times = t0 + dt * np.arange(n_full + 1)
    if t1 - times[-1] > 1e-9 * max(dt, 1.0):
        times = np.append(times, t1)
    else:
        times[-1] = min(times[-1], t1)
    return times


def integrate_rk4(
    field: Callable[[float, np.ndarray], np.ndarray],
    x0,
    t_span: Sequence[float],
    dt: float,
) -> IntegrationResult:
    """Fixed-step RK4 integration of ``dx/dt = field(t, x)``.

    The state may be any ndarray shape (vector, or a batch of vectors);
    the field must return the matching shape. Deterministic for fixed
    inputs. Raises NonFiniteError if any state entry leaves the finite
    range, which is how blow-up / loss of forward completeness surfaces
    at desk scale.
    """
    x = np.array(x0, dtype=float)
    times = time_grid(t_span, dt)
    _check_finite(x, times[0])
    states = np.empty((len(times),) + x.shape)
    states[0] = x
    for i in range(len(times) - 1):
        h = times[i + 1] - times[i]
        x = rk4_step(field, float(times[i]), x, float(h))
        _check_finite(x, float(times[i + 1]))
        states[i + 1] = x
    return IntegrationResult(times=times, states=states)
