"""Certificate mathematics for the concrete/abstract pair.

A certificate is a quadratic function V(x, x') = (x - x')^T P (x - x')
together with an interface gain L, a decay rate alpha, and an incremental
multiplier matrix M for the structured nonlinearity. This module checks
multiplier validity and the certificate matrix inequality, falsifies the
practical-stability Lyapunov decrease by sampling, and evaluates the
closed-form discretization and disturbance bounds with their derived
constants (sigma gains, K1, K2, interface-error margin).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import json
import math

import numpy as np

from . import numkernel
from .errors import (
    DimensionMismatchError,
    DisturbanceTooLargeError,
    EmptyInputMapError,
)
from .geometry import Box
from .systems import AbstractSystem, ConcreteSystem, IqcSystem

FEASIBILITY_TOL = 1e-9
FALSIFIER_TOL = 1e-7


def _matrix_norm2(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


@dataclass
class Certificate:
    """Quadratic certificate (P, L, alpha, M) with derived constants.

    ``input_matrix`` is the B through which the interface gain acts; it
    enters the amplified-gain matrix L_hat = L^T B^T P B L. For symmetric
    positive definite P the matrix norm ||P|| equals lambda_max(P).
    """

    p_matrix: np.ndarray
    gain: np.ndarray
    alpha: float
    multiplier: np.ndarray
    input_matrix: np.ndarray

    def __post_init__(self):
        self.p_matrix = np.asarray(self.p_matrix, dtype=float)
        self.gain = np.asarray(self.gain, dtype=float)
        self.multiplier = np.asarray(self.multiplier, dtype=float)
        self.input_matrix = np.asarray(self.input_matrix, dtype=float)
        if self.alpha <= 0:
            raise ValueError("decay rate alpha must be positive")
        spec = numkernel.sym_eigen(self.p_matrix)
        if spec.min <= 0:
            raise ValueError("P must be positive definite")
        self.lambda_min = spec.min
        self.lambda_max = spec.max
        n = self.p_matrix.shape[0]
        if self.input_matrix.shape[0] != n or self.gain.shape != (self.input_matrix.shape[1], n):
            raise DimensionMismatchError("gain must be m x n with B of shape n x m")
        bl = self.input_matrix @ self.gain
        self.l_hat = bl.T @ self.p_matrix @ bl
        self.l_hat_norm = float(numkernel.sym_eigen(self.l_hat).eigenvalues[-1]) if self.l_hat.size else 0.0
        self.l_hat_norm = abs(self.l_hat_norm)
        self.p_norm = self.lambda_max
        self.gain_norm = _matrix_norm2(self.gain)
        # sigma_1(eta) = sigma1_gain * eta^2, sigma_2(w) = sigma2_gain * w^2
        self.sigma1_gain = 2.0 * self.l_hat_norm / self.alpha
        self.sigma2_gain = 2.0 * self.p_norm / self.alpha
        self.k1 = math.sqrt(
            self.lambda_max / self.lambda_min
            + 2.0 * self.l_hat_norm / (self.alpha**2 * self.lambda_min)
        )
        self.k2 = math.sqrt(2.0 * self.lambda_max / (self.alpha**2 * self.lambda_min))

    def sigma1(self, eta: float) -> float:
        return self.sigma1_gain * eta * eta

    def sigma2(self, w_norm: float) -> float:
        return self.sigma2_gain * w_norm * w_norm

    def lyapunov(self, x, x_prime) -> float:
        d = np.asarray(x, dtype=float) - np.asarray(x_prime, dtype=float)
        return float(d @ self.p_matrix @ d)

    # persistence: row-major matrices, lossless float round-trip via repr

    def to_dict(self) -> dict:
        return {
            "p": self.p_matrix.tolist(),
            "gain": self.gain.tolist(),
            "alpha": self.alpha,
            "multiplier": self.multiplier.tolist(),
            "input_matrix": self.input_matrix.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Certificate":
        return cls(
            p_matrix=np.array(d["p"], dtype=float),
            gain=np.array(d["gain"], dtype=float),
            alpha=float(d["alpha"]),
            multiplier=np.array(d["multiplier"], dtype=float),
            input_matrix=np.array(d["input_matrix"], dtype=float),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Certificate":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class MultiplierCheck:
    passed: bool
    counterexample: Optional[tuple[np.ndarray, np.ndarray, float, float]] = None

    def __bool__(self) -> bool:
        return self.passed


def check_multiplier(
    p: Callable[[float, np.ndarray], np.ndarray],
    multiplier: np.ndarray,
    sample_domain: Box,
    n_samples: int,
    time_samples: Sequence[float],
    seed: int = 0,
    tol: float = FEASIBILITY_TOL,
) -> MultiplierCheck:
    """Sampled check of the incremental quadratic constraint.

    Draws ``n_samples`` pairs (q1, q2) per time sample and evaluates
    [q2-q1; p(t,q2)-p(t,q1)]^T M [q2-q1; p(t,q2)-p(t,q1)] >= -tol.
    Falsifier semantics: "pass" means no violation was found among the
    samples, not a proof. Returns the first violation otherwise.
    """
    multiplier = np.asarray(multiplier, dtype=float)
    rng = np.random.default_rng(seed)
    for t in time_samples:
        q1 = sample_domain.sample(rng, n_samples)
        q2 = sample_domain.sample(rng, n_samples)
        dq = q2 - q1
        dp = np.asarray(p(float(t), q2)) - np.asarray(p(float(t), q1))
        z = np.hstack([dq, np.atleast_2d(dp.reshape(n_samples, -1))])
        if z.shape[1] != multiplier.shape[0]:
            raise DimensionMismatchError(
                f"multiplier is {multiplier.shape[0]} wide but increments have {z.shape[1]}"
            )
        form = np.einsum("ij,jk,ik->i", z, multiplier, z)
        bad = np.nonzero(form < -tol)[0]
        if bad.size:
            i = int(bad[0])
            return MultiplierCheck(
                passed=False,
                counterexample=(q1[i], q2[i], float(t), float(form[i])),
            )
    return MultiplierCheck(passed=True)


@dataclass(frozen=True)
class InequalityResult:
    """Outcome of the certificate matrix inequality check.

    ``max_eigenvalue`` is the margin on the reduced block after
    eliminating the coupling rows by a (generalized) Schur complement;
    its sign agrees with negative semidefiniteness of the full composite
    matrix, whose own top eigenvalue is kept in
    ``composite_max_eigenvalue``.
    """

    feasible: bool
    max_eigenvalue: float
    composite_max_eigenvalue: float
    composite: np.ndarray

    def __bool__(self) -> bool:
        return self.feasible


def assemble_inequality(sys: IqcSystem, cert: Certificate) -> np.ndarray:
    """Composite symmetric block of the certificate inequality:

        [[P(A+BL) + (A+BL)^T P + 2 alpha P,  P E],
         [E^T P,                             0  ]]
        + [[C_q, D_q], [0, I]]^T M [[C_q, D_q], [0, I]]
    """
    p = cert.p_matrix
    acl = sys.a + sys.b @ cert.gain
    x = p @ acl + acl.T @ p + 2.0 * cert.alpha * p
    y = p @ sys.e
    n, l_e = sys.n, sys.l_e
    composite = np.zeros((n + l_e, n + l_e))
    composite[:n, :n] = x
    composite[:n, n:] = y
    composite[n:, :n] = y.T
    t_blk = np.zeros((sys.c_q.shape[0] + l_e, n + l_e))
    t_blk[: sys.c_q.shape[0], :n] = sys.c_q
    t_blk[: sys.c_q.shape[0], n:] = sys.d_q
    t_blk[sys.c_q.shape[0] :, n:] = np.eye(l_e)
    composite += t_blk.T @ cert.multiplier @ t_blk
    return 0.5 * (composite + composite.T)


def check_matrix_inequality(
    sys: IqcSystem, cert: Certificate, tol: float = FEASIBILITY_TOL
) -> InequalityResult:
    """Feasibility of the certificate matrix inequality.

    The composite [[X, Y], [Y^T, Z]] is negative semidefinite iff
    Z <= 0, Y vanishes on ker Z, and the Schur reduction X - Y Z^+ Y^T
    is negative semidefinite; the reported margin is the top eigenvalue
    of that reduction (for Z = 0 it is simply the top eigenvalue of X).
    """
    n = sys.n
    composite = assemble_inequality(sys, cert)
    comp_spec = numkernel.sym_eigen(composite)
    composite_max = comp_spec.max
    if composite.shape[0] == n:
        margin = composite_max
        return InequalityResult(margin <= tol, margin, composite_max, composite)

    x = composite[:n, :n]
    y = composite[:n, n:]
    z = composite[n:, n:]
    z_spec = numkernel.sym_eigen(z)
    scale = max(1.0, float(np.max(np.abs(composite))))
    if z_spec.max > tol * scale:
        return InequalityResult(False, composite_max, composite_max, composite)
    # pseudo-inverse of Z on its negative eigenspace
    neg = z_spec.eigenvalues < -tol * scale
    basis_neg = z_spec.basis[:, neg]
    basis_null = z_spec.basis[:, ~neg]
    if basis_null.size and _matrix_norm2(y @ basis_null) > math.sqrt(tol) * scale:
        return InequalityResult(False, composite_max, composite_max, composite)
    if basis_neg.size:
        z_pinv = basis_neg @ np.diag(1.0 / z_spec.eigenvalues[neg]) @ basis_neg.T
        schur = x - y @ z_pinv @ y.T
    else:
        schur = x
    margin = numkernel.sym_eigen(schur).max
    return InequalityResult(margin <= tol, margin, composite_max, composite)


@dataclass(frozen=True)
class FalsifierResult:
    passed: bool
    samples: int
    counterexample: Optional[dict] = None

    def __bool__(self) -> bool:
        return self.passed


def falsify_cgps_lyapunov(
    sys: ConcreteSystem,
    abs_sys: AbstractSystem,
    interface: Callable,
    cert: Certificate,
    sample_domain: Box,
    n_samples: int = 10_000,
    t_max: float = 10.0,
    v_box: Optional[Box] = None,
    seed: int = 0,
    tol: float = FALSIFIER_TOL,
    mu: Optional[float] = None,
) -> FalsifierResult:
    """Sampled falsification of the practical-stability Lyapunov decrease.

    With V(x, x') = (x-x')^T P (x-x') (time-invariant), samples
    (t, x, x', v, w) and checks the directional derivative along the
    interfaced concrete field and the nominal abstract field:

        2 (x-x')^T P [f(t, x, u_v(t, v, x, Q(x')), w) - f_d(t, x', v)]
            <= -mu V + sigma_1(eta) + sigma_2(||w||) + tol.

    mu defaults to the certificate decay rate. A "pass" is evidence over
    the sample budget, not a proof. The sampled w extends to a constant
    disturbance signal, so any violation found is a genuine one.
    """
    mu = cert.alpha if mu is None else mu
    q = abs_sys.quantizer
    eta = q.eta
    rng = np.random.default_rng(seed)
    v_domain = v_box if v_box is not None else abs_sys.input_map.box_at(0.0)
    if v_domain is None:
        v_domain = sample_domain
    s1 = cert.sigma1(eta)
    ts = rng.uniform(0.0, t_max, n_samples)
    xs = sample_domain.sample(rng, n_samples)
    xps = sample_domain.sample(rng, n_samples)
    vs = v_domain.sample(rng, n_samples)
    ws = sys.w_set.sample(rng, n_samples)
    p = cert.p_matrix
    for i in range(n_samples):
        t, x, xp, v, w = float(ts[i]), xs[i], xps[i], vs[i], ws[i]
        x2 = q.quantize_coords(xp)
        u = interface(t, v, x, x2)
        delta = x - xp
        grad = 2.0 * (p @ delta)
        lhs = float(grad @ (np.asarray(sys.f(t, x, u, w)) - np.asarray(abs_sys.f_d(t, xp, v))))
        value = float(delta @ p @ delta)
        rhs = -mu * value + s1 + cert.sigma2(float(np.linalg.norm(w)))
        if lhs > rhs + tol:
            return FalsifierResult(
                passed=False,
                samples=i + 1,
                counterexample={
                    "t": t, "x": x, "x_prime": xp, "v": v, "w": w,
                    "lhs": lhs, "rhs": rhs,
                },
            )
    return FalsifierResult(passed=True, samples=n_samples)


@dataclass(frozen=True)
class KLBound:
    """Decaying envelope on the concrete-vs-companion error norm.

    Quadratic comparison functions lambda_min * s^2 and lambda_max * s^2
    turn the generic envelope

        alpha_lb^{-1}(e^{-(mu/2) t} alpha_ub(d0))
            + alpha_lb^{-1}(alpha_ub(alpha_lb^{-1}((2 s1 + 2 s2)/mu)))

    into sqrt(lmax/lmin) * e^{-(mu/4) t} * d0 + offset with
    offset = sqrt(lmax/lmin) * sqrt((2 s1 + 2 s2)/(mu lmin)). The envelope
    against the quantized state adds eta on top.
    """

    lambda_min: float
    lambda_max: float
    decay: float  # mu, the Lyapunov-domain rate
    offset: float
    eta: float

    @classmethod
    def from_certificate(
        cls, cert: Certificate, eta: float, w_sup: float, mu: Optional[float] = None
    ) -> "KLBound":
        mu = cert.alpha if mu is None else mu
        s = 2.0 * cert.sigma1(eta) + 2.0 * cert.sigma2(w_sup)
        offset = math.sqrt(cert.lambda_max / cert.lambda_min) * math.sqrt(
            s / (mu * cert.lambda_min)
        )
        return cls(
            lambda_min=cert.lambda_min,
            lambda_max=cert.lambda_max,
            decay=mu,
            offset=offset,
            eta=eta,
        )

    def envelope(self, delta0: float, t) -> np.ndarray | float:
        """Bound on ||x(t) - companion(t)|| from initial gap ``delta0``."""
        ratio = math.sqrt(self.lambda_max / self.lambda_min)
        return ratio * np.exp(-0.25 * self.decay * np.asarray(t, dtype=float)) * delta0 + self.offset

    def lattice_envelope(self, delta0: float, t) -> np.ndarray | float:
        """Bound against the quantized state: companion envelope plus eta."""
        return self.envelope(delta0, t) + self.eta


def kl_envelope(cert: Certificate, delta0: float, eta: float, w_sup: float, t) -> float:
    """Convenience wrapper building the bound and evaluating it at ``t``."""
    return KLBound.from_certificate(cert, eta, w_sup).envelope(delta0, t)


def _c_norm(c) -> float:
    c = np.asarray(c, dtype=float)
    return float(np.linalg.norm(c, 2)) if c.ndim == 2 else float(abs(c))


def eta_bound(cert: Certificate, c, epsilon: float, w_sup: float) -> float:
    """Largest admissible discretization parameter for precision epsilon:

        (eps/||C|| - 2 sqrt(lmax) w_sup / (alpha sqrt(lmin)))
            * alpha sqrt(lmin) / (alpha sqrt(lmin) + sqrt(alpha^2 lmax + 2 ||L_hat||)).

    Raises DisturbanceTooLargeError when the parenthesized term is not
    positive, i.e. the disturbance level alone exhausts the precision.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    norm_c = _c_norm(c)
    lmin, lmax, alpha = cert.lambda_min, cert.lambda_max, cert.alpha
    paren = epsilon / norm_c - 2.0 * math.sqrt(lmax) * w_sup / (alpha * math.sqrt(lmin))
    if paren <= 0:
        raise DisturbanceTooLargeError(
            f"disturbance level {w_sup} leaves no positive discretization margin"
        )
    # sqrt(alpha^2 lmax + 2 ||L_hat||) = alpha sqrt(lmax + 2 ||L_hat||/alpha^2),
    # written so the alpha factors cancel exactly
    root = math.sqrt(lmax + 2.0 * cert.l_hat_norm / (alpha * alpha))
    factor = math.sqrt(lmin) / (math.sqrt(lmin) + root)
    return paren * factor


def disturbance_bound(cert: Certificate, c, epsilon: float) -> float:
    """Strict sup-norm threshold on admissible disturbances:

        eps_tilde = alpha * eps * sqrt(lmin) / (2 ||C|| sqrt(lmax)).

    Callers compare the disturbance sup norm against this strictly.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    norm_c = _c_norm(c)
    return (
        cert.alpha
        * epsilon
        * math.sqrt(cert.lambda_min)
        / (2.0 * norm_c * math.sqrt(cert.lambda_max))
    )


def eta_satisfies_precision(
    lambda_lb: float,
    lambda_ub: float,
    sigma1_gain: float,
    sigma2_gain: float,
    mu: float,
    rho: float,
    epsilon: float,
    eta: float,
    w_sup: float,
) -> bool:
    """General sufficient condition on eta, quadratic instantiation.

    Evaluates, with alpha_lb(s) = lambda_lb s^2 and alpha_ub(s) =
    lambda_ub s^2,

        alpha_lb^{-1}(alpha_ub(eta)) + eta
            + alpha_lb^{-1}(alpha_ub(alpha_lb^{-1}(4 sigma_1(eta)/mu)))
        < eps/rho
            - alpha_lb^{-1}(alpha_ub(alpha_lb^{-1}(4 sigma_2(w_sup)/mu)))

    and returns the boolean verdict.
    """
    ratio = math.sqrt(lambda_ub / lambda_lb)
    s1 = sigma1_gain * eta * eta
    s2 = sigma2_gain * w_sup * w_sup
    lhs = ratio * eta + eta + ratio * math.sqrt(4.0 * s1 / (mu * lambda_lb))
    rhs = epsilon / rho - ratio * math.sqrt(4.0 * s2 / (mu * lambda_lb))
    return lhs < rhs


@dataclass(frozen=True)
class InputMapSpec:
    """Input set shrunk by the interface-error margin.

    margin = ||L|| ((K1 + 1) eta + K2 w_sup); the admissible abstract
    inputs are those of U at distance at least margin from its boundary.
    For an unbounded U the map stays unbounded.
    """

    base: Optional[Box]
    margin: float
    shrunk: Optional[Box]

    @property
    def unbounded(self) -> bool:
        return self.base is None


def interface_error_margin(cert: Certificate, eta: float, w_sup: float) -> float:
    """Bound on ||u - v|| for the affine interface: ||L||((K1+1) eta + K2 w_sup)."""
    return cert.gain_norm * ((cert.k1 + 1.0) * eta + cert.k2 * w_sup)


def admissible_input_map(
    u_set: Optional[Box],
    gain: Optional[np.ndarray],
    cert: Certificate,
    eta: float,
    w_sup: float,
) -> InputMapSpec:
    """Shrink U by the interface-error margin to get the input map.

    ``gain`` defaults to the certificate gain; passing an explicit matrix
    only changes the norm in the margin. Raises EmptyInputMapError when a
    bounded U is annihilated by the shrink.
    """
    norm_l = cert.gain_norm if gain is None else _matrix_norm2(np.asarray(gain, dtype=float))
    margin = norm_l * ((cert.k1 + 1.0) * eta + cert.k2 * w_sup)
    if u_set is None:
        return InputMapSpec(base=None, margin=margin, shrunk=None)
    shrunk = u_set.try_shrink(margin)
    if shrunk is None:
        raise EmptyInputMapError(
            f"margin {margin:.6g} annihilates the input set {u_set}"
        )
    return InputMapSpec(base=u_set, margin=margin, shrunk=shrunk)
