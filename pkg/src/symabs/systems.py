"""System models, signals, and trajectory machinery.

The concrete plant is a continuous-time uncertain system
``dx/dt = f(t, x, u, w), y = h(x)`` with input set U and disturbance set W.
Its abstraction integrates the nominal (w = 0) dynamics continuously and
reads out the quantized state, so the abstract state lives on the lattice
while the internal companion state stays continuous.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import numkernel
from .errors import (
    DimensionMismatchError,
    InputMapViolationError,
    InputViolationError,
)
from .geometry import Box
from .lattice import LatticePoint, Quantizer

_MEMBERSHIP_TOL = 1e-9


class Signal:
    """Time-indexed input or disturbance.

    Two kinds: piecewise-constant (open loop) and feedback (closed loop,
    evaluated on the current state at every integration stage). Values are
    fetched with ``sig(t)`` or ``sig(t, state)``.
    """

    kind: str

    def __call__(self, t: float, state: Optional[np.ndarray] = None) -> np.ndarray:
        raise NotImplementedError


class PiecewiseConstantSignal(Signal):
    """Right-continuous piecewise-constant signal on [t0, t_end)."""

    kind = "piecewise-constant"

    def __init__(self, times: Sequence[float], values: np.ndarray):
        self.times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        self.values = values.reshape(-1, 1) if values.ndim == 1 else values
        if self.times.ndim != 1 or len(self.times) != len(self.values):
            raise ValueError("times and values must align")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("segment start times must be strictly increasing")

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def segment_index(self, t: float) -> int:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(i, 0), len(self.times) - 1)

    def __call__(self, t: float, state: Optional[np.ndarray] = None) -> np.ndarray:
        return self.values[self.segment_index(t)]


class ConstantSignal(PiecewiseConstantSignal):
    kind = "constant"

    def __init__(self, value):
        super().__init__([0.0], np.atleast_2d(np.asarray(value, dtype=float)))


class FeedbackSignal(Signal):
    """Closed-loop signal ``v = law(t, state)``."""

    kind = "closed-loop-callback"

    def __init__(self, law: Callable[[float, np.ndarray], np.ndarray]):
        self.law = law

    def __call__(self, t: float, state: Optional[np.ndarray] = None) -> np.ndarray:
        if state is None:
            raise ValueError("feedback signal needs the current state")
        return np.asarray(self.law(t, state), dtype=float)


def zero_signal(dim: int) -> ConstantSignal:
    return ConstantSignal(np.zeros(dim))


def sup_norm(sig: Signal, t_span: Sequence[float]) -> float:
    """Supremum of the Euclidean norm over the span.

    For piecewise-constant signals this is the max over the segment values
    active inside the span; feedback signals have no state-free value.
    """
    if not isinstance(sig, PiecewiseConstantSignal):
        raise ValueError("sup_norm is defined for open-loop signals only")
    t0, t1 = float(t_span[0]), float(t_span[1])
    i0 = sig.segment_index(t0)
    i1 = sig.segment_index(max(t0, t1 - 1e-15)) if t1 > t0 else i0
    vals = sig.values[i0 : i1 + 1]
    return float(np.max(np.linalg.norm(vals, axis=1)))


def sample_disturbance(
    w_box: Box, seed: int, step: float, t_span: Sequence[float]
) -> PiecewiseConstantSignal:
    """Piecewise-constant disturbance, each hold uniform over the box.

    Reproducible from the seed; a degenerate box yields the constant
    signal at its single point.
    """
    if step <= 0:
        raise ValueError("hold duration must be positive")
    t0, t1 = float(t_span[0]), float(t_span[1])
    n_seg = max(1, int(np.ceil((t1 - t0) / step - 1e-12)))
    times = t0 + step * np.arange(n_seg)
    rng = np.random.default_rng(seed)
    values = rng.uniform(w_box.lo_arr, w_box.hi_arr, size=(n_seg, w_box.dim))
    return PiecewiseConstantSignal(times, values)


@dataclass(frozen=True)
class InputMap:
    """Admissible abstract-input constraint U'(t); ``box=None`` means all of R^m."""

    box: Optional[Box]

    def box_at(self, t: float) -> Optional[Box]:
        return self.box

    def contains(self, t: float, v, tol: float = _MEMBERSHIP_TOL) -> bool:
        b = self.box_at(t)
        return True if b is None else b.contains(v, tol=tol)

    @property
    def unbounded(self) -> bool:
        return self.box is None


@dataclass
class Trajectory:
    """Sampled state/output path on a strictly increasing time grid."""

    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        if not (len(self.times) == len(self.states) == len(self.outputs)):
            raise ValueError("times, states, outputs must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def write_csv(self, path) -> None:
        """Columns: t, x_1..x_n, y_1..y_l."""
        n = self.states.shape[1]
        l = self.outputs.shape[1]
        header = ["t"] + [f"x_{i+1}" for i in range(n)] + [f"y_{i+1}" for i in range(l)]
        rows = np.hstack([self.times[:, None], self.states, self.outputs])
        write_csv(path, header, rows)


def write_csv(path, header: list[str], rows: np.ndarray) -> None:
    """Deterministic CSV: fixed column order, shortest round-trip floats."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


@dataclass
class ConcreteSystem:
    """The plant to control: dx/dt = f(t, x, u, w), y = h(x)."""

    f: Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray]
    n: int
    m: int
    l: int
    n_w: int
    u_set: Optional[Box]  # None means unconstrained input
    w_set: Box

    def output(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.h(x), dtype=float)


@dataclass
class AbstractSystem:
    """Quantized, undisturbed copy of the plant over the lattice.

    The internal state integrates the nominal dynamics f_d continuously;
    the observable state is its quantization, sample by sample.
    """

    f_d: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    quantizer: Quantizer
    h: Callable[[np.ndarray], np.ndarray]
    input_map: InputMap

    def output(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.h(x), dtype=float)


@dataclass
class IqcSystem:
    """Linear core with a structured nonlinearity:

        dx/dt = A x + B u + E p(t, C_q x + D_q p) + w,   y = C x,

    where p carries an incremental multiplier matrix M certifying
    [dq; dp]^T M [dq; dp] >= 0 for all increments. Simulation requires
    D_q = 0 (no algebraic loop); D_q may still appear in the certificate
    algebra.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    e: np.ndarray
    c_q: np.ndarray
    d_q: np.ndarray
    p: Callable[[float, np.ndarray], np.ndarray]
    multiplier: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.e = np.asarray(self.e, dtype=float)
        self.c_q = np.asarray(self.c_q, dtype=float)
        self.d_q = np.asarray(self.d_q, dtype=float)
        self.multiplier = np.asarray(self.multiplier, dtype=float)
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise DimensionMismatchError("A must be square")
        if self.b.shape[0] != n or self.c.shape[1] != n:
            raise DimensionMismatchError("B/C rows must match the state dimension")
        l_e = self.e.shape[1] if self.e.size else self.e.shape[1]
        l_p = self.c_q.shape[0]
        if self.e.shape[0] != n:
            raise DimensionMismatchError("E must have n rows")
        if self.c_q.shape != (l_p, n):
            raise DimensionMismatchError("C_q must be l_p x n")
        if self.d_q.shape != (l_p, l_e):
            raise DimensionMismatchError("D_q must be l_p x l_e")
        if self.multiplier.shape != (l_p + l_e, l_p + l_e):
            raise DimensionMismatchError("multiplier must be (l_p+l_e) square")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def l(self) -> int:
        return self.c.shape[0]

    @property
    def l_e(self) -> int:
        return self.e.shape[1]

    @property
    def has_algebraic_loop(self) -> bool:
        return bool(self.d_q.size) and float(np.max(np.abs(self.d_q))) > 0.0

    def nonlinearity_input(self, x: np.ndarray) -> np.ndarray:
        return x @ self.c_q.T

    def vector_field(self, t: float, x, u, w) -> np.ndarray:
        """Batch-friendly: x, u, w may be (n,) / (m,) or (N, n) / (N, m)."""
        if self.has_algebraic_loop:
            raise DimensionMismatchError(
                "simulation requires D_q = 0 (algebraic loop unsupported)"
            )
        x = np.asarray(x, dtype=float)
        lin = x @ self.a.T + np.asarray(u) @ self.b.T + w
        if self.l_e == 0:
            return lin
        px = self.p(t, x @ self.c_q.T)
        return lin + np.asarray(px) @ self.e.T

    def nominal_field(self, t: float, x, v) -> np.ndarray:
        return self.vector_field(t, x, v, 0.0)

    def as_concrete(self, u_set: Optional[Box], w_set: Box) -> ConcreteSystem:
        return ConcreteSystem(
            f=self.vector_field,
            h=lambda x: np.asarray(x) @ self.c.T,
            n=self.n,
            m=self.m,
            l=self.l,
            n_w=self.n,
            u_set=u_set,
            w_set=w_set,
        )

    def as_abstract(self, quantizer: Quantizer, input_map: InputMap) -> AbstractSystem:
        return AbstractSystem(
            f_d=self.nominal_field,
            quantizer=quantizer,
            h=lambda x: np.asarray(x) @ self.c.T,
            input_map=input_map,
        )


def simulate_concrete(
    sys: ConcreteSystem,
    x0,
    u: Signal,
    w: Signal,
    t_span: Sequence[float],
    dt: float,
) -> Trajectory:
    """RK4 solution of the plant under the given input and disturbance.

    Sampled inputs are checked against U at every grid point; a violation
    aborts with InputViolationError.
    """

    def field(t: float, x: np.ndarray) -> np.ndarray:
        return np.asarray(sys.f(t, x, u(t, x), w(t)), dtype=float)

    times, states = numkernel.integrate_rk4(field, x0, t_span, dt)
    if sys.u_set is not None:
        for t, x in zip(times, states):
            ut = u(float(t), x)
            if not sys.u_set.contains(ut, tol=_MEMBERSHIP_TOL):
                raise InputViolationError(float(t), np.asarray(ut))
    outputs = np.array([sys.output(x) for x in states])
    return Trajectory(times=times, states=states, outputs=outputs)


def simulate_abstract(
    sys: AbstractSystem,
    x0_lattice: LatticePoint,
    v: Signal,
    t_span: Sequence[float],
    dt: float,
) -> tuple[Trajectory, Trajectory]:
    """Integrate the nominal dynamics from a lattice point and quantize.

    Returns (continuous companion trajectory, quantized lattice trajectory).
    The quantized samples never deviate from the companion by more than
    eta; that bound is asserted on every run.
    """
    q = sys.quantizer

    def field(t: float, x: np.ndarray) -> np.ndarray:
        return np.asarray(sys.f_d(t, x, v(t, x)), dtype=float)

    times, states = numkernel.integrate_rk4(field, x0_lattice.coords, t_span, dt)
    lat_states = q.quantize_coords(states)
    gap = np.linalg.norm(states - lat_states, axis=1)
    assert float(np.max(gap)) <= q.eta + 1e-12, "quantizer bound violated"

    for t, x in zip(times, states):
        vt = v(float(t), x)
        if not sys.input_map.contains(float(t), vt):
            raise InputMapViolationError(float(t), np.asarray(vt))

    cont = Trajectory(
        times=times,
        states=states,
        outputs=np.array([sys.output(x) for x in states]),
    )
    lat = Trajectory(
        times=times,
        states=lat_states,
        outputs=np.array([sys.output(x) for x in lat_states]),
    )
    return cont, lat
