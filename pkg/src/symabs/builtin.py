"""The two shipped worked examples.

``example1`` is a planar time-varying system with an elementwise
sinusoid nonlinearity, an unbounded input set, and a hand-checked
certificate (P = I, L = -5.4 I, alpha = 3.7, multiplier diag(2I, -I)).

``example2`` is a planar linear system under box input and disturbance
sets; its certificate comes from the Riccati equation
A^T P + P A - P B B^T P + I = 0 with gain L = -B^T P / 2, and the decay
rate is the largest value keeping the certificate inequality feasible,
alpha = 1 / (2 lambda_max(P)) (since P(A+BL) + (A+BL)^T P = -I). The
planning workspace ships a default layout (three obstacles, three
targets in a bounded rectangle); its geometry is a stand-in, not a
reproduction of any particular benchmark map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numkernel
from .certificates import Certificate, KLBound
from .geometry import Box
from .hierarchy import AffineInterface
from .lattice import Quantizer
from .planner import (
    PlanResult,
    Workspace,
    build_grid,
    plan_recurrence,
    waypoints_to_input,
)
from .systems import (
    AbstractSystem,
    ConcreteSystem,
    FeedbackSignal,
    InputMap,
    IqcSystem,
    Signal,
)


@dataclass
class ExampleSetup:
    """Everything needed to run one worked example end to end."""

    name: str
    iqc: IqcSystem
    certificate: Certificate
    quantizer: Quantizer
    concrete: ConcreteSystem
    abstract: AbstractSystem
    interface: AffineInterface
    x0: np.ndarray
    epsilon: float
    eta: float
    t_final: float
    dt: float
    v: Optional[Signal]
    disturbance_hold: float = 0.1
    n_trials: int = 1
    base_seed: int = 0
    workspace: Optional[Workspace] = None
    dwell: float = 1.0
    tracking_gain: float = 1.5

    @property
    def w_sup(self) -> float:
        """Worst-case disturbance sup norm, attained at a box corner."""
        return self.concrete.w_set.corner_sup_norm()

    def kl_bound(self) -> KLBound:
        return KLBound.from_certificate(self.certificate, self.eta, self.w_sup)


def example1() -> ExampleSetup:
    a = np.diag([0.15, 0.05])
    eye = np.eye(2)

    def sinusoid(t: float, q: np.ndarray) -> np.ndarray:
        return np.sin(q) / (t + 1.0)

    multiplier = np.block([[2.0 * eye, np.zeros((2, 2))], [np.zeros((2, 2)), -eye]])
    iqc = IqcSystem(
        a=a,
        b=eye,
        c=eye,
        e=eye,
        c_q=eye,
        d_q=np.zeros((2, 2)),
        p=sinusoid,
        multiplier=multiplier,
    )
    cert = Certificate(
        p_matrix=eye,
        gain=-5.4 * eye,
        alpha=3.7,
        multiplier=multiplier,
        input_matrix=eye,
    )
    quantizer = Quantizer(n=2, eta=0.18)
    w_set = Box.point([0.0, 0.0])  # undisturbed
    input_map = InputMap(box=None)  # U is all of R^2
    concrete = iqc.as_concrete(u_set=None, w_set=w_set)
    abstract = iqc.as_abstract(quantizer, input_map)

    # abstract-level stabilizer toward the origin ball:
    # v = -(A + I) xhat gives closed-loop dxhat = -xhat + sin(xhat)/(t+1)
    gain_v = a + eye

    def stabilizer(t: float, xh: np.ndarray) -> np.ndarray:
        return -(xh @ gain_v.T)

    return ExampleSetup(
        name="example1",
        iqc=iqc,
        certificate=cert,
        quantizer=quantizer,
        concrete=concrete,
        abstract=abstract,
        interface=AffineInterface(gain=cert.gain),
        x0=np.array([2.0, 1.0]),
        epsilon=0.5,
        eta=0.18,
        t_final=10.0,
        dt=1e-3,
        v=FeedbackSignal(stabilizer),
    )


def default_workspace() -> Workspace:
    """Default planning layout: bounded square, three obstacles clustered
    near the center, three targets at the lower corners and the top.

    Sized so that inflating obstacles and shrinking targets by the
    precision 1 leaves every target populated and mutually reachable on
    the eta = 0.15 lattice.
    """
    return Workspace(
        bounds=Box.make([-4.0, -4.0], [4.0, 4.0]),
        obstacles=[
            Box.make([-0.5, -0.3], [0.5, 0.3]),
            Box.make([-1.0, 0.5], [-0.4, 1.1]),
            Box.make([0.5, -1.2], [1.1, -0.6]),
        ],
        targets=[
            Box.make([-3.6, -3.6], [-1.0, -1.0]),
            Box.make([1.0, -3.6], [3.6, -1.0]),
            Box.make([-1.3, 1.2], [1.3, 3.6]),
        ],
        epsilon=1.0,
    )


def example2(n_trials: int = 100, base_seed: int = 0) -> ExampleSetup:
    a = np.array([[0.2, 0.3], [0.5, -0.5]])
    eye = np.eye(2)
    p_are = numkernel.solve_riccati(a, eye, eye)
    gain = -0.5 * eye.T @ p_are  # L = -B^T P / 2 with B = I
    lam_max = numkernel.sym_eigen(p_are).max
    alpha = 1.0 / (2.0 * lam_max)

    # no structured nonlinearity: zero-width channels
    iqc = IqcSystem(
        a=a,
        b=eye,
        c=eye,
        e=np.zeros((2, 0)),
        c_q=np.zeros((0, 2)),
        d_q=np.zeros((0, 0)),
        p=lambda t, q: np.zeros_like(q),
        multiplier=np.zeros((0, 0)),
    )
    cert = Certificate(
        p_matrix=p_are,
        gain=gain,
        alpha=alpha,
        multiplier=np.zeros((0, 0)),
        input_matrix=eye,
    )
    quantizer = Quantizer(n=2, eta=0.15)
    u_set = Box.cube(5.0, 2)
    w_set = Box.cube(0.05, 2)
    input_map = InputMap(box=Box.cube(3.5, 2))
    concrete = iqc.as_concrete(u_set=u_set, w_set=w_set)
    abstract = iqc.as_abstract(quantizer, input_map)

    return ExampleSetup(
        name="example2",
        iqc=iqc,
        certificate=cert,
        quantizer=quantizer,
        concrete=concrete,
        abstract=abstract,
        interface=AffineInterface(gain=gain),
        x0=np.array([-2.4, -2.4]),
        epsilon=1.0,
        eta=0.15,
        t_final=0.0,  # set from the plan horizon by plan_and_refine
        dt=1e-3,
        v=None,  # supplied by the planner
        n_trials=n_trials,
        base_seed=base_seed,
        workspace=default_workspace(),
        dwell=1.0,
        tracking_gain=1.5,
    )


def plan_and_refine(setup: ExampleSetup, n_cycles: int = 1) -> PlanResult:
    """Build the grid, plan the recurrence cycle from the quantized start,
    refine it to an abstract input, and fix the run horizon."""
    if setup.workspace is None:
        raise ValueError(f"{setup.name} has no planning workspace")
    graph = build_grid(setup.workspace, setup.quantizer)
    start = setup.quantizer.quantize(setup.x0)
    plan = plan_recurrence(graph, start=start)
    waypoints_to_input(
        plan,
        setup.abstract,
        setup.abstract.input_map,
        dwell=setup.dwell,
        tracking_gain=setup.tracking_gain,
        drift_matrix=setup.iqc.a,
        dt=setup.dt,
        n_cycles=n_cycles,
    )
    setup.v = plan.abstract_input
    setup.t_final = plan.horizon
    return plan


def get_example(name: str, n_trials: int = 100, base_seed: int = 0) -> ExampleSetup:
    if name == "example1":
        return example1()
    if name == "example2":
        return example2(n_trials=n_trials, base_seed=base_seed)
    raise ValueError(f"unknown builtin example {name!r}")
