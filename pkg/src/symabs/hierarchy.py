"""Control interface, lockstep co-simulation, and closeness checks.

The concrete input is synthesized from the abstract one through an
interface u = u_v(t, v, x1, x2) that reads the *quantized* abstract state.
Admissibility (u staying inside U) is enforced as a hard runtime monitor:
a violation aborts the run instead of clipping, because clipping would
silently void the closeness guarantee.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import numkernel
from .certificates import KLBound
from .errors import (
    AdmissibilityViolationError,
    InputMapViolationError,
    NonFiniteError,
)
from .geometry import Box
from .lattice import LatticePoint, Quantizer
from .systems import (
    AbstractSystem,
    ConcreteSystem,
    PiecewiseConstantSignal,
    Signal,
    write_csv,
)

_MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class AffineInterface:
    """u = v + L (x1 - x2); the certificate-backed interface family."""

    gain: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gain", np.asarray(self.gain, dtype=float))
        object.__setattr__(self, "_gain_t", self.gain.T.copy())

    def __call__(self, t: float, v, x1, x2) -> np.ndarray:
        return np.asarray(v) + (np.asarray(x1) - np.asarray(x2)) @ self._gain_t


def pair_initial(quantizer: Quantizer, x0) -> LatticePoint:
    """Initial abstract state paired to a concrete one: its quantization.

    The pair is then within eta of each other by the quantizer bound.
    """
    return quantizer.quantize(x0)


@dataclass
class PairedRun:
    """Lockstep record of a concrete/abstract co-simulation."""

    times: np.ndarray
    x1: np.ndarray
    xhat2: np.ndarray
    x2: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    err: np.ndarray
    u: np.ndarray
    v: np.ndarray
    eta: float
    admissible: bool = True

    @property
    def max_err(self) -> float:
        return float(np.max(self.err))

    def companion_gap(self) -> np.ndarray:
        """Per-sample ||x1 - xhat2||, the quantity the envelope bounds."""
        return np.linalg.norm(self.x1 - self.xhat2, axis=1)

    def interface_error(self) -> np.ndarray:
        """Per-sample ||u - v||."""
        return np.linalg.norm(self.u - self.v, axis=1)

    def write_csv(self, path) -> None:
        """Columns: t, x1_*, xhat2_*, x2_*, y1_*, y2_*, err, u_*, v_*."""
        n = self.x1.shape[1]
        l = self.y1.shape[1]
        m = self.u.shape[1]
        header = (
            ["t"]
            + [f"x1_{i+1}" for i in range(n)]
            + [f"xhat2_{i+1}" for i in range(n)]
            + [f"x2_{i+1}" for i in range(n)]
            + [f"y1_{i+1}" for i in range(l)]
            + [f"y2_{i+1}" for i in range(l)]
            + ["err"]
            + [f"u_{i+1}" for i in range(m)]
            + [f"v_{i+1}" for i in range(m)]
        )
        rows = np.hstack(
            [
                self.times[:, None],
                self.x1,
                self.xhat2,
                self.x2,
                self.y1,
                self.y2,
                self.err[:, None],
                self.u,
                self.v,
            ]
        )
        write_csv(path, header, rows)

    def summary(self, eps: float, trials: int = 1, seed: Optional[int] = None) -> dict:
        return {
            "max_err": self.max_err,
            "eps": eps,
            "eta": self.eta,
            "admissible": self.admissible,
            "trials": trials,
            "seed": seed,
        }


def write_summary(path, summary: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cosimulate(
    sys: ConcreteSystem,
    abs_sys: AbstractSystem,
    interface: Callable,
    x0,
    v: Signal,
    w: Signal,
    t_span: Sequence[float],
    dt: float,
) -> PairedRun:
    """Integrate the augmented pair (x1, xhat2) in lockstep.

    The abstract system starts at the quantization of x0. The interface
    reads the quantized abstract state at every evaluation. Raises
    AdmissibilityViolationError if a recorded u sample leaves U, and
    InputMapViolationError if a recorded v sample leaves the input map.
    """
    x0 = np.asarray(x0, dtype=float)
    q = abs_sys.quantizer
    start = pair_initial(q, x0)

    def field(t: float, z: np.ndarray) -> np.ndarray:
        x1, xh = z[0], z[1]
        x2 = q.quantize_coords(xh)
        vt = v(t, xh)
        ut = interface(t, vt, x1, x2)
        dx1 = sys.f(t, x1, ut, w(t))
        dxh = abs_sys.f_d(t, xh, vt)
        return np.stack([np.asarray(dx1, dtype=float), np.asarray(dxh, dtype=float)])

    z0 = np.stack([x0, start.coords])
    times, states = numkernel.integrate_rk4(field, z0, t_span, dt)
    x1s = states[:, 0, :]
    xhs = states[:, 1, :]
    x2s = q.quantize_coords(xhs)

    vs = np.array([v(float(t), xh) for t, xh in zip(times, xhs)], dtype=float)
    us = np.array(
        [interface(float(t), vt, x1, x2) for t, vt, x1, x2 in zip(times, vs, x1s, x2s)],
        dtype=float,
    )

    for i, t in enumerate(times):
        if not abs_sys.input_map.contains(float(t), vs[i]):
            raise InputMapViolationError(float(t), vs[i])
        if sys.u_set is not None and not sys.u_set.contains(us[i], tol=_MEMBERSHIP_TOL):
            raise AdmissibilityViolationError(float(t), us[i])

    y1 = np.array([sys.output(x) for x in x1s])
    y2 = np.array([abs_sys.output(x) for x in x2s])
    err = np.linalg.norm(y1 - y2, axis=1)
    return PairedRun(
        times=times,
        x1=x1s,
        xhat2=xhs,
        x2=x2s,
        y1=y1,
        y2=y2,
        err=err,
        u=us,
        v=vs,
        eta=q.eta,
    )


@dataclass(frozen=True)
class ClosenessResult:
    passed: bool
    t: Optional[float] = None
    err: Optional[float] = None

    def __bool__(self) -> bool:
        return self.passed


def check_closeness(run: PairedRun, epsilon: float) -> ClosenessResult:
    """Pass iff the output error stays within epsilon; reports the
    earliest offending sample otherwise."""
    bad = np.nonzero(run.err > epsilon)[0]
    if bad.size:
        i = int(bad[0])
        return ClosenessResult(False, t=float(run.times[i]), err=float(run.err[i]))
    return ClosenessResult(True)


@dataclass(frozen=True)
class TrialBudget:
    n_x0: int = 10
    n_v: int = 5
    n_w: int = 20


@dataclass(frozen=True)
class RobustSimResult:
    passed: bool
    trials: int
    hypothesis_held: bool  # all sampled disturbances below the stated threshold
    counterexample: Optional[dict] = None

    def __bool__(self) -> bool:
        return self.passed


def check_robust_simulation(
    sys: ConcreteSystem,
    abs_sys: AbstractSystem,
    interface: Callable,
    epsilon: float,
    eps_tilde: float,
    budget: TrialBudget,
    x0_box: Box,
    t_span: Sequence[float],
    dt: float,
    v_hold: float = 1.0,
    v_box: Optional[Box] = None,
    seed: int = 0,
) -> RobustSimResult:
    """Sampled check of the robust simulation relation.

    For every sampled (x0, v, w): pair the initial states, co-simulate,
    and require epsilon-closeness of the outputs. Reports the first
    failure. Evidence over the budget, not a proof; the result records
    whether every sampled disturbance kept its sup norm strictly below
    eps_tilde, since a pass is only meaningful under that hypothesis.
    """
    from .systems import sample_disturbance, sup_norm

    rng = np.random.default_rng(seed)
    x0s = x0_box.sample(rng, budget.n_x0)
    v_domain = v_box if v_box is not None else abs_sys.input_map.box_at(0.0)
    if v_domain is None:
        raise ValueError("an explicit v_box is required for an unbounded input map")
    t0, t1 = float(t_span[0]), float(t_span[1])
    n_seg = max(1, int(math.ceil((t1 - t0) / v_hold - 1e-12)))
    seg_times = t0 + v_hold * np.arange(n_seg)

    v_signals = [
        PiecewiseConstantSignal(seg_times, v_domain.sample(rng, n_seg))
        for _ in range(budget.n_v)
    ]
    w_seeds = [int(s) for s in rng.integers(0, 2**31 - 1, size=budget.n_w)]

    hypothesis_held = True
    trials = 0
    for i_x0, x0 in enumerate(x0s):
        for i_v, v_sig in enumerate(v_signals):
            for i_w, w_seed in enumerate(w_seeds):
                w_sig = sample_disturbance(sys.w_set, w_seed, 0.1, t_span)
                if sup_norm(w_sig, t_span) >= eps_tilde:
                    hypothesis_held = False
                trials += 1
                run = cosimulate(sys, abs_sys, interface, x0, v_sig, w_sig, t_span, dt)
                res = check_closeness(run, epsilon)
                if not res:
                    return RobustSimResult(
                        passed=False,
                        trials=trials,
                        hypothesis_held=hypothesis_held,
                        counterexample={
                            "x0": x0,
                            "v_index": i_v,
                            "w_seed": w_seed,
                            "t": res.t,
                            "err": res.err,
                        },
                    )
    return RobustSimResult(passed=True, trials=trials, hypothesis_held=hypothesis_held)


@dataclass
class TrialStats:
    """Per-realization aggregates of a disturbance study."""

    seed: int
    max_err: float
    max_u_inf: float
    max_interface_err: float
    w_sup: float
    admissible: bool
    envelope_excess: float  # max over samples of ||x1-xhat2|| - envelope(t)


@dataclass
class DisturbanceStudy:
    """Aggregate outcome of N seeded disturbance realizations."""

    trials: list[TrialStats]
    eta: float
    epsilon: float
    base_seed: int

    @property
    def n(self) -> int:
        return len(self.trials)

    @property
    def all_close(self) -> bool:
        return all(t.max_err <= self.epsilon for t in self.trials)

    @property
    def all_admissible(self) -> bool:
        return all(t.admissible for t in self.trials)

    @property
    def global_max_err(self) -> float:
        return max((t.max_err for t in self.trials), default=0.0)

    def passed(self) -> bool:
        return self.all_close and self.all_admissible

    def write_csv(self, path) -> None:
        header = [
            "trial",
            "seed",
            "max_err",
            "max_u_inf",
            "max_interface_err",
            "w_sup",
            "admissible",
            "envelope_excess",
        ]
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for i, t in enumerate(self.trials):
                fh.write(
                    ",".join(
                        [
                            str(i),
                            str(t.seed),
                            repr(t.max_err),
                            repr(t.max_u_inf),
                            repr(t.max_interface_err),
                            repr(t.w_sup),
                            str(int(t.admissible)),
                            repr(t.envelope_excess),
                        ]
                    )
                    + "\n"
                )

    def summary(self) -> dict:
        return {
            "max_err": self.global_max_err,
            "eps": self.epsilon,
            "eta": self.eta,
            "admissible": self.all_admissible,
            "trials": self.n,
            "seed": self.base_seed,
        }


def run_disturbance_study(
    sys: ConcreteSystem,
    abs_sys: AbstractSystem,
    interface: Callable,
    x0,
    v: Signal,
    t_span: Sequence[float],
    dt: float,
    epsilon: float,
    n_trials: int,
    base_seed: int,
    w_hold: float = 0.1,
    kl_bound: Optional[KLBound] = None,
) -> DisturbanceStudy:
    """Batched co-simulation over seeded disturbance realizations.

    Realization i uses seed base_seed + i. The abstract companion is
    disturbance-free, hence shared across realizations, so the concrete
    batch integrates as one (N, n) state in lockstep with it; per-trial
    statistics are reduced on the fly in trial order. Admissibility is
    recorded per trial rather than raised, so one saturating realization
    does not mask the others.
    """
    from .systems import sample_disturbance

    x0 = np.asarray(x0, dtype=float)
    q = abs_sys.quantizer
    n = x0.shape[0]
    t0, t1 = float(t_span[0]), float(t_span[1])
    times = numkernel.time_grid(t_span, dt)

    if n_trials == 0:
        return DisturbanceStudy(trials=[], eta=q.eta, epsilon=epsilon, base_seed=base_seed)

    seeds = [base_seed + i for i in range(n_trials)]
    w_signals = [sample_disturbance(sys.w_set, s, w_hold, t_span) for s in seeds]
    # shared segment grid ensures one vectorized lookup per stage
    seg_times = w_signals[0].times
    w_values = np.stack([sig.values for sig in w_signals], axis=1)  # (seg, N, n_w)
    w_sups = np.linalg.norm(w_values, axis=2).max(axis=0)

    def w_at(t: float) -> np.ndarray:
        i = int(np.searchsorted(seg_times, t, side="right")) - 1
        return w_values[min(max(i, 0), len(seg_times) - 1)]

    start = pair_initial(q, x0)
    x1 = np.tile(x0, (n_trials, 1))
    xh = start.coords.copy()
    delta0 = float(np.linalg.norm(x0 - start.coords))

    env = kl_bound.envelope(delta0, times) if kl_bound is not None else None

    max_err = np.zeros(n_trials)
    max_u_inf = np.zeros(n_trials)
    max_iface = np.zeros(n_trials)
    admissible = np.ones(n_trials, dtype=bool)
    env_excess = np.full(n_trials, -np.inf)

    # output maps of the structured systems act row-wise on batches;
    # fall back to a per-row loop otherwise
    try:
        batch_ok = np.asarray(sys.output(np.zeros((2, n)))).ndim == 2
    except Exception:
        batch_ok = False

    def batch_y1(x1s: np.ndarray) -> np.ndarray:
        if batch_ok:
            return np.asarray(sys.output(x1s), dtype=float)
        return np.array([sys.output(row) for row in x1s])

    def eval_at(t: float, x1s: np.ndarray, xhs: np.ndarray):
        """Interface and both fields at one time; shared by the first RK4
        stage and the per-sample recording."""
        x2 = q.quantize_coords(xhs)
        vt = np.asarray(v(t, xhs), dtype=float)
        ut = np.asarray(interface(t, vt, x1s, x2), dtype=float)
        dx1 = np.asarray(sys.f(t, x1s, ut, w_at(t)), dtype=float)
        dxh = np.asarray(abs_sys.f_d(t, xhs, vt), dtype=float)
        return x2, vt, ut, dx1, dxh

    def stage(t: float, x1s: np.ndarray, xhs: np.ndarray):
        _, _, _, dx1, dxh = eval_at(t, x1s, xhs)
        return dx1, dxh

    def record(i_t: int, x1s, xhs, x2, vt, ut):
        err = np.linalg.norm(batch_y1(x1s) - abs_sys.output(x2), axis=1)
        np.maximum(max_err, err, out=max_err)
        np.maximum(max_u_inf, np.max(np.abs(ut), axis=1), out=max_u_inf)
        np.maximum(max_iface, np.linalg.norm(ut - vt, axis=1), out=max_iface)
        if sys.u_set is not None:
            ok = sys.u_set.contains_many(ut, tol=_MEMBERSHIP_TOL)
            np.logical_and(admissible, ok, out=admissible)
        if env is not None:
            gap = np.linalg.norm(x1s - xhs, axis=1)
            np.maximum(env_excess, gap - env[i_t], out=env_excess)

    x2_0, vt_0, ut_0, k1a, k1b = eval_at(float(times[0]), x1, xh)
    record(0, x1, xh, x2_0, vt_0, ut_0)
    for i in range(len(times) - 1):
        t = float(times[i])
        h = float(times[i + 1] - times[i])
        k2a, k2b = stage(t + 0.5 * h, x1 + 0.5 * h * k1a, xh + 0.5 * h * k1b)
        k3a, k3b = stage(t + 0.5 * h, x1 + 0.5 * h * k2a, xh + 0.5 * h * k2b)
        k4a, k4b = stage(t + h, x1 + h * k3a, xh + h * k3b)
        x1 = x1 + (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        xh = xh + (h / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(xh))):
            raise NonFiniteError(f"batch state left the finite range at t={times[i + 1]}")
        x2_i, vt_i, ut_i, k1a, k1b = eval_at(float(times[i + 1]), x1, xh)
        record(i + 1, x1, xh, x2_i, vt_i, ut_i)

    trials = [
        TrialStats(
            seed=seeds[i],
            max_err=float(max_err[i]),
            max_u_inf=float(max_u_inf[i]),
            max_interface_err=float(max_iface[i]),
            w_sup=float(w_sups[i]),
            admissible=bool(admissible[i]),
            envelope_excess=float(env_excess[i]) if kl_bound is not None else float("-inf"),
        )
        for i in range(n_trials)
    ]
    return DisturbanceStudy(trials=trials, eta=q.eta, epsilon=epsilon, base_seed=base_seed)
