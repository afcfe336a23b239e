"""Lattice-level recurrence planning with robustness margins.

Obstacles are inflated and targets shrunk by the closeness precision, so
a plan that is safe and reaches targets at the abstract level stays safe
and reaches the original targets for every concrete trajectory within
that precision. Synthesis is a fixed recurrence pattern (visit every
target infinitely often) built from shortest paths on the lattice graph,
then refined to an abstract input by per-waypoint tracking feedback.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import numkernel
from .errors import (
    DisconnectedError,
    EmptyTargetError,
    InputMapViolationError,
    TrackingFailureError,
)
from .geometry import Box
from .lattice import LatticePoint, Quantizer
from .systems import AbstractSystem, FeedbackSignal, InputMap

_TIE_TOL = 1e-12


@dataclass
class Workspace:
    """Planning geometry: bounds, obstacles, targets, and the precision margin."""

    bounds: Box
    obstacles: list[Box]
    targets: list[Box]
    epsilon: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        for o in self.obstacles:
            if not self.bounds.contains_box(o.inflate(self.epsilon)):
                raise ValueError(f"inflated obstacle {o} leaves the workspace bounds")
        for s in self.targets:
            shrunk = s.try_shrink(self.epsilon)
            if shrunk is None:
                raise ValueError(f"target {s} vanishes when shrunk by {self.epsilon}")
            if not self.bounds.contains_box(shrunk):
                raise ValueError(f"shrunk target of {s} leaves the workspace bounds")

    @property
    def inflated_obstacles(self) -> list[Box]:
        return [o.inflate(self.epsilon) for o in self.obstacles]

    @property
    def shrunk_targets(self) -> list[Box]:
        return [s.try_shrink(self.epsilon) for s in self.targets]

    def to_dict(self) -> dict:
        return {
            "bounds": {"lo": list(self.bounds.lo), "hi": list(self.bounds.hi)},
            "obstacles": [{"lo": list(o.lo), "hi": list(o.hi)} for o in self.obstacles],
            "targets": [{"lo": list(s.lo), "hi": list(s.hi)} for s in self.targets],
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Workspace":
        box = lambda b: Box.make(b["lo"], b["hi"])
        return cls(
            bounds=box(d["bounds"]),
            obstacles=[box(o) for o in d["obstacles"]],
            targets=[box(s) for s in d["targets"]],
            epsilon=float(d["epsilon"]),
        )


@dataclass
class GridGraph:
    """Valid lattice vertices with implicit axis-neighbor edges."""

    quantizer: Quantizer
    workspace: Workspace
    vertices: frozenset
    target_vertices: tuple

    def neighbors(self, k: tuple) -> list[tuple]:
        return [kk for kk in self.quantizer.neighbor_indices(k) if kk in self.vertices]

    def __contains__(self, k: tuple) -> bool:
        return k in self.vertices


def build_grid(ws: Workspace, quantizer: Quantizer) -> GridGraph:
    """Vertices are lattice points whose cells lie inside the bounds shrunk
    by epsilon and touch no obstacle inflated by epsilon.

    Raises EmptyTargetError if a shrunk target holds no vertex and
    DisconnectedError if the targets do not all lie in one component.
    """
    eps = ws.epsilon
    usable = ws.bounds.try_shrink(eps)
    if usable is None:
        raise EmptyTargetError("the workspace vanishes when shrunk by epsilon")
    s = quantizer.spacing
    h = quantizer.cell_half_width
    lo = usable.lo_arr + h
    hi = usable.hi_arr - h
    if np.any(lo > hi):
        raise EmptyTargetError("no lattice cell fits inside the shrunk workspace")
    k_lo = np.ceil(lo / s - _TIE_TOL).astype(int)
    k_hi = np.floor(hi / s + _TIE_TOL).astype(int)
    inflated = ws.inflated_obstacles

    verts = []
    for k in itertools.product(*(range(a, b + 1) for a, b in zip(k_lo, k_hi))):
        cell = quantizer.cell_of(quantizer.point_from_indices(k))
        if any(cell.intersects(o) for o in inflated):
            continue
        verts.append(k)
    vertices = frozenset(verts)

    target_sets = []
    for tgt, shrunk in zip(ws.targets, ws.shrunk_targets):
        hits = frozenset(
            k for k in vertices
            if shrunk.contains(quantizer.coords_of_indices(k), tol=1e-9)
        )
        if not hits:
            raise EmptyTargetError(f"target {tgt} shrunk by {eps} contains no grid vertex")
        target_sets.append(hits)

    graph = GridGraph(
        quantizer=quantizer,
        workspace=ws,
        vertices=vertices,
        target_vertices=tuple(target_sets),
    )
    reached = _bfs_distances(graph, sorted(target_sets[0]))[0]
    for i, hits in enumerate(target_sets[1:], start=1):
        if not any(k in reached for k in hits):
            raise DisconnectedError(f"target {i} is unreachable from target 0")
    return graph


def _bfs_distances(graph: GridGraph, sources) -> tuple[dict, dict]:
    """Layered BFS with lexicographic processing order, so shortest paths
    and their tie-breaks are platform-independent."""
    dist = {}
    parent = {}
    layer = sorted(set(sources))
    for s_ in layer:
        dist[s_] = 0
        parent[s_] = None
    while layer:
        nxt = []
        for u in layer:
            for w in graph.quantizer.neighbor_indices(u):
                if w in graph.vertices and w not in dist:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    nxt.append(w)
        layer = sorted(set(nxt))
    return dist, parent


def _shortest_path(graph: GridGraph, source, target_set) -> list:
    """Shortest path from one vertex to the lexicographically-preferred
    nearest vertex of a set."""
    dist, parent = _bfs_distances(graph, [source])
    best = None
    for k in sorted(target_set):
        if k in dist and (best is None or dist[k] < dist[best]):
            best = k
    if best is None:
        raise DisconnectedError(f"no path from {source} to the target set")
    path = [best]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


@dataclass
class PlanResult:
    """Waypoint prefix plus a recurrent cycle, with the refined input.

    The cycle is implicitly closed: its last waypoint neighbors its
    first. ``abstract_input`` and ``dwell`` are attached by
    waypoints_to_input.
    """

    prefix: list[LatticePoint]
    cycle: list[LatticePoint]
    dwell: Optional[float] = None
    abstract_input: Optional[FeedbackSignal] = None
    horizon: Optional[float] = None

    @property
    def reference_waypoints(self) -> list[LatticePoint]:
        """Per-segment tracking references: prefix tail, then the cycle
        rotated to end on its anchor."""
        refs = list(self.prefix[1:])
        m = len(self.cycle)
        refs += [self.cycle[(j + 1) % m] for j in range(m)]
        return refs

    def reference_at_segment(self, seg: int) -> LatticePoint:
        n_pre = len(self.prefix) - 1
        if seg < n_pre:
            return self.prefix[seg + 1]
        m = len(self.cycle)
        return self.cycle[((seg - n_pre) % m + 1) % m]

    def write_waypoints_csv(self, path) -> None:
        n = len(self.prefix[0].indices) if self.prefix else len(self.cycle[0].indices)
        header = (
            ["phase", "step"]
            + [f"k_{i+1}" for i in range(n)]
            + [f"x_{i+1}" for i in range(n)]
        )
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for phase, pts in (("prefix", self.prefix), ("cycle", self.cycle)):
                for i, p in enumerate(pts):
                    row = [phase, str(i)]
                    row += [str(k) for k in p.indices]
                    row += [repr(c) for c in p.coordinates]
                    fh.write(",".join(row) + "\n")

    def write_schedule_csv(self, path, n_cycles: int = 1) -> None:
        """Piecewise input schedule: one row per dwell segment."""
        if self.dwell is None:
            raise ValueError("attach an input with waypoints_to_input first")
        n_pre = len(self.prefix) - 1
        n_seg = n_pre + n_cycles * len(self.cycle)
        n = len(self.cycle[0].indices)
        header = (
            ["segment", "t_start", "t_end"]
            + [f"k_{i+1}" for i in range(n)]
            + [f"x_{i+1}" for i in range(n)]
        )
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for seg in range(n_seg):
                ref = self.reference_at_segment(seg)
                row = [str(seg), repr(seg * self.dwell), repr((seg + 1) * self.dwell)]
                row += [str(k) for k in ref.indices]
                row += [repr(c) for c in ref.coordinates]
                fh.write(",".join(row) + "\n")


def plan_recurrence(
    graph: GridGraph,
    targets: Optional[Sequence] = None,
    start: Optional[LatticePoint] = None,
) -> PlanResult:
    """Prefix to the first target, then a closed cycle visiting every
    target, stitched from shortest paths.

    The target order minimizes the total cycle length over the distinct
    cyclic orders (two for three targets); ties break lexicographically.
    """
    if start is None:
        raise ValueError("a start lattice point is required")
    target_sets = list(targets) if targets is not None else list(graph.target_vertices)
    s_idx = tuple(start.indices)
    if s_idx not in graph.vertices:
        raise DisconnectedError(f"start {s_idx} is not a valid grid vertex")

    prefix_idx = _shortest_path(graph, s_idx, target_sets[0])
    anchor = prefix_idx[-1]

    best_cycle = None
    best_len = None
    for perm in itertools.permutations(range(1, len(target_sets))):
        legs = []
        cur = anchor
        total = 0
        try:
            for ti in perm:
                leg = _shortest_path(graph, cur, target_sets[ti])
                legs.append(leg)
                total += len(leg) - 1
                cur = leg[-1]
            back = _shortest_path(graph, cur, {anchor})
        except DisconnectedError:
            continue
        legs.append(back)
        total += len(back) - 1
        if best_len is None or total < best_len:
            best_len = total
            best_cycle = legs
    if best_cycle is None:
        raise DisconnectedError("no cycle connects all targets")

    cycle_idx = [anchor]
    for leg in best_cycle:
        cycle_idx.extend(leg[1:])
    if len(cycle_idx) > 1:
        cycle_idx = cycle_idx[:-1]  # the closing vertex equals the anchor

    q = graph.quantizer
    return PlanResult(
        prefix=[q.point_from_indices(k) for k in prefix_idx],
        cycle=[q.point_from_indices(k) for k in cycle_idx],
    )


def waypoints_to_input(
    plan: PlanResult,
    abs_sys: AbstractSystem,
    input_map: InputMap,
    dwell: float = 1.0,
    tracking_gain: float = 1.5,
    drift_matrix: Optional[np.ndarray] = None,
    dt: float = 1e-3,
    n_cycles: int = 1,
) -> FeedbackSignal:
    """Refine the waypoint plan into an abstract input signal.

    The law cancels the known linear drift and tracks the active waypoint:
    v(t) = clamp(-A xhat + k (p_next - xhat)), holding each waypoint for
    the dwell time. A validation rollout checks that each segment ends
    within eta/2 of its waypoint (TrackingFailureError otherwise) and
    that the clamp is active for at most half of any segment
    (InputMapViolationError otherwise). Requires input-affine abstract
    dynamics with identity input channel.
    """
    if dwell <= 0 or tracking_gain <= 0:
        raise ValueError("dwell and tracking gain must be positive")
    q = abs_sys.quantizer
    n = q.n
    a = np.zeros((n, n)) if drift_matrix is None else np.asarray(drift_matrix, dtype=float)
    box = input_map.box_at(0.0)
    n_pre = len(plan.prefix) - 1
    m_cyc = len(plan.cycle)

    # reference coordinates per segment, prefix tail then the rotated cycle
    pre_coords = np.array([p.coordinates for p in plan.prefix[1:]], dtype=float).reshape(n_pre, n)
    cyc_coords = np.array(
        [plan.cycle[(j + 1) % m_cyc].coordinates for j in range(m_cyc)], dtype=float
    )
    neg_a_t = -a.T
    box_lo = box.lo_arr if box is not None else None
    box_hi = box.hi_arr if box is not None else None

    def ref_coords(t: float) -> np.ndarray:
        seg = int(math.floor(t / dwell + _TIE_TOL))
        if seg < n_pre:
            return pre_coords[seg]
        return cyc_coords[(seg - n_pre) % m_cyc]

    def law(t: float, xh: np.ndarray) -> np.ndarray:
        raw = xh @ neg_a_t + tracking_gain * (ref_coords(t) - xh)
        return np.clip(raw, box_lo, box_hi) if box_lo is not None else raw

    signal = FeedbackSignal(law)

    # validation rollout over the prefix plus n_cycles loops
    horizon = (n_pre + n_cycles * m_cyc) * dwell
    times, states = numkernel.integrate_rk4(
        lambda t, x: np.asarray(abs_sys.f_d(t, x, law(t, x)), dtype=float),
        plan.prefix[0].coords,
        (0.0, horizon),
        dt,
    )
    tol = q.eta / 2.0
    n_segments = n_pre + n_cycles * m_cyc
    for seg in range(n_segments):
        t_end = (seg + 1) * dwell
        i_end = min(int(round(t_end / dt)), len(times) - 1)
        ref = plan.reference_at_segment(seg)
        gap = float(np.linalg.norm(states[i_end] - ref.coords))
        if gap > tol:
            raise TrackingFailureError(ref, gap, tol)
        if box is not None:
            i_start = int(round(seg * dwell / dt))
            seg_states = states[i_start : i_end + 1]
            raw = -(seg_states @ a.T) + tracking_gain * (ref.coords - seg_states)
            saturated = np.any(np.abs(raw - np.clip(raw, box.lo_arr, box.hi_arr)) > 1e-12, axis=1)
            if saturated.size and float(np.mean(saturated)) > 0.5:
                raise InputMapViolationError(
                    seg * dwell, None, detail="input clamp saturated for most of a segment"
                )

    plan.dwell = dwell
    plan.abstract_input = signal
    plan.horizon = horizon
    return signal


def plan_cycle_is_valid(plan: PlanResult, graph: GridGraph) -> bool:
    """Geometry re-check, independent of construction: the cycle touches
    every shrunk target and no waypoint cell meets an inflated obstacle."""
    q = graph.quantizer
    ws = graph.workspace
    pts = plan.prefix + plan.cycle
    for p in pts:
        cell = q.cell_of(p)
        if any(cell.intersects(o) for o in ws.inflated_obstacles):
            return False
        if not ws.bounds.try_shrink(ws.epsilon).contains_box(cell, tol=1e-9):
            return False
    for shrunk in ws.shrunk_targets:
        if not any(shrunk.contains(p.coords, tol=1e-9) for p in plan.cycle):
            return False
    seq = plan.cycle + [plan.cycle[0]]
    for a_, b_ in zip(seq[:-1], seq[1:]):
        d = np.abs(np.array(a_.indices) - np.array(b_.indices)).sum()
        if d > 1:
            return False
    return True
