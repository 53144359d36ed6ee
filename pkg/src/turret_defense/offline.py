"""Offline solvers: the time-window mapping, the reachability-graph optimum
for r = rho, and an exhaustive oracle used as ground truth.

With every intruder position known in advance the capture problem becomes a
single-vehicle routing problem on the angular segment [-theta, theta]: each
intruder turns into a unit-reward service at its angle whose time window
runs from the moment it enters the lock window to the moment it reaches the
perimeter.  When the turret's range equals the perimeter radius, captures
happen exactly at the perimeter, pairwise serveability collapses to a fixed
inequality between two intruders, and the optimum is a longest path in the
resulting DAG.  The brute-force oracle enumerates ordered subsets and works
for any range; both solvers share one earliest-feasible timing kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .core import (
    EPS,
    TIME_EPS,
    InputSequence,
    Intruder,
    ProblemInstance,
    angle_gap,
    require_valid,
)

DEFAULT_ORACLE_CAP = 9


@dataclass(frozen=True)
class TimeWindow:
    """Service window of one intruder mapped onto the angular segment."""

    intruder_id: int
    location: float          # angle, radians
    earliest_lock: float     # clamped at 0
    latest_completion: float # instant the intruder reaches the perimeter
    reward: int = 1

    def is_void(self, delta: float) -> bool:
        """True when the window cannot accommodate a single service."""
        return self.earliest_lock > self.latest_completion - delta + EPS


def to_trp_tw(p: ProblemInstance, intruders: Iterable[Intruder]) -> list[TimeWindow]:
    """Map intruders present at time 0 to timed services on the segment.

    An intruder at radius z becomes a service at its angle with window
    [max(0, (z - r)/v - delta), (z - rho)/v]; intruders already inside the
    lock window get earliest_lock = 0.  Collocated intruders stay separate
    unit-reward services.
    """
    require_valid(p)
    windows = []
    for intr in intruders:
        if intr.release_time != 0.0:
            raise ValueError(
                f"intruder {intr.id} released at t={intr.release_time!r}; "
                "the window mapping covers instances fully present at t=0"
            )
        z = intr.release_radius
        if z <= p.rho + EPS:
            raise ValueError(f"intruder {intr.id} at radius {z!r} already breached")
        if z > 1.0 + EPS:
            raise ValueError(f"intruder {intr.id} at radius {z!r} outside the rim")
        earliest = max(0.0, (z - p.r) / p.v - p.delta)
        windows.append(TimeWindow(intr.id, intr.angle, earliest, (z - p.rho) / p.v))
    return windows


@dataclass(frozen=True)
class ReachabilityGraph:
    """DAG over intruders for the r = rho regime.

    ``source_edges`` lists intruders the turret can serve first from its
    initial heading; ``edges`` maps each intruder to the intruders still
    serveable after capturing it at the perimeter.
    """

    vertex_ids: tuple[int, ...]
    source_edges: tuple[int, ...]
    edges: Mapping[int, tuple[int, ...]]
    gamma0: float

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.edges.get(i, ())


def _deadline_radius(intr: Intruder, p: ProblemInstance) -> float:
    """Release radius shifted to a common t = 0 clock.

    Two intruders compare through their capture-at-perimeter instants
    (z - rho)/v; folding the release time into the radius keeps the pairwise
    inequality in its time-free form for timed sequences too.
    """
    return intr.release_radius + p.v * intr.release_time


def build_reachability_graph(
    p: ProblemInstance, intruders: Iterable[Intruder], gamma0: float
) -> ReachabilityGraph:
    """Directed graph with an edge i -> j iff j is serveable after i.

    Requires r = rho: the construction assumes each capture happens exactly
    at the perimeter.  Edge rule (inclusive):
    z_j - z_i >= v*delta + (v/omega)*|angle_j - angle_i|; the source connects
    to every intruder the turret can reach from gamma0 in time.
    """
    require_valid(p)
    if abs(p.r - p.rho) > 1e-12:
        raise ValueError("reachability DAG requires r = rho")
    intruders = tuple(intruders)
    z = {i.id: _deadline_radius(i, p) for i in intruders}
    by_id = {i.id: i for i in intruders}
    ids = tuple(sorted(by_id))

    source_edges = tuple(
        i
        for i in ids
        if z[i]
        >= p.rho + p.delta * p.v
        + (p.v / p.omega) * angle_gap(gamma0, by_id[i].angle, p) - EPS
    )
    edges: dict[int, tuple[int, ...]] = {}
    for i in ids:
        succ = []
        for j in ids:
            if i == j:
                continue
            need = p.v * p.delta + (p.v / p.omega) * angle_gap(
                by_id[i].angle, by_id[j].angle, p
            )
            if z[j] - z[i] >= need - EPS:
                succ.append(j)
        edges[i] = tuple(succ)
    return ReachabilityGraph(ids, source_edges, edges, gamma0)


@dataclass(frozen=True)
class ScheduleStep:
    intruder_id: int
    lock_time: float
    capture_time: float


@dataclass(frozen=True)
class Schedule:
    """A feasible timed capture plan; its value is the number of captures."""

    steps: tuple[ScheduleStep, ...]

    @property
    def value(self) -> int:
        return len(self.steps)

    @property
    def order(self) -> tuple[int, ...]:
        return tuple(s.intruder_id for s in self.steps)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "steps": [
                {"id": s.intruder_id, "lock": s.lock_time, "capture": s.capture_time}
                for s in self.steps
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Schedule":
        return cls(
            tuple(
                ScheduleStep(int(s["id"]), float(s["lock"]), float(s["capture"]))
                for s in obj["steps"]
            )
        )


EMPTY_SCHEDULE = Schedule(())


def longest_path_schedule(
    g: ReachabilityGraph, p: ProblemInstance, intruders: Iterable[Intruder]
) -> Schedule:
    """Maximum-capture schedule for r = rho via longest path on the DAG.

    Relaxes vertices in ascending deadline order (every edge increases the
    shifted radius, so that order is topological).  Ties between maximum
    paths break toward the lexicographically smallest id sequence.  The
    returned schedule is the just-in-time realization: each intruder on the
    path is captured exactly at the perimeter.
    """
    intruders = tuple(intruders)
    by_id = {i.id: i for i in intruders}
    z = {i.id: _deadline_radius(i, p) for i in intruders}
    topo = sorted(g.vertex_ids, key=lambda i: (z[i], i))

    preds: dict[int, list[int]] = {i: [] for i in g.vertex_ids}
    for i, succs in g.edges.items():
        for j in succs:
            preds[j].append(i)

    best: dict[int, tuple[int, tuple[int, ...]]] = {}
    for i in sorted(g.source_edges):
        best[i] = (1, (i,))
    for j in topo:
        for i in preds[j]:
            if i not in best:
                continue
            length, path = best[i]
            cand = (length + 1, path + (j,))
            cur = best.get(j)
            if cur is None or cand[0] > cur[0] or (cand[0] == cur[0] and cand[1] < cur[1]):
                best[j] = cand
    if not best:
        return EMPTY_SCHEDULE
    top_len = max(ln for ln, _ in best.values())
    path = min(pth for ln, pth in best.values() if ln == top_len)

    steps = []
    for i in path:
        capture = (z[i] - p.rho) / p.v
        steps.append(ScheduleStep(i, capture - p.delta, capture))
    return Schedule(tuple(steps))


@dataclass(frozen=True)
class Infeasible:
    """Why an ordered capture attempt fails, at the first violation."""

    index: int
    intruder_id: int
    reason: str


def _timed_step(
    p: ProblemInstance,
    position: float,
    free_at: float,
    intr: Intruder,
    anticipatory: bool,
) -> tuple[float, float] | str:
    """Earliest feasible (lock, capture) for the next intruder, or a reason.

    The lock window opens when the intruder hits r + delta*v and closes when
    it hits rho + delta*v.  With ``anticipatory`` the opening may precede the
    release (the turret spools up for a known future arrival); the closing
    never moves.
    """
    arrive = free_at + angle_gap(position, intr.angle, p) / p.omega
    opens = intr.release_time + (intr.release_radius - p.lock_window_high) / p.v
    if not anticipatory:
        opens = max(opens, intr.release_time)
    closes = intr.release_time + (intr.release_radius - p.lock_window_low) / p.v
    lock = max(arrive, opens)
    if lock > closes + EPS:
        return (
            f"cannot reach intruder {intr.id} before its window closes "
            f"(earliest lock {lock!r}, window closes {closes!r})"
        )
    return lock, lock + p.delta


def schedule_feasible(
    order: Sequence[int],
    p: ProblemInstance,
    intruders: Iterable[Intruder],
    gamma0: float,
    *,
    anticipatory: bool = True,
) -> Schedule | Infeasible:
    """Earliest-feasible timing for a capture order, or the first violation."""
    require_valid(p)
    table = {i.id: i for i in intruders}
    seen: set[int] = set()
    position, free_at = gamma0, 0.0
    steps: list[ScheduleStep] = []
    for k, i_id in enumerate(order):
        if i_id not in table:
            return Infeasible(k, i_id, f"unknown intruder {i_id}")
        if i_id in seen:
            return Infeasible(k, i_id, f"intruder {i_id} repeated")
        seen.add(i_id)
        intr = table[i_id]
        timing = _timed_step(p, position, free_at, intr, anticipatory)
        if isinstance(timing, str):
            return Infeasible(k, i_id, timing)
        lock, capture = timing
        steps.append(ScheduleStep(i_id, lock, capture))
        position, free_at = intr.angle, capture
    return Schedule(tuple(steps))


def brute_force_optimal(
    p: ProblemInstance,
    intruders,
    gamma0: float,
    cap: int = DEFAULT_ORACLE_CAP,
    *,
    anticipatory: bool = True,
) -> tuple[int, Schedule]:
    """Exhaustive maximum over ordered subsets of intruders.

    Ground-truth oracle for the offline optimum: release times are known in
    advance (the optimal offline algorithm is non-causal) and any r >= rho
    is supported.  Dominated prefixes -- same captured set, same last target,
    no earlier completion -- are pruned, which preserves both the optimal
    count and the lexicographically-smallest maximizing order.
    """
    require_valid(p)
    if isinstance(intruders, InputSequence):
        intruders = intruders.intruders()
    intruders = tuple(intruders)
    if len(intruders) > cap:
        raise ValueError(
            f"instance too large for oracle ({len(intruders)} intruders > cap={cap})"
        )
    table = {i.id: i for i in intruders}
    ids = sorted(table)

    best_count = 0
    best_sched = EMPTY_SCHEDULE
    seen: dict[tuple[frozenset[int], int], float] = {}

    def dfs(visited: frozenset[int], position: float, free_at: float,
            steps: tuple[ScheduleStep, ...]) -> None:
        nonlocal best_count, best_sched
        if len(steps) > best_count:
            best_count = len(steps)
            best_sched = Schedule(steps)
        if len(steps) + (len(ids) - len(visited)) <= best_count:
            return
        for i_id in ids:
            if i_id in visited:
                continue
            timing = _timed_step(p, position, free_at, table[i_id], anticipatory)
            if isinstance(timing, str):
                continue
            lock, capture = timing
            key = (visited | {i_id}, i_id)
            prev = seen.get(key)
            if prev is not None and capture >= prev - TIME_EPS:
                continue
            seen[key] = capture
            dfs(
                key[0],
                table[i_id].angle,
                capture,
                steps + (ScheduleStep(i_id, lock, capture),),
            )

    dfs(frozenset(), gamma0, 0.0, ())
    return best_count, best_sched
