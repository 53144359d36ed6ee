"""Online policies: the sweeping turret, the project-and-capture epochs, and
two small reference policies used as baselines.

Policies are stateful objects bound to one simulation run; construct a fresh
instance per run.  They see only intruders released so far (the engine's
decision points carry the live information set) and answer with Turn or Lock
decisions.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .core import ANGLE_EPS, EPS, ProblemInstance, angle_gap
from .engine import Decision, DecisionPoint, IntruderView, Lock, Turn


def _legal_radius(radius: float, p: ProblemInstance) -> bool:
    return p.lock_window_low - EPS <= radius <= p.lock_window_high + EPS


class SweepingTurret:
    """Open-loop sweep between -theta and +theta, capturing along the way.

    Starts at -theta and turns toward +theta; whenever aligned with alive
    intruders no farther than min(v*delta + r, 1) it locks them one at a
    time, then resumes.  At the edges it reverses; for theta = pi it never
    reverses and keeps circling in one direction.  Intruders beyond the
    range gate are ignored entirely.
    """

    def __init__(self, p: ProblemInstance):
        self.p = p
        self.preferred_gamma0 = -p.theta
        self.sweep_dir = 1

    def _lockable(self, dp: DecisionPoint) -> IntruderView | None:
        gate = min(1.0, self.p.lock_window_high)
        for iv in dp.alive:
            if (
                angle_gap(dp.heading, iv.angle, self.p) <= ANGLE_EPS
                and iv.radius <= gate + EPS
                and _legal_radius(iv.radius, self.p)
            ):
                return iv
        return None

    def decide(self, dp: DecisionPoint) -> Decision:
        target = self._lockable(dp)
        if target is not None:
            return Lock(target.id)
        if not self.p.wraps:
            if self.sweep_dir > 0 and dp.heading >= self.p.theta - ANGLE_EPS:
                self.sweep_dir = -1
            elif self.sweep_dir < 0 and dp.heading <= -self.p.theta + ANGLE_EPS:
                self.sweep_dir = 1
        return Turn(self.sweep_dir)


def sit_policy(p: ProblemInstance) -> SweepingTurret:
    return SweepingTurret(p)


@dataclass(frozen=True)
class EpochSets:
    """The four frozen comparison sets of one epoch.

    ``right``/``left`` hold intruders already inside the lock window at the
    epoch start (angle >= 0 goes right); ``right_proj``/``left_proj`` hold
    the ones projected to enter it during the epoch, bounded by how long the
    outbound leg will take.  Projected sets are empty when r + delta*v >= 1.
    """

    right: tuple[int, ...]
    left: tuple[int, ...]
    right_proj: tuple[int, ...]
    left_proj: tuple[int, ...]

    @property
    def right_total(self) -> int:
        return len(self.right) + len(self.right_proj)

    @property
    def left_total(self) -> int:
        return len(self.left) + len(self.left_proj)


def epoch_sets(alive: tuple[IntruderView, ...], p: ProblemInstance) -> EpochSets:
    """Partition the currently alive intruders for an epoch starting now.

    Callers are expected to evaluate this with the turret at heading 0.
    """
    near = p.lock_window_high
    right = [iv.id for iv in alive if iv.angle >= 0.0 and iv.radius <= near + EPS]
    left = [iv.id for iv in alive if iv.angle < 0.0 and iv.radius <= near + EPS]
    right_proj: list[int] = []
    left_proj: list[int] = []
    if near < 1.0:
        r_bound = min(1.0, p.r + (p.theta / p.omega + (len(right) + 1) * p.delta) * p.v)
        l_bound = min(1.0, p.r + (p.theta / p.omega + (len(left) + 1) * p.delta) * p.v)
        right_proj = [
            iv.id
            for iv in alive
            if iv.angle >= 0.0 and near + EPS < iv.radius <= r_bound + EPS
        ]
        left_proj = [
            iv.id
            for iv in alive
            if iv.angle < 0.0 and near + EPS < iv.radius <= l_bound + EPS
        ]
    return EpochSets(tuple(right), tuple(left), tuple(right_proj), tuple(left_proj))


@dataclass(frozen=True)
class EpochRecord:
    index: int
    start_time: float
    side: int  # +1 right, -1 left
    sets: EpochSets


class ProjectAndCapture:
    """Epoch policy: pick the fuller side, sweep out serving the in-window
    members, sweep back serving the projected ones, repeat from heading 0.

    Set membership freezes at the epoch start; a frozen member whose lock
    window has already closed when the turret reaches its angle is skipped.
    On the inbound leg the turret waits for a projected member whose window
    has not opened yet (it arrives early only outside the guaranteed
    regime).  Ties in the side comparison go right.
    """

    def __init__(self, p: ProblemInstance):
        self.p = p
        self.preferred_gamma0 = 0.0
        self.phase = "seek-zero"
        self.side = 1
        self.out_pending: list[tuple[int, float]] = []  # (id, angle)
        self.in_pending: list[tuple[int, float]] = []
        self.epochs: list[EpochRecord] = []

    # -- epoch bookkeeping --------------------------------------------------

    def _start_epoch(self, dp: DecisionPoint) -> Decision:
        sets = epoch_sets(dp.alive, self.p)
        self.side = 1 if sets.right_total >= sets.left_total else -1
        members = sets.right if self.side > 0 else sets.left
        proj = sets.right_proj if self.side > 0 else sets.left_proj
        angles = {iv.id: iv.angle for iv in dp.alive}
        self.out_pending = sorted(
            ((i, angles[i]) for i in members), key=lambda e: (abs(e[1]), e[0])
        )
        self.in_pending = sorted(
            ((i, angles[i]) for i in proj), key=lambda e: (-abs(e[1]), e[0])
        )
        self.epochs.append(EpochRecord(len(self.epochs) + 1, dp.time, self.side, sets))
        self.phase = "outbound"
        return self._proceed(dp)

    def _prune(self, pending: list[tuple[int, float]], dp: DecisionPoint) -> None:
        alive = {iv.id for iv in dp.alive}
        pending[:] = [e for e in pending if e[0] in alive]

    def _travel_wake(self, dp: DecisionPoint, direction: int, target: float) -> float:
        """Arrival time at ``target`` moving in ``direction`` from here."""
        if self.p.wraps:
            delta = ((target - dp.heading) * direction) % (2.0 * math.pi)
        else:
            delta = (target - dp.heading) * direction
        return dp.time + max(delta, 0.0) / self.p.omega

    # -- movement ------------------------------------------------------------

    def decide(self, dp: DecisionPoint) -> Decision:
        if self.phase == "seek-zero":
            if abs(dp.heading) <= ANGLE_EPS:
                return self._start_epoch(dp)
            direction = -1 if dp.heading > 0 else 1
            return Turn(direction, wake_at=self._travel_wake(dp, direction, 0.0))
        return self._proceed(dp)

    def _proceed(self, dp: DecisionPoint) -> Decision:
        if self.phase == "outbound":
            return self._proceed_out(dp)
        return self._proceed_in(dp)

    def _proceed_out(self, dp: DecisionPoint) -> Decision:
        self._prune(self.out_pending, dp)
        radii = {iv.id: iv.radius for iv in dp.alive}
        while self.out_pending:
            i_id, angle = self.out_pending[0]
            if angle_gap(dp.heading, angle, self.p) > ANGLE_EPS:
                break
            self.out_pending.pop(0)
            if _legal_radius(radii[i_id], self.p):
                return Lock(i_id)
            # window already closed when reached: skip
        edge = self.side * self.p.theta
        if angle_gap(dp.heading, edge, self.p) <= ANGLE_EPS:
            self.phase = "inbound"
            return self._proceed_in(dp)
        wake = self._travel_wake(dp, self.side, edge) if self.p.wraps else None
        return Turn(self.side, wake_at=wake)

    def _proceed_in(self, dp: DecisionPoint) -> Decision:
        self._prune(self.in_pending, dp)
        radii = {iv.id: iv.radius for iv in dp.alive}
        while self.in_pending:
            i_id, angle = self.in_pending[0]
            if angle_gap(dp.heading, angle, self.p) > ANGLE_EPS:
                break
            radius = radii[i_id]
            if radius > self.p.lock_window_high + EPS:
                opens = dp.time + (radius - self.p.lock_window_high) / self.p.v
                return Turn(0, wake_at=max(opens, dp.time + 1e-8))
            self.in_pending.pop(0)
            if _legal_radius(radius, self.p):
                return Lock(i_id)
        if abs(dp.heading) <= ANGLE_EPS:
            return self._start_epoch(dp)
        return Turn(-self.side, wake_at=self._travel_wake(dp, -self.side, 0.0))


def dpac_policy(p: ProblemInstance) -> ProjectAndCapture:
    return ProjectAndCapture(p)


class CampingTurret:
    """Heads to a fixed angle and locks whatever becomes legal while aligned.

    Minimal greedy baseline; camped at an edge it takes the first stream
    intruder the moment its lock window opens.
    """

    def __init__(self, p: ProblemInstance, target_angle: float):
        self.p = p
        self.target = target_angle
        self.preferred_gamma0 = 0.0

    def decide(self, dp: DecisionPoint) -> Decision:
        for iv in dp.alive:
            if (
                angle_gap(dp.heading, iv.angle, self.p) <= ANGLE_EPS
                and _legal_radius(iv.radius, self.p)
            ):
                return Lock(iv.id)
        d = self.target - dp.heading
        if abs(d) <= ANGLE_EPS:
            # Parked: wait for the next window to open, if any is upcoming.
            upcoming = [
                dp.time + (iv.radius - self.p.lock_window_high) / self.p.v
                for iv in dp.alive
                if angle_gap(dp.heading, iv.angle, self.p) <= ANGLE_EPS
                and iv.radius > self.p.lock_window_high + EPS
            ]
            wake = max(min(upcoming), dp.time + 1e-8) if upcoming else None
            return Turn(0, wake_at=wake)
        return Turn(1 if d > 0 else -1)


def camp_policy(p: ProblemInstance, target_angle: float) -> CampingTurret:
    return CampingTurret(p, target_angle)


class RandomTurret:
    """Seeded random walk that opportunistically locks legal targets."""

    def __init__(self, p: ProblemInstance, seed: int):
        self.p = p
        self.rng = random.Random(seed)
        self.preferred_gamma0 = 0.0
        self.dir = self.rng.choice((-1, 1))

    def decide(self, dp: DecisionPoint) -> Decision:
        legal = [
            iv
            for iv in dp.alive
            if angle_gap(dp.heading, iv.angle, self.p) <= ANGLE_EPS
            and _legal_radius(iv.radius, self.p)
        ]
        if legal and self.rng.random() < 0.8:
            return Lock(legal[0].id)
        if not self.p.wraps:
            if self.dir > 0 and dp.heading >= self.p.theta - ANGLE_EPS:
                self.dir = -1
            elif self.dir < 0 and dp.heading <= -self.p.theta + ANGLE_EPS:
                self.dir = 1
            elif self.rng.random() < 0.25:
                self.dir = -self.dir
        wake = dp.time + self.rng.uniform(0.2, 1.0) * self.p.theta / self.p.omega
        return Turn(self.dir, wake_at=wake)


def random_policy(p: ProblemInstance, seed: int) -> RandomTurret:
    return RandomTurret(p, seed)


POLICY_FACTORIES = {
    "sit": sit_policy,
    "dpac": dpac_policy,
}


def make_policy(name: str, p: ProblemInstance, seed: int = 0):
    """Build a policy by name; 'sit' and 'dpac' are the supported names."""
    try:
        factory = POLICY_FACTORIES[name]
    except KeyError:
        raise ValueError(
            f"unknown policy {name!r}; choose from {sorted(POLICY_FACTORIES)}"
        ) from None
    return factory(p)
