"""Continuous-time, event-driven simulator for the capture game.

The engine advances by exact event times (no fixed timestep).  A policy is
invoked at every decision point -- release, alignment with an intruder,
spool-up completion, breach, or a wake-up it scheduled itself -- and answers
with either ``Turn`` (bang-off-bang heading control plus an optional alarm)
or ``Lock`` (commit to capturing an aligned intruder).  While spooling up
the heading is frozen for exactly ``delta`` and the policy is not consulted.

Ordering at equal timestamps is fixed: capture completions first, then
breaches, then alignments, wake-ups, and releases last, with ascending
intruder ids breaking remaining ties.  In particular a capture that
completes exactly when its target reaches the perimeter counts as a capture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence

from .core import (
    ANGLE_EPS,
    EPS,
    TAU,
    TIME_EPS,
    CaptureRecord,
    Event,
    InputSequence,
    Intruder,
    ProblemInstance,
    SimulationResult,
    SpoolingUp,
    Turning,
    TurretState,
    angle_gap,
    require_valid,
    virtual_radius,
    wrap_angle,
)


class SimulationError(Exception):
    """Base class for engine failures."""


class IllegalDecisionError(SimulationError):
    """A policy returned a decision the rules forbid.

    Carries the offending decision point so policy bugs are identifiable.
    """

    def __init__(self, message: str, decision_point: "DecisionPoint", decision):
        super().__init__(message)
        self.decision_point = decision_point
        self.decision = decision


class SourceError(SimulationError):
    """An input source misbehaved (e.g. released more than n_max intruders)."""


class InfeasibleScheduleError(SimulationError):
    """A fixed schedule could not be executed as written."""


@dataclass(frozen=True)
class Turn:
    """Turn at direction * omega; optionally ask to be woken at wake_at.

    Each Turn decision replaces any previously pending wake-up (None clears
    it).  Reaching +/-theta always produces a decision point on its own, so
    wake-ups are only needed for interior stops and timed waits.
    """

    direction: int
    wake_at: float | None = None


@dataclass(frozen=True)
class Lock:
    """Commit to capturing the given intruder; legal only when aligned and
    the intruder sits inside the lock window [rho + delta*v, r + delta*v]."""

    intruder_id: int


Decision = Turn | Lock


@dataclass(frozen=True)
class IntruderView:
    """What a policy sees of one alive intruder at a decision point."""

    id: int
    angle: float
    radius: float
    release_time: float


@dataclass(frozen=True)
class DecisionPoint:
    time: float
    heading: float
    trigger: str  # release | alignment | spool-complete | breach | wake-up
    alive: tuple[IntruderView, ...]
    trigger_id: int | None
    captured_ids: frozenset[int]
    lost_ids: frozenset[int]


class Policy(Protocol):
    """A stateful controller bound to a single run.

    Policies may additionally expose ``preferred_gamma0`` (a float) used by
    ``simulate`` when the caller does not fix the initial heading.
    """

    def decide(self, dp: DecisionPoint) -> Decision: ...


class InputSource:
    """Produces releases over time; adaptive subclasses may watch the log."""

    def peek_time(self) -> float | None:
        raise NotImplementedError

    def pop_due(self, t: float) -> list[Intruder]:
        raise NotImplementedError

    def observe(self, event: Event) -> None:  # pragma: no cover - default no-op
        pass

    def all_known(self) -> Mapping[int, Intruder]:
        """Full intruder table when known in advance (static sources only)."""
        return {}


class StaticSource(InputSource):
    def __init__(self, intruders: Iterable[Intruder]):
        self._pending = sorted(intruders, key=lambda i: (i.release_time, i.id))
        self._table = {i.id: i for i in self._pending}
        if len(self._table) != len(self._pending):
            raise ValueError("duplicate intruder ids")

    def peek_time(self) -> float | None:
        return self._pending[0].release_time if self._pending else None

    def pop_due(self, t: float) -> list[Intruder]:
        due = []
        while self._pending and self._pending[0].release_time <= t + TIME_EPS:
            due.append(self._pending.pop(0))
        return due

    def all_known(self) -> Mapping[int, Intruder]:
        return self._table


def as_source(source) -> InputSource:
    if isinstance(source, InputSource):
        return source
    if isinstance(source, InputSequence):
        return StaticSource(source.intruders())
    return StaticSource(source)


def _aligned(heading: float, angle: float, p: ProblemInstance) -> bool:
    return angle_gap(heading, angle, p) <= ANGLE_EPS


def lock_legal(
    state: TurretState,
    intruder: Intruder,
    t: float,
    p: ProblemInstance,
    *,
    non_causal: bool = False,
) -> bool:
    """True iff locking onto the intruder at time t is allowed.

    Requires alignment within ANGLE_EPS and a radius inside
    [rho + delta*v, r + delta*v], so that the capture at t + delta lands in
    [rho, r]; both window ends are inclusive.  With ``non_causal`` set the
    radius of a not-yet-released intruder is extrapolated backwards, which
    lets offline schedules spool up in anticipation of a known release.
    """
    if t < intruder.release_time - TIME_EPS and not non_causal:
        return False
    if not _aligned(state.heading, intruder.angle, p):
        return False
    z = virtual_radius(intruder, t, p)
    return p.lock_window_low - EPS <= z <= p.lock_window_high + EPS


_PRIORITY = {"capture": 0, "breach": 1, "alignment": 2, "wake": 3, "release": 4}


class _Run:
    def __init__(self, p, source, policy, gamma0, horizon, non_causal):
        self.p = p
        self.source = source
        self.policy = policy
        self.horizon = horizon
        self.non_causal = non_causal

        self.t = 0.0
        self.heading = gamma0
        self.direction = 0
        self.spool: SpoolingUp | None = None
        self.wake_at: float | None = None

        self.alive: dict[int, Intruder] = {}
        self.released: dict[int, Intruder] = {}
        self.captured: dict[int, CaptureRecord] = {}
        self.lost: dict[int, float] = {}
        self.events: list[Event] = []
        self._logged_direction: int | None = None

    # -- bookkeeping ------------------------------------------------------

    def _log(self, kind: str, **payload) -> Event:
        ev = Event(self.t, kind, payload)
        self.events.append(ev)
        self.source.observe(ev)
        return ev

    def _state(self) -> TurretState:
        mode = self.spool if self.spool is not None else Turning(self.direction)
        return TurretState(self.heading, mode)

    def _views(self) -> tuple[IntruderView, ...]:
        p = self.p
        return tuple(
            IntruderView(
                i.id,
                i.angle,
                i.release_radius - p.v * (self.t - i.release_time),
                i.release_time,
            )
            for _, i in sorted(self.alive.items())
        )

    # -- motion -----------------------------------------------------------

    def _advance(self, t2: float) -> None:
        dt = t2 - self.t
        if dt < -TIME_EPS:
            raise SimulationError(f"time went backwards: {self.t!r} -> {t2!r}")
        if dt > 0.0 and self.spool is None and self.direction != 0:
            h = self.heading + self.direction * self.p.omega * dt
            if self.p.wraps:
                h = wrap_angle(h)
            else:
                h = min(self.p.theta, max(-self.p.theta, h))
            self.heading = h
        self.t = t2

    def _next_alignment(self) -> tuple[float, int] | None:
        """Earliest strictly-future alignment with an alive intruder."""
        if self.direction == 0:
            return None
        best: tuple[float, int] | None = None
        for i_id, intr in self.alive.items():
            if self.p.wraps:
                delta = (intr.angle - self.heading) * self.direction % TAU
                if delta < ANGLE_EPS:
                    continue
            else:
                delta = (intr.angle - self.heading) * self.direction
                if delta <= ANGLE_EPS:
                    continue
            t_a = self.t + delta / self.p.omega
            if best is None or (t_a, i_id) < best:
                best = (t_a, i_id)
        return best

    def _boundary_time(self) -> float | None:
        if self.direction == 0 or self.p.wraps:
            return None
        target = self.p.theta if self.direction > 0 else -self.p.theta
        delta = (target - self.heading) * self.direction
        if delta <= ANGLE_EPS:
            return None
        return self.t + delta / self.p.omega

    def _next_breach(self) -> tuple[float, int] | None:
        locked = self.spool.target_id if self.spool is not None else None
        best: tuple[float, int] | None = None
        for i_id, intr in self.alive.items():
            if i_id == locked:
                continue  # a committed capture wins the tie at the perimeter
            tb = intr.breach_time(self.p)
            if best is None or (tb, i_id) < best:
                best = (tb, i_id)
        return best

    # -- event handlers ----------------------------------------------------

    def _handle_releases(self, invoke: bool) -> None:
        due = self.source.pop_due(self.t)
        due.sort(key=lambda i: i.id)
        last_id = None
        for intr in due:
            if intr.id in self.released:
                raise SourceError(f"duplicate release of intruder {intr.id}")
            if len(self.released) >= self.p.n_max:
                raise SourceError(
                    f"source exceeded n_max={self.p.n_max} at t={self.t!r}"
                )
            self.released[intr.id] = intr
            self.alive[intr.id] = intr
            self._log(
                "release", id=intr.id, angle=intr.angle, radius=intr.release_radius
            )
            last_id = intr.id
        if invoke and due and self.spool is None:
            self._decide("release", last_id)

    def _handle_breach(self, i_id: int) -> None:
        del self.alive[i_id]
        self.lost[i_id] = self.t
        self._log("breach", id=i_id, heading=self.heading)
        if self.spool is None:
            self._decide("breach", i_id)

    def _handle_capture(self) -> None:
        assert self.spool is not None
        target = self.spool.target_id
        if target not in self.alive:
            # Anticipatory capture completing exactly at the release instant:
            # the release shares the timestamp, so drain it first.
            self._handle_releases(invoke=False)
            if target not in self.alive:
                raise SimulationError(f"spool target {target} vanished")
        intr = self.alive.pop(target)
        z = virtual_radius(intr, self.t, self.p)
        if not (self.p.rho - EPS <= z <= self.p.r + EPS):
            raise SimulationError(
                f"capture of {target} at radius {z!r} outside [rho, r]"
            )
        self.captured[target] = CaptureRecord(self.t, z)
        self.spool = None
        self.direction = 0
        self._log("capture", id=target, heading=self.heading, radius=z)
        self._decide("spool-complete", target)

    # -- decisions ----------------------------------------------------------

    def _decide(self, trigger: str, trigger_id: int | None) -> None:
        dp = DecisionPoint(
            time=self.t,
            heading=self.heading,
            trigger=trigger,
            alive=self._views(),
            trigger_id=trigger_id,
            captured_ids=frozenset(self.captured),
            lost_ids=frozenset(self.lost),
        )
        decision = self.policy.decide(dp)
        if isinstance(decision, Lock):
            self._apply_lock(dp, decision)
        elif isinstance(decision, Turn):
            self._apply_turn(dp, decision)
        else:
            raise IllegalDecisionError(
                f"policy returned {decision!r}, expected Turn or Lock", dp, decision
            )

    def _apply_lock(self, dp: DecisionPoint, decision: Lock) -> None:
        intr = self.alive.get(decision.intruder_id)
        if intr is None and self.non_causal:
            intr = self.source.all_known().get(decision.intruder_id)
            if intr is not None and decision.intruder_id in self.captured:
                intr = None
        if intr is None:
            raise IllegalDecisionError(
                f"lock on unknown or dead intruder {decision.intruder_id} "
                f"at t={self.t!r}",
                dp,
                decision,
            )
        if not lock_legal(self._state(), intr, self.t, self.p, non_causal=self.non_causal):
            z = virtual_radius(intr, self.t, self.p)
            raise IllegalDecisionError(
                f"illegal lock on intruder {intr.id} at t={self.t!r}: "
                f"heading={self.heading!r}, angle={intr.angle!r}, radius={z!r}, "
                f"window=[{self.p.lock_window_low!r}, {self.p.lock_window_high!r}]",
                dp,
                decision,
            )
        z = virtual_radius(intr, self.t, self.p)
        self.spool = SpoolingUp(intr.id, self.t + self.p.delta)
        self.wake_at = None
        self._log("lock", id=intr.id, heading=self.heading, radius=z)

    def _apply_turn(self, dp: DecisionPoint, decision: Turn) -> None:
        if decision.direction not in (-1, 0, 1):
            raise IllegalDecisionError(
                f"turn direction must be -1, 0 or +1, got {decision.direction!r}",
                dp,
                decision,
            )
        if decision.wake_at is not None and decision.wake_at < self.t - TIME_EPS:
            raise IllegalDecisionError(
                f"wake_at={decision.wake_at!r} lies in the past (t={self.t!r})",
                dp,
                decision,
            )
        if decision.direction != self._logged_direction:
            self._log("turn", heading=self.heading, direction=decision.direction)
            self._logged_direction = decision.direction
        self.direction = decision.direction
        self.wake_at = decision.wake_at

    # -- main loop ----------------------------------------------------------

    def run(self) -> SimulationResult:
        self._decide("wake-up", None)
        while True:
            if (
                self.spool is None
                and not self.alive
                and self.source.peek_time() is None
            ):
                break

            cands: list[tuple[float, int, int, str]] = []
            if self.spool is not None:
                cands.append(
                    (self.spool.completion_time, _PRIORITY["capture"],
                     self.spool.target_id, "capture")
                )
            else:
                align = self._next_alignment()
                if align is not None:
                    cands.append((align[0], _PRIORITY["alignment"], align[1], "alignment"))
                boundary = self._boundary_time()
                if boundary is not None:
                    cands.append((boundary, _PRIORITY["wake"], -1, "boundary"))
                if self.wake_at is not None:
                    cands.append((max(self.wake_at, self.t), _PRIORITY["wake"], -2, "wake"))
            breach = self._next_breach()
            if breach is not None:
                cands.append((breach[0], _PRIORITY["breach"], breach[1], "breach"))
            release = self.source.peek_time()
            if release is not None:
                cands.append((release, _PRIORITY["release"], -3, "release"))

            if not cands:
                break
            t_next, _prio, tid, kind = min(cands)
            if self.horizon is not None and t_next > self.horizon + TIME_EPS:
                self._advance(self.horizon)
                break
            self._advance(t_next)

            if kind == "capture":
                self._handle_capture()
            elif kind == "breach":
                self._handle_breach(tid)
            elif kind == "release":
                self._handle_releases(invoke=True)
            elif kind == "alignment":
                intr = self.alive.get(tid)
                if intr is not None:
                    self.heading = intr.angle  # snap to the exact crossing
                    self._decide("alignment", tid)
            elif kind == "boundary":
                self.heading = self.p.theta if self.direction > 0 else -self.p.theta
                self._decide("wake-up", None)
            elif kind == "wake":
                self.wake_at = None
                self._decide("wake-up", None)

        return SimulationResult(
            released=dict(self.released),
            captured=dict(self.captured),
            lost=dict(self.lost),
            unresolved=tuple(sorted(self.alive)),
            events=tuple(self.events),
            final_time=self.t,
        )


def simulate(
    p: ProblemInstance,
    source,
    policy: Policy,
    gamma0: float | None = None,
    horizon: float | None = None,
    *,
    non_causal: bool = False,
) -> SimulationResult:
    """Run one game.

    ``source`` is an InputSequence, a list of intruders, or an adaptive
    InputSource.  ``gamma0`` defaults to the policy's preferred start (and 0
    when it has none).  Without a horizon the run ends once every released
    intruder has been captured or lost and the source is exhausted.
    """
    require_valid(p)
    src = as_source(source)
    if isinstance(source, InputSequence):
        problems = source.validate(p)
        if problems:
            raise ValueError("invalid input sequence: " + "; ".join(problems))
    if gamma0 is None:
        gamma0 = getattr(policy, "preferred_gamma0", None)
        if gamma0 is None:
            gamma0 = 0.0
    if abs(gamma0) > p.theta + ANGLE_EPS:
        raise ValueError(f"gamma0={gamma0!r} outside [-theta, theta]")
    return _Run(p, src, policy, gamma0, horizon, non_causal).run()


class _ReplayPolicy:
    """Drives the turret through a fixed (intruder, lock time) schedule."""

    def __init__(self, steps: Sequence[tuple[int, float]],
                 table: Mapping[int, Intruder], p: ProblemInstance):
        self.steps = list(steps)
        self.table = table
        self.p = p
        self.i = 0

    def decide(self, dp: DecisionPoint) -> Decision:
        if self.i >= len(self.steps):
            return Turn(0)
        target_id, lock_t = self.steps[self.i]
        angle = self.table[target_id].angle
        if dp.time >= lock_t - TIME_EPS:
            self.i += 1
            return Lock(target_id)
        d = angle - dp.heading
        if self.p.wraps:
            d = wrap_angle(d)
        if abs(d) <= ANGLE_EPS:
            return Turn(0, wake_at=lock_t)
        arrival = dp.time + abs(d) / self.p.omega
        direction = 1 if d > 0 else -1
        return Turn(direction, wake_at=min(arrival, lock_t))


def run_fixed_schedule(
    p: ProblemInstance,
    intruders,
    schedule,
    gamma0: float = 0.0,
    *,
    non_causal: bool = True,
) -> SimulationResult:
    """Replay an offline schedule through the engine.

    ``schedule`` is a Schedule from the offline solvers or an iterable of
    (intruder id, lock time) pairs.  Lock times must be non-decreasing and
    leave room for the spool-up plus travel between consecutive targets.
    Raises InfeasibleScheduleError naming the first violated lock if the
    schedule cannot be executed or misses one of its captures.
    """
    require_valid(p)
    if isinstance(intruders, InputSequence):
        intruders = intruders.intruders()
    intruders = tuple(intruders)
    table = {i.id: i for i in intruders}

    steps: list[tuple[int, float]] = []
    for step in getattr(schedule, "steps", schedule):
        if hasattr(step, "intruder_id"):
            steps.append((step.intruder_id, step.lock_time))
        else:
            i_id, lock_t = step
            steps.append((int(i_id), float(lock_t)))

    seen: set[int] = set()
    pos = gamma0
    prev_lock: float | None = None
    for k, (i_id, lock_t) in enumerate(steps):
        if i_id not in table:
            raise InfeasibleScheduleError(f"lock {k} targets unknown intruder {i_id}")
        if i_id in seen:
            raise InfeasibleScheduleError(f"lock {k} repeats intruder {i_id}")
        seen.add(i_id)
        angle = table[i_id].angle
        if prev_lock is None:
            earliest = travel_from(pos, angle, p)
        else:
            if lock_t < prev_lock + p.delta - TIME_EPS:
                raise InfeasibleScheduleError(
                    f"overlapping spool-up: lock {k} on intruder {i_id} at "
                    f"t={lock_t!r} starts before the previous capture completes"
                )
            earliest = prev_lock + p.delta + travel_from(pos, angle, p)
        if lock_t < earliest - TIME_EPS:
            raise InfeasibleScheduleError(
                f"lock {k} on intruder {i_id} at t={lock_t!r} is unreachable "
                f"(earliest arrival {earliest!r})"
            )
        pos = angle
        prev_lock = lock_t

    policy = _ReplayPolicy(steps, table, p)
    try:
        result = simulate(p, intruders, policy, gamma0, non_causal=non_causal)
    except IllegalDecisionError as exc:
        raise InfeasibleScheduleError(f"schedule infeasible: {exc}") from exc
    scheduled = {i_id for i_id, _ in steps}
    if set(result.captured) != scheduled:
        missing = sorted(scheduled - set(result.captured))
        raise InfeasibleScheduleError(
            f"schedule infeasible: intruders {missing} were not captured"
        )
    return result


def travel_from(a: float, b: float, p: ProblemInstance) -> float:
    return angle_gap(a, b, p) / p.omega
