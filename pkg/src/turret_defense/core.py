"""Domain types and kinematic helpers for the turret perimeter-defense game.

The playing field is a planar cone of half-angle ``theta`` with unit outer
radius.  A turret sits at the apex and guards the concentric perimeter of
radius ``rho``.  Intruders appear at the outer rim (or, for offline problem
instances, anywhere between the perimeter and the rim) and move radially
inward at constant speed ``v``.  The turret turns with angular speed at most
``omega`` and has range ``r``; committing to a capture freezes its heading
for the spool-up time ``delta``, after which the target is removed provided
it still lies within ``[rho, r]`` of the origin.  An intruder that reaches
the perimeter uncaptured is lost.

Everything in this module is an immutable value type shared by the engine,
the solvers and the policies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

TAU = 2.0 * math.pi

# Shared tolerances.  Angles are compared to within ANGLE_EPS radians and
# inclusive boundary inequalities get EPS of slack so that exact boundary
# cases (captures at the perimeter, locks at the edge of the window) survive
# floating point.
ANGLE_EPS = 1e-9
EPS = 1e-9
TIME_EPS = 1e-9


@dataclass(frozen=True)
class ProblemInstance:
    """The seven parameters defining a game."""

    theta: float  # cone half-angle, radians, 0 < theta <= pi
    rho: float    # perimeter radius, fraction of the rim radius, 0 < rho < 1
    v: float      # intruder radial speed
    omega: float  # turret angular speed
    r: float      # turret range, rho <= r <= 1
    n_max: int    # maximum number of intruders, >= 2
    delta: float  # spool-up (service) time per capture

    @property
    def wraps(self) -> bool:
        """True when the cone closes into a full circle and headings wrap."""
        return self.theta >= math.pi - 1e-12

    @property
    def lock_window_low(self) -> float:
        """Smallest radius at which a lock still completes inside the ring."""
        return self.rho + self.delta * self.v

    @property
    def lock_window_high(self) -> float:
        """Largest radius at which a lock completes within range."""
        return self.r + self.delta * self.v

    def to_json(self) -> dict:
        return {
            "theta": self.theta,
            "rho": self.rho,
            "v": self.v,
            "omega": self.omega,
            "r": self.r,
            "n_max": self.n_max,
            "delta": self.delta,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ProblemInstance":
        return cls(
            theta=float(obj["theta"]),
            rho=float(obj["rho"]),
            v=float(obj["v"]),
            omega=float(obj["omega"]),
            r=float(obj["r"]),
            n_max=int(obj["n_max"]),
            delta=float(obj["delta"]),
        )


def validate_instance(p: ProblemInstance) -> list[str]:
    """Return every violated parameter invariant; an empty list means ok."""
    bad: list[str] = []
    if not (0.0 < p.rho < 1.0):
        bad.append(f"0 < rho < 1 violated (rho={p.rho!r})")
    if not p.rho <= p.r:
        bad.append(f"rho <= r violated (rho={p.rho!r}, r={p.r!r})")
    if not p.r <= 1.0:
        bad.append(f"r <= 1 violated (r={p.r!r})")
    if not 0.0 < p.theta <= math.pi + 1e-12:
        bad.append(f"0 < theta <= pi violated (theta={p.theta!r})")
    if not p.v > 0.0:
        bad.append(f"v > 0 violated (v={p.v!r})")
    if not p.omega > 0.0:
        bad.append(f"omega > 0 violated (omega={p.omega!r})")
    if not p.delta > 0.0:
        bad.append(f"delta > 0 violated (delta={p.delta!r})")
    if not (isinstance(p.n_max, int) and p.n_max >= 2):
        bad.append(f"n_max >= 2 violated (n_max={p.n_max!r})")
    return bad


def require_valid(p: ProblemInstance) -> None:
    violations = validate_instance(p)
    if violations:
        raise ValueError("invalid problem instance: " + "; ".join(violations))


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, TAU)
    if a <= 0.0:
        a += TAU
    return a - math.pi


def angle_gap(a: float, b: float, p: ProblemInstance) -> float:
    """Unsigned angular distance; wraps around only when theta = pi."""
    d = abs(a - b)
    if p.wraps:
        d = min(d, TAU - d)
    return d


def travel_time(from_angle: float, to_angle: float, p: ProblemInstance) -> float:
    """Time for the turret to turn between two headings at full speed."""
    for ang in (from_angle, to_angle):
        if abs(ang) > p.theta + ANGLE_EPS:
            raise ValueError(f"angle {ang!r} outside [-theta, theta]")
    return angle_gap(from_angle, to_angle, p) / p.omega


@dataclass(frozen=True)
class Intruder:
    """One intruder: released at a fixed angle, it then moves straight in.

    Online releases start at the rim (release_radius = 1); offline problem
    instances may place intruders anywhere in (rho, 1] at time 0.
    """

    id: int
    release_time: float
    angle: float
    release_radius: float = 1.0

    def breach_time(self, p: ProblemInstance) -> float:
        """Instant at which the intruder reaches the perimeter."""
        return self.release_time + (self.release_radius - p.rho) / p.v


def radius_at(intruder: Intruder, t: float, p: ProblemInstance) -> float:
    """Radial position at time t; raises if queried before release."""
    if t < intruder.release_time - TIME_EPS:
        raise ValueError(
            f"intruder {intruder.id} not yet released at t={t!r} "
            f"(release_time={intruder.release_time!r})"
        )
    elapsed = max(0.0, t - intruder.release_time)
    return intruder.release_radius - p.v * elapsed


def virtual_radius(intruder: Intruder, t: float, p: ProblemInstance) -> float:
    """Radial position extrapolated backwards before the release instant.

    A non-causal offline schedule may spool up in anticipation of a known
    future release; the lock-window test then applies to this extrapolation.
    """
    return intruder.release_radius - p.v * (t - intruder.release_time)


@dataclass(frozen=True)
class Release:
    """A batch of intruders appearing at one instant."""

    time: float
    angles: tuple[float, ...]
    radii: tuple[float, ...] | None = None

    def radius_of(self, k: int) -> float:
        return 1.0 if self.radii is None else self.radii[k]


@dataclass(frozen=True)
class InputSequence:
    """An ordered sequence of release batches."""

    releases: tuple[Release, ...]

    @property
    def count(self) -> int:
        return sum(len(rel.angles) for rel in self.releases)

    @classmethod
    def from_events(cls, events: Iterable[tuple]) -> "InputSequence":
        """Build a sequence from (time, angle) or (time, angle, radius) tuples."""
        items = []
        for ev in events:
            t, angle = ev[0], ev[1]
            radius = ev[2] if len(ev) > 2 else 1.0
            items.append((float(t), float(angle), float(radius)))
        items.sort(key=lambda e: e[0])
        releases: list[Release] = []
        for t, angle, radius in items:
            if releases and releases[-1].time == t:
                last = releases[-1]
                releases[-1] = Release(
                    t, last.angles + (angle,), (last.radii or ()) + (radius,)
                )
            else:
                releases.append(Release(t, (angle,), (radius,)))
        return cls(tuple(releases))

    def intruders(self) -> tuple[Intruder, ...]:
        """Flatten into intruders with ids assigned in release order."""
        out: list[Intruder] = []
        for rel in self.releases:
            for k, angle in enumerate(rel.angles):
                out.append(Intruder(len(out), rel.time, angle, rel.radius_of(k)))
        return tuple(out)

    def validate(self, p: ProblemInstance) -> list[str]:
        bad: list[str] = []
        prev = -math.inf
        for rel in self.releases:
            if rel.time < prev:
                bad.append(f"release times decrease at t={rel.time!r}")
            prev = rel.time
            if rel.time < 0.0:
                bad.append(f"negative release time {rel.time!r}")
            for k, angle in enumerate(rel.angles):
                if abs(angle) > p.theta + ANGLE_EPS:
                    bad.append(f"angle {angle!r} outside [-theta, theta]")
                z = rel.radius_of(k)
                if not (p.rho < z <= 1.0 + EPS):
                    bad.append(f"release radius {z!r} outside (rho, 1]")
        if self.count > p.n_max:
            bad.append(f"{self.count} intruders exceed n_max={p.n_max}")
        return bad

    def to_json(self) -> dict:
        out = []
        for rel in self.releases:
            entry: dict = {"t": rel.time, "angles": list(rel.angles)}
            if rel.radii is not None and any(z != 1.0 for z in rel.radii):
                entry["radii"] = list(rel.radii)
            out.append(entry)
        return {"releases": out}

    @classmethod
    def from_json(cls, obj: Mapping) -> "InputSequence":
        releases = []
        for entry in obj["releases"]:
            angles = tuple(float(a) for a in entry["angles"])
            radii = entry.get("radii")
            if radii is not None:
                radii = tuple(float(z) for z in radii)
                if len(radii) != len(angles):
                    raise ValueError("radii and angles lengths differ")
            releases.append(Release(float(entry["t"]), angles, radii))
        return cls(tuple(releases))


EMPTY_SEQUENCE = InputSequence(releases=())


@dataclass(frozen=True)
class Turning:
    """Turret mode: turning at direction * omega (direction in {-1, 0, +1})."""

    direction: int


@dataclass(frozen=True)
class SpoolingUp:
    """Turret mode: heading frozen until the capture completes."""

    target_id: int
    completion_time: float


@dataclass(frozen=True)
class TurretState:
    heading: float
    mode: Turning | SpoolingUp


@dataclass(frozen=True)
class Event:
    """One timestamped entry of the simulation log."""

    t: float
    kind: str  # release | turn | lock | capture | breach
    payload: Mapping[str, object]

    def json_line(self) -> str:
        return json.dumps({"t": self.t, "kind": self.kind, "payload": dict(self.payload)})


@dataclass(frozen=True)
class CaptureRecord:
    time: float
    radius: float


@dataclass(frozen=True)
class SimulationResult:
    """Outcome of one run: who was captured, who breached, and the log."""

    released: Mapping[int, Intruder]
    captured: Mapping[int, CaptureRecord]
    lost: Mapping[int, float]
    unresolved: tuple[int, ...]
    events: tuple[Event, ...]
    final_time: float

    @property
    def captured_ids(self) -> frozenset[int]:
        return frozenset(self.captured)

    @property
    def lost_ids(self) -> frozenset[int]:
        return frozenset(self.lost)

    def event_log_lines(self) -> list[str]:
        return [ev.json_line() for ev in self.events]

    def to_json(self) -> dict:
        return {
            "captured": [
                {"id": i, "time": rec.time, "radius": rec.radius}
                for i, rec in sorted(self.captured.items())
            ],
            "lost": [{"id": i, "time": t} for i, t in sorted(self.lost.items())],
            "unresolved": list(self.unresolved),
            "counts": {"captured": len(self.captured), "lost": len(self.lost)},
            "final_time": self.final_time,
        }
