"""Riders, drivers, schedules and the feasibility rules that bind them."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .roadnet import RoadNetwork, Unreachable

#: Default fleet speed (m/s) when none is configured.
DEFAULT_SPEED = 10.0


class RiderState(enum.Enum):
    WAITING = "waiting"
    MATCHED = "matched"
    ON_BOARD = "on_board"
    DELIVERED = "delivered"
    EXPIRED = "expired"


class StopKind(enum.Enum):
    ORIGIN = "driver_origin"
    DEST = "driver_dest"
    PICKUP = "pickup"
    DROPOFF = "dropoff"


@dataclass(frozen=True)
class Rider:
    id: int
    origin: int
    dest: int
    early: float
    late: float
    request: float | None = None

    def __post_init__(self):
        if self.request is None:
            object.__setattr__(self, "request", self.early)
        if self.early > self.late:
            raise ValueError(f"rider {self.id}: early time {self.early} after late time {self.late}")
        if self.origin == self.dest:
            raise ValueError(f"rider {self.id}: origin equals destination")


@dataclass(frozen=True)
class Stop:
    vertex: int
    kind: StopKind
    rider: Rider | None = None

    def __post_init__(self):
        if self.kind in (StopKind.PICKUP, StopKind.DROPOFF) and self.rider is None:
            raise ValueError(f"{self.kind.value} stop needs a rider")

    @property
    def rider_id(self):
        return None if self.rider is None else self.rider.id

    def __repr__(self):
        if self.rider is None:
            return f"{self.kind.name}@{self.vertex}"
        return f"{self.kind.name}({self.rider.id})@{self.vertex}"


@dataclass(frozen=True)
class Schedule:
    """Ordered stops; the first is where the route starts, the last is d_d.

    Before a driver departs the first stop is its origin.  Once it is moving
    the first stop is its anchor: the next vertex it will be at.
    """

    stops: tuple

    @classmethod
    def direct(cls, start, dest):
        return cls((Stop(start, StopKind.ORIGIN), Stop(dest, StopKind.DEST)))

    @property
    def vertices(self):
        return [s.vertex for s in self.stops]

    def rider_ids(self):
        seen = []
        for s in self.stops:
            if s.rider is not None and s.rider.id not in seen:
                seen.append(s.rider.id)
        return seen

    def onboard_at_start(self):
        """Riders already in the vehicle: dropoff listed without a pickup."""
        picked = {s.rider.id for s in self.stops if s.kind is StopKind.PICKUP}
        return [s.rider.id for s in self.stops
                if s.kind is StopKind.DROPOFF and s.rider.id not in picked]

    def without_rider(self, rider_id):
        return Schedule(tuple(s for s in self.stops if s.rider_id != rider_id))

    def __len__(self):
        return len(self.stops)


@dataclass(frozen=True)
class Driver:
    id: int
    origin: int
    dest: int
    early: float
    late: float
    capacity: int = 3
    speed: float = DEFAULT_SPEED
    loc: int | None = None
    loc_time: float | None = None
    schedule: Schedule | None = None
    traveled: float = 0.0

    def __post_init__(self):
        if self.early > self.late:
            raise ValueError(f"driver {self.id}: early time {self.early} after late time {self.late}")
        if self.capacity < 0:
            raise ValueError(f"driver {self.id}: negative capacity")
        if not self.speed > 0:
            raise ValueError(f"driver {self.id}: speed must be positive")
        if self.loc is None:
            object.__setattr__(self, "loc", self.origin)
        if self.loc_time is None:
            object.__setattr__(self, "loc_time", self.early)
        if self.schedule is None:
            object.__setattr__(self, "schedule", Schedule.direct(self.loc, self.dest))

    @property
    def load(self):
        """Riders assigned to or riding in this vehicle (d_load)."""
        return len(self.schedule.rider_ids())

    def with_schedule(self, schedule: Schedule) -> "Driver":
        return replace(self, schedule=schedule)


class Violation(NamedTuple):
    kind: str
    rider: int | None
    detail: str


@dataclass(frozen=True)
class Verdict:
    violations: tuple = ()
    stop_times: tuple = field(default=(), compare=False)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok


class Insertion(NamedTuple):
    schedule: Schedule
    added_distance: float


def start_time(driver: Driver, now):
    return max(now, driver.early, driver.loc_time)


def structure_violations(driver: Driver, sched: Schedule):
    stops = sched.stops
    if len(stops) < 2:
        return [Violation("structure", None, "schedule needs a start and a destination")]
    out = []
    if stops[0].kind is not StopKind.ORIGIN or stops[0].vertex != driver.loc:
        out.append(Violation("structure", None, "first stop must be the driver's current location"))
    if stops[-1].kind is not StopKind.DEST or stops[-1].vertex != driver.dest:
        out.append(Violation("structure", None, "last stop must be the driver's destination"))
    onboard = set(sched.onboard_at_start())
    picked, dropped = set(), set()
    for s in stops[1:-1]:
        if s.kind is StopKind.PICKUP:
            if s.rider.id in picked or s.rider.id in dropped:
                out.append(Violation("structure", s.rider.id, "pickup repeated or after dropoff"))
            picked.add(s.rider.id)
        elif s.kind is StopKind.DROPOFF:
            if s.rider.id in dropped:
                out.append(Violation("structure", s.rider.id, "duplicate dropoff"))
            elif s.rider.id not in picked and s.rider.id not in onboard:
                out.append(Violation("structure", s.rider.id, "dropoff precedes pickup"))
            dropped.add(s.rider.id)
        else:
            out.append(Violation("structure", None, f"{s.kind.value} stop inside schedule"))
    for rid in sorted(picked - dropped):
        out.append(Violation("structure", rid, "pickup without dropoff"))
    return out


def validate_schedule(driver: Driver, sched: Schedule, net: RoadNetwork, now) -> Verdict:
    """Replay ``sched`` from the driver's location and collect every violation.

    Travel starts at ``max(now, d_e, loc_time)`` at constant speed; the
    vehicle waits at a pickup until the rider's early time.
    """
    out = structure_violations(driver, sched)
    if out:
        return Verdict(tuple(out))
    stops = sched.stops
    onboard = len(sched.onboard_at_start())
    load = len(sched.rider_ids())
    if load > driver.capacity:
        out.append(Violation("capacity", None, f"load {load} > capacity {driver.capacity}"))
    if onboard > driver.capacity:
        out.append(Violation("capacity", None, f"{onboard} on board > capacity {driver.capacity}"))
    t = start_time(driver, now)
    times = [t]
    for prev, s in zip(stops, stops[1:]):
        try:
            leg = net.distance(prev.vertex, s.vertex)
        except Unreachable:
            out.append(Violation("unreachable", s.rider_id, f"no path {prev.vertex} -> {s.vertex}"))
            return Verdict(tuple(out))
        t += leg / driver.speed
        if s.kind is StopKind.PICKUP:
            r = s.rider
            if r.late < now:
                out.append(Violation("window_closed", r.id, f"late time {r.late} already passed at {now}"))
            t = max(t, r.early)
            onboard += 1
            if onboard > driver.capacity:
                out.append(Violation("capacity", r.id, f"{onboard} on board > capacity {driver.capacity}"))
        elif s.kind is StopKind.DROPOFF:
            onboard -= 1
            if t > s.rider.late:
                out.append(Violation("late_dropoff", s.rider.id, f"dropoff at {t:.3f} > {s.rider.late}"))
        elif s.kind is StopKind.DEST and t > driver.late:
            out.append(Violation("driver_deadline", None, f"arrival at {t:.3f} > {driver.late}"))
        times.append(t)
    return Verdict(tuple(out), tuple(times))


def _feasible(driver: Driver, stops, net: RoadNetwork, now, onboard):
    """Fast boolean check of a structurally valid stop list."""
    t = start_time(driver, now)
    speed = driver.speed
    cap = driver.capacity
    dist = net.distance
    for prev, s in zip(stops, stops[1:]):
        t += dist(prev.vertex, s.vertex) / speed
        kind = s.kind
        if kind is StopKind.PICKUP:
            if t < s.rider.early:
                t = s.rider.early
            onboard += 1
            if onboard > cap:
                return False
        elif kind is StopKind.DROPOFF:
            if t > s.rider.late:
                return False
            onboard -= 1
        elif kind is StopKind.DEST:
            if t > driver.late:
                return False
    return True


def insert_rider(driver: Driver, rider: Rider, net: RoadNetwork, now) -> Insertion | None:
    """Cheapest feasible insertion of ``rider`` into the driver's schedule.

    Every (pickup, dropoff) position pair is scored by the distance it adds;
    candidates are validated cheapest first so the first feasible one wins.
    Ties go to the lower pickup index, then the lower dropoff index.
    Returns None when no position pair is feasible.
    """
    if driver.load + 1 > driver.capacity:
        return None
    if rider.late < now:
        return None
    stops = driver.schedule.stops
    n = len(stops)
    dist = net.distance
    try:
        reach = dist(driver.loc, rider.origin) + dist(rider.origin, rider.dest)
        if start_time(driver, now) + reach / driver.speed > rider.late + 1e-6:
            return None
        d_po = [dist(s.vertex, rider.origin) for s in stops]
        d_do = [dist(s.vertex, rider.dest) for s in stops]
        d_od = dist(rider.origin, rider.dest)
        legs = [dist(a.vertex, b.vertex) for a, b in zip(stops, stops[1:])]
    except Unreachable:
        return None
    pick = Stop(rider.origin, StopKind.PICKUP, rider)
    drop = Stop(rider.dest, StopKind.DROPOFF, rider)
    cands = []
    for i in range(n - 1):
        # pickup goes between stops[i] and stops[i + 1]
        pick_gain = d_po[i] + d_po[i + 1] - legs[i]
        for j in range(i, n - 1):
            if i == j:
                delta = d_po[i] + d_od + d_do[i + 1] - legs[i]
            else:
                delta = pick_gain + d_do[j] + d_do[j + 1] - legs[j]
            cands.append((round(delta, 6), i, j))
    cands.sort()
    onboard = len(driver.schedule.onboard_at_start())
    base = sum(legs)
    for _, i, j in cands:
        new = stops[:i + 1] + (pick,) + stops[i + 1:j + 1] + (drop,) + stops[j + 1:]
        if _feasible(driver, new, net, now, onboard):
            sched = Schedule(new)
            return Insertion(sched, net.schedule_distance(sched.vertices) - base)
    return None


def remove_rider(driver: Driver, rider_id) -> Driver:
    return driver.with_schedule(driver.schedule.without_rider(rider_id))


def distance_overhead(driver: Driver, net: RoadNetwork) -> float:
    """Planned trip length minus the driver's direct origin-destination MSP."""
    planned = driver.traveled + net.schedule_distance(driver.schedule.vertices)
    return max(0.0, planned - net.distance(driver.origin, driver.dest))


def trip_distance(driver: Driver, net: RoadNetwork) -> float:
    return driver.traveled + net.schedule_distance(driver.schedule.vertices)


def rider_feasible_alone(rider: Rider, net: RoadNetwork, speed) -> bool:
    """True iff a vehicle already at r_o at r_e could deliver before r_l."""
    try:
        return rider.early + net.distance(rider.origin, rider.dest) / speed <= rider.late
    except Unreachable:
        return False
