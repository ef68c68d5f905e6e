"""Discrete-time world loop with batch (rolling-horizon) matching.

Vehicles move along a precomputed timeline: one waypoint per traversed
vertex, arrival times accumulated leg by leg exactly as
:func:`~ridebbo.domain.validate_schedule` does, so a committed plan is
executed with the same times the validator approved.  The clock advances in
whole ticks; stop events carry their exact fractional timestamps.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, is_dataclass

import numpy as np

from .bbo import BBOConfig
from .domain import (Driver, RiderState, Schedule, Stop, StopKind, rider_feasible_alone,
                     start_time)
from .matchers import MATCHER_NAMES, check_plan, match
from .matchers.sa import SAParams
from .metrics import CostParams, MetricsSnapshot, cost
from .roadnet import RoadNetwork

log = logging.getLogger(__name__)

#: Slack (s) when checking that executed times honour committed windows.
TIME_EPS = 1e-6


class SimulationDefect(RuntimeError):
    """A committed rider or driver deadline was broken during execution."""


@dataclass(frozen=True)
class SimConfig:
    batch_seconds: int = 30
    tick_seconds: int = 1
    horizon_seconds: int = 1800
    matcher: str = "bbo"
    matcher_config: object = None
    alpha: float = 0.5
    seed: int = 0
    speed: float = 10.0
    check_plans: bool = False

    def __post_init__(self):
        if self.tick_seconds <= 0 or self.batch_seconds <= 0:
            raise ValueError("tick_seconds and batch_seconds must be positive")
        if self.batch_seconds % self.tick_seconds:
            raise ValueError("batch_seconds must be a multiple of tick_seconds")
        if self.horizon_seconds % self.batch_seconds:
            raise ValueError("horizon_seconds must be a multiple of batch_seconds")
        if self.matcher not in MATCHER_NAMES:
            raise ValueError(f"unknown matcher {self.matcher!r}")
        CostParams(self.alpha)

    def echo(self):
        d = {k: getattr(self, k) for k in ("batch_seconds", "tick_seconds", "horizon_seconds",
                                           "matcher", "alpha", "seed", "speed")}
        mc = self.matcher_config
        d["matcher_config"] = asdict(mc) if is_dataclass(mc) else mc
        return d

    @property
    def n_batches(self):
        return self.horizon_seconds // self.batch_seconds


@dataclass
class Waypoint:
    vertex: int
    arrive: float
    depart: float
    cum: float  # trip meters from d_o when the vehicle is here
    stop: Stop | None = None

    @property
    def event_time(self):
        return self.depart if self.stop is not None and self.stop.kind is StopKind.PICKUP else self.arrive


def build_timeline(driver: Driver, net: RoadNetwork, t0):
    """Waypoints for the driver's schedule starting at its anchor at time t0."""
    stops = driver.schedule.stops
    wps = [Waypoint(driver.loc, t0, t0, driver.traveled)]
    t = t0
    cum = driver.traveled
    for prev, s in zip(stops, stops[1:]):
        path = net.msp(prev.vertex, s.vertex)
        leg_start, c = t, 0.0
        for a, b in zip(path.hops[:-1], path.hops[1:-1]):
            c += net.weight(a, b)
            wps.append(Waypoint(b, leg_start + c / driver.speed, leg_start + c / driver.speed, cum + c))
        t = leg_start + path.distance / driver.speed
        cum += path.distance
        arrive = t
        if s.kind is StopKind.PICKUP:
            t = max(t, s.rider.early)
        wps.append(Waypoint(s.vertex, arrive, t, cum, s))
    return wps


class Vehicle:
    """Sim-side state of one admitted driver."""

    def __init__(self, driver: Driver, net: RoadNetwork):
        self.driver = driver
        self.net = net
        self.base = net.distance(driver.origin, driver.dest)
        self.waypoints = None  # None while holding at d_o
        self.next = 0  # index of the first waypoint whose event has not fired
        self.onboard = 0
        self.done = False
        self.arrived_at = None
        self.latest_departure = driver.late - self.base / driver.speed

    @property
    def id(self):
        return self.driver.id

    @property
    def holding(self):
        return self.waypoints is None

    def planned_total(self):
        if self.waypoints is None:
            return self.base
        return self.waypoints[-1].cum

    def overhead(self):
        return max(0.0, self.planned_total() - self.base)

    def odometer(self, t):
        """Meters driven from d_o by time t."""
        wps = self.waypoints
        if wps is None:
            return self.driver.traveled
        if t <= wps[0].depart:
            return wps[0].cum
        for a, b in zip(wps, wps[1:]):
            if t <= a.depart:
                return a.cum
            if t < b.arrive:
                return a.cum + (b.cum - a.cum) * (t - a.depart) / (b.arrive - a.depart)
        return wps[-1].cum

    def depart(self, t0):
        """Leave d_o at t0 on the current schedule."""
        self.waypoints = build_timeline(self.driver, self.net, t0)
        self.next = 1

    def pending_events(self, until):
        """Pop waypoints whose event time is <= until, in route order."""
        out = []
        wps = self.waypoints
        if wps is None:
            return out
        while self.next < len(wps) and wps[self.next].event_time <= until:
            out.append(wps[self.next])
            self.next += 1
        return out

    def _anchor(self, now):
        """(waypoint index, time) from which a new plan may start at ``now``.

        Requires every event due by ``now`` to have fired already.
        """
        wps = self.waypoints
        passed = wps[self.next - 1]
        if self.next < len(wps) and wps[self.next].arrive <= now:
            return self.next, now  # waiting at a pickup for the rider's early time
        if passed.depart >= now:
            return self.next - 1, now
        return self.next, wps[self.next].arrive  # in transit

    def view(self, now) -> Driver:
        """Planning view at ``now``: anchor vertex, its time and pending stops."""
        d = self.driver
        if self.waypoints is None:
            return d
        a, loc_time = self._anchor(now)
        wps = self.waypoints
        pending = tuple(w.stop for w in wps[max(a, self.next):] if w.stop is not None)
        sched = Schedule((Stop(wps[a].vertex, StopKind.ORIGIN),) + pending)
        return Driver(d.id, d.origin, d.dest, d.early, d.late, d.capacity, d.speed,
                      loc=wps[a].vertex, loc_time=loc_time, schedule=sched, traveled=wps[a].cum)

    def commit(self, planned: Driver, now):
        """Adopt a plan computed from :meth:`view` at the same ``now``."""
        tail = build_timeline(planned, self.net, start_time(planned, now))
        self.driver = planned
        if self.waypoints is None:
            self.waypoints = tail
            self.next = 1
            return
        a, _ = self._anchor(now)
        old = self.waypoints[a]
        tail[0] = Waypoint(old.vertex, old.arrive, tail[0].depart, old.cum)
        self.waypoints = self.waypoints[:a] + tail
        self.next = a


@dataclass
class WorldState:
    clock: int = 0
    vehicles: dict = field(default_factory=dict)  # driver id -> Vehicle (admitted)
    states: dict = field(default_factory=dict)  # rider id -> RiderState (admitted)
    riders: dict = field(default_factory=dict)  # rider id -> Rider (admitted)
    match_time: dict = field(default_factory=dict)
    assigned_driver: dict = field(default_factory=dict)
    dropoff_time: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    defects: list = field(default_factory=list)

    def in_state(self, state):
        return sorted(rid for rid, s in self.states.items() if s is state)

    @property
    def pool(self):
        return [self.riders[rid] for rid in self.in_state(RiderState.WAITING)]

    def active_drivers(self):
        return [v for _, v in sorted(self.vehicles.items()) if not v.done]

    def log(self, t, kind, rider=None, driver=None):
        r = "-" if rider is None else rider
        d = "-" if driver is None else driver
        self.events.append(f"t={t:.3f} kind={kind} rider={r} driver={d}")

    def counts(self):
        out = {s.value: 0 for s in RiderState}
        for s in self.states.values():
            out[s.value] += 1
        return out


def _fire(world: WorldState, veh: Vehicle, wp: Waypoint):
    s = wp.stop
    if s is None:
        return
    t = wp.event_time
    if s.kind is StopKind.PICKUP:
        world.states[s.rider.id] = RiderState.ON_BOARD
        veh.onboard += 1
        world.log(t, "pickup", s.rider.id, veh.id)
    elif s.kind is StopKind.DROPOFF:
        world.states[s.rider.id] = RiderState.DELIVERED
        world.dropoff_time[s.rider.id] = t
        veh.onboard -= 1
        world.log(t, "dropoff", s.rider.id, veh.id)
        if t > s.rider.late + TIME_EPS:
            world.defects.append(f"rider {s.rider.id} dropped at {t} after late time {s.rider.late}")
    elif s.kind is StopKind.DEST:
        veh.done = True
        veh.arrived_at = t
        if t > veh.driver.late + TIME_EPS:
            world.defects.append(f"driver {veh.id} arrived at {t} after deadline {veh.driver.late}")


def advance_tick(world: WorldState, net: RoadNetwork, tick=1, until=None) -> WorldState:
    """Move every vehicle forward one tick and fire due stop events in time order."""
    world.clock += tick
    now = world.clock if until is None else until
    for veh in world.vehicles.values():
        if veh.holding and now >= math.floor(veh.latest_departure):
            # unmatched driver must leave now to make its own deadline
            veh.depart(max(veh.driver.early, math.floor(veh.latest_departure)))
    due = []
    for did, veh in sorted(world.vehicles.items()):
        for seq, wp in enumerate(veh.pending_events(now)):
            due.append((wp.event_time, did, seq, veh, wp))
    due.sort(key=lambda e: e[:3])
    for _, _, _, veh, wp in due:
        _fire(world, veh, wp)
    return world


@dataclass
class BatchRecord:
    index: int
    clock: int
    snapshot: MetricsSnapshot
    plan_cost: float | None
    wall_seconds: float


@dataclass
class SimReport:
    matcher: str
    config: dict
    batches: list
    cumulative: MetricsSnapshot
    counts: dict
    defects: list
    events: list = field(default_factory=list, repr=False)
    drivers: list = field(default_factory=list, repr=False)

    @property
    def wall_seconds(self):
        return [b.wall_seconds for b in self.batches]

    def to_dict(self, include_timing=False):
        alpha = self.config.get("alpha", 0.5)
        out = {
            "matcher": self.matcher,
            "config": self.config,
            "cumulative": self.cumulative.to_dict(alpha),
            "counts": self.counts,
            "defects": self.defects,
            "drivers": self.drivers,
            "batches": [],
        }
        for b in self.batches:
            row = {"index": b.index, "clock": b.clock, "plan_cost": b.plan_cost}
            row.update(b.snapshot.to_dict(alpha))
            if include_timing:
                row["wall_seconds"] = b.wall_seconds
            out["batches"].append(row)
        return out


def batch_seed(seed, index):
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, index]).generate_state(1)[0])


def _matcher_config(cfg: SimConfig):
    mc = cfg.matcher_config
    if cfg.matcher == "bbo":
        return mc if isinstance(mc, BBOConfig) else BBOConfig(**(mc or {}))
    if cfg.matcher == "sa":
        return mc if isinstance(mc, SAParams) else SAParams(**(mc or {}))
    return None


def run(instance, cfg: SimConfig, net: RoadNetwork) -> SimReport:
    """Simulate the instance under ``cfg`` and return the report.

    ``instance`` is anything with ``riders()`` and ``drivers(speed)`` methods
    (see :class:`ridebbo.harness.instance.Instance`), or a ``(riders,
    drivers)`` pair of domain objects.
    """
    if isinstance(instance, tuple):
        all_riders, all_drivers = instance
    else:
        all_riders, all_drivers = instance.riders(), instance.drivers(cfg.speed)
    riders = sorted(all_riders, key=lambda r: (r.request, r.id))
    drivers = sorted(all_drivers, key=lambda d: (d.early, d.id))
    mconf = _matcher_config(cfg)
    world = WorldState()
    ri = di = 0
    batches = []

    def admit(now):
        nonlocal ri, di
        while di < len(drivers) and drivers[di].early <= now:
            d = drivers[di]
            world.vehicles[d.id] = Vehicle(d, net)
            di += 1
        while ri < len(riders) and riders[ri].request <= now:
            r = riders[ri]
            world.riders[r.id] = r
            world.log(r.request, "arrival", r.id)
            if rider_feasible_alone(r, net, cfg.speed):
                world.states[r.id] = RiderState.WAITING
            else:
                world.states[r.id] = RiderState.EXPIRED
                world.log(now, "expire", r.id)
            ri += 1

    def expire(now):
        for r in world.pool:
            if now + net.distance(r.origin, r.dest) / cfg.speed > r.late:
                world.states[r.id] = RiderState.EXPIRED
                world.log(now, "expire", r.id)

    admit(0)
    while world.clock < cfg.horizon_seconds:
        advance_tick(world, net, cfg.tick_seconds)
        now = world.clock
        admit(now)
        if now % cfg.batch_seconds:
            continue
        index = now // cfg.batch_seconds - 1
        expire(now)
        pool = world.pool
        vehicles = world.active_drivers()
        views = [v.view(now) for v in vehicles]
        t_start = time.perf_counter()
        plan = match(cfg.matcher, pool, views, net, now, batch_seed(cfg.seed, index), cfg.alpha, mconf)
        wall = time.perf_counter() - t_start
        if cfg.check_plans:
            problems = check_plan(plan, pool, views, net, now)
            if problems:
                raise SimulationDefect(f"batch {index}: {problems}")
        by_view = {d.id: d for d in views}
        for did, sched in sorted(plan.schedules().items()):
            world.vehicles[did].commit(by_view[did].with_schedule(sched), now)
        delays = []
        for a in plan.assignments:
            world.states[a.rider_id] = RiderState.MATCHED
            world.match_time[a.rider_id] = now
            world.assigned_driver[a.rider_id] = a.driver_id
            delays.append(now - world.riders[a.rider_id].request)
            world.log(now, "match", a.rider_id, a.driver_id)
        msp_sum = math.fsum(net.distance(r.origin, r.dest) for r in pool)
        active = world.active_drivers()
        snap = MetricsSnapshot(
            matched_count=len(plan.assignments),
            total_riders=len(pool),
            overhead_sum=math.fsum(v.overhead() for v in active),
            rider_msp_sum=msp_sum,
            matching_delays=tuple(delays),
            base_driver_distance=math.fsum(v.base for v in active),
            base_rider_distance=msp_sum,
            matched_trip_distance=math.fsum(v.planned_total() for v in active),
            driver_count=len(active),
        )
        batches.append(BatchRecord(index, now, snap, plan.cost, wall))
        log.debug("batch %d t=%d pool=%d matched=%d wall=%.3fs", index, now, len(pool),
                  len(plan.assignments), wall)

    for r in world.pool:
        world.states[r.id] = RiderState.EXPIRED
        world.log(world.clock, "expire", r.id)
    # drain: execute every committed stop; no further matching
    committed = (RiderState.MATCHED, RiderState.ON_BOARD)
    while any(s in committed for s in world.states.values()):
        advance_tick(world, net, 0, until=math.inf)
        if any(s in committed for s in world.states.values()):
            world.defects.append("committed riders left undelivered after drain")
            break

    return _report(world, cfg, net, riders, drivers, batches)


def _report(world, cfg, net, riders, drivers, batches):
    overheads, totals, bases, rows = [], [], [], []
    for d in drivers:
        veh = world.vehicles.get(d.id)
        base = net.distance(d.origin, d.dest)
        bases.append(base)
        totals.append(veh.planned_total() if veh else base)
        overheads.append(veh.overhead() if veh else 0.0)
        served = sorted(rid for rid, did in world.assigned_driver.items() if did == d.id)
        rows.append({"id": d.id, "base_distance": base, "trip_distance": totals[-1],
                     "overhead": overheads[-1], "riders": served})
    matched = sorted(world.match_time)
    rider_msp = math.fsum(net.distance(r.origin, r.dest) for r in riders)
    cum = MetricsSnapshot(
        matched_count=len(matched),
        total_riders=len(riders),
        overhead_sum=math.fsum(overheads),
        rider_msp_sum=rider_msp,
        matching_delays=tuple(world.match_time[rid] - world.riders[rid].request for rid in matched),
        base_driver_distance=math.fsum(bases),
        base_rider_distance=rider_msp,
        matched_trip_distance=math.fsum(totals),
        driver_count=len(drivers),
    )
    return SimReport(cfg.matcher, cfg.echo(), batches, cum, world.counts(), list(world.defects),
                     world.events, rows)


def report_cost(report: SimReport) -> float:
    return cost(CostParams(report.config["alpha"]), report.cumulative)
