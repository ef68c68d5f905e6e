"""Shared state for batch matchers.

A :class:`Batch` freezes everything a matcher may read for one optimization
call: the rider pool, the active drivers, the clock and the cost weights.
A :class:`Matching` is one complete assignment of pool riders to drivers on
top of that frozen state.  Drivers are immutable values, so copying a
Matching only copies two small dicts; this is what keeps candidate solutions
("virtual maps") isolated from each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..domain import (Driver, Insertion, Rider, Schedule, distance_overhead, insert_rider,
                      remove_rider, start_time, validate_schedule)
from ..metrics import cost_from_parts
from ..roadnet import RoadNetwork, Unreachable

_EPS = 1e-6


@dataclass(frozen=True)
class Assignment:
    rider_id: int
    driver_id: int
    schedule: Schedule


@dataclass(frozen=True)
class MatchPlan:
    """Result of one batch optimization.

    A driver serving several pool riders appears once per rider, always with
    the same (final) schedule.
    """

    assignments: tuple = ()
    unmatched: tuple = ()
    cost: float | None = None

    def schedules(self):
        return {a.driver_id: a.schedule for a in self.assignments}

    def rider_to_driver(self):
        return {a.rider_id: a.driver_id for a in self.assignments}

    @property
    def matched_ids(self):
        return [a.rider_id for a in self.assignments]

    def __len__(self):
        return len(self.assignments)


def fcfs_order(pool):
    return sorted(pool, key=lambda r: (r.request, r.id))


class Batch:
    """Read-only inputs of one matcher call plus per-batch precomputation."""

    def __init__(self, pool, drivers, net: RoadNetwork, now, alpha=0.5):
        self.net = net
        self.now = now
        self.alpha = alpha
        self.pool = fcfs_order(pool)
        self.riders = {r.id: r for r in self.pool}
        self.drivers = {d.id: d for d in sorted(drivers, key=lambda d: d.id)}
        self.driver_ids = list(self.drivers)
        self.rider_msp = {}
        for r in self.pool:
            try:
                self.rider_msp[r.id] = net.distance(r.origin, r.dest)
            except Unreachable:
                self.rider_msp[r.id] = None
        self.msp_sum = math.fsum(v for v in self.rider_msp.values() if v is not None)
        self.base_overhead = {did: distance_overhead(d, net) for did, d in self.drivers.items()}
        self.base_overhead_total = math.fsum(self.base_overhead.values())
        self.candidates = {r.id: self._prune(r) for r in self.pool}

    def _prune(self, r: Rider):
        """Drivers that pass necessary (lower-bound) feasibility tests for r."""
        trip = self.rider_msp[r.id]
        if trip is None or r.late < self.now:
            return []
        net = self.net
        out = []
        for did, d in self.drivers.items():
            if d.load >= d.capacity:
                continue
            t0 = start_time(d, self.now)
            reach = t0 + net.lower_bound(d.loc, r.origin) / d.speed
            drop = max(reach, r.early) + trip / d.speed
            if drop > r.late + _EPS:
                continue
            if drop + net.lower_bound(r.dest, d.dest) / d.speed > d.late + _EPS:
                continue
            out.append(did)
        return out

    def cost(self, overhead_total, matched):
        if not self.pool or self.msp_sum <= 0:
            return 0.0
        return cost_from_parts(self.alpha, overhead_total, self.msp_sum, matched, len(self.pool))


class Matching:
    """One assignment of the pool on top of a :class:`Batch`."""

    __slots__ = ("batch", "changed", "overhead", "assigned", "_cost", "tag")

    def __init__(self, batch: Batch):
        self.batch = batch
        self.changed = {}  # driver id -> Driver whose schedule differs from the batch's
        self.overhead = {}  # driver id -> overhead of the changed driver
        self.assigned = {r.id: None for r in batch.pool}
        self._cost = None
        self.tag = None

    # -- copying ------------------------------------------------------------

    def copy(self):
        m = Matching.__new__(Matching)
        m.batch = self.batch
        m.changed = dict(self.changed)
        m.overhead = dict(self.overhead)
        m.assigned = dict(self.assigned)
        m._cost = self._cost
        m.tag = self.tag
        return m

    def restore(self, other: "Matching"):
        self.changed = dict(other.changed)
        self.overhead = dict(other.overhead)
        self.assigned = dict(other.assigned)
        self._cost = other._cost

    def state_key(self):
        """Canonical, comparable form of the assignment state."""
        return (tuple(sorted(self.changed.items())), tuple(sorted(self.assigned.items())))

    def __eq__(self, other):
        return isinstance(other, Matching) and self.state_key() == other.state_key()

    __hash__ = None

    # -- queries ------------------------------------------------------------

    def driver(self, did) -> Driver:
        d = self.changed.get(did)
        return self.batch.drivers[did] if d is None else d

    def drivers(self):
        return [self.driver(did) for did in self.batch.driver_ids]

    def riders_of(self, did):
        """Pool riders on driver ``did`` in schedule order."""
        pool = self.batch.riders
        return [rid for rid in self.driver(did).schedule.rider_ids() if rid in pool]

    def assigned_to(self, did):
        """True if driver ``did`` carries at least one pool rider."""
        return did in self.changed and did in self.assigned.values()

    def matched_drivers(self):
        return sorted({did for did in self.assigned.values() if did is not None})

    @property
    def matched_count(self):
        return sum(1 for did in self.assigned.values() if did is not None)

    @property
    def cost(self):
        if self._cost is None:
            b = self.batch
            delta = math.fsum(ov - b.base_overhead[did] for did, ov in sorted(self.overhead.items()))
            self._cost = b.cost(b.base_overhead_total + delta, self.matched_count)
        return self._cost

    def recompute_cost(self):
        """Cost from scratch, bypassing the incremental bookkeeping."""
        b = self.batch
        total = math.fsum(distance_overhead(d, b.net) for d in self.drivers())
        return b.cost(total, self.matched_count)

    # -- mutation -------------------------------------------------------------

    def set_driver(self, did, driver: Driver):
        base = self.batch.drivers[did]
        if driver == base:
            self.changed.pop(did, None)
            self.overhead.pop(did, None)
        else:
            self.changed[did] = driver
            self.overhead[did] = distance_overhead(driver, self.batch.net)
        self._cost = None

    def try_insert(self, rider: Rider, did) -> Insertion | None:
        return insert_rider(self.driver(did), rider, self.batch.net, self.batch.now)

    def apply(self, rider: Rider, did, ins: Insertion):
        self.set_driver(did, self.driver(did).with_schedule(ins.schedule))
        self.assigned[rider.id] = did

    def unassign(self, rid):
        did = self.assigned.get(rid)
        if did is None:
            return None
        self.set_driver(did, remove_rider(self.driver(did), rid))
        self.assigned[rid] = None
        return did

    def best_insertion(self, rider: Rider, exclude=()):
        """(driver id, insertion) with minimum added distance; ties -> lower id."""
        best = None
        for did in self.batch.candidates[rider.id]:
            if did in exclude:
                continue
            ins = self.try_insert(rider, did)
            if ins is not None and (best is None or round(ins.added_distance, 6) < round(best[1].added_distance, 6)):
                best = (did, ins)
        return best

    def assign_greedy(self, rider: Rider, exclude=()):
        choice = self.best_insertion(rider, exclude)
        if choice is None:
            return None
        self.apply(rider, *choice)
        return choice[0]

    def assign_random(self, rider: Rider, rng, exclude=()):
        """Assign to a uniformly random feasible driver; None if there is none.

        Walking a random permutation of the candidate list and taking the
        first feasible driver is uniform over the feasible ones.
        """
        cands = [did for did in self.batch.candidates[rider.id] if did not in exclude]
        for i in rng.permutation(len(cands)):
            did = cands[int(i)]
            ins = self.try_insert(rider, did)
            if ins is not None:
                self.apply(rider, did, ins)
                return did
        return None

    # -- export ---------------------------------------------------------------

    def to_plan(self) -> MatchPlan:
        assignments, unmatched = [], []
        for r in self.batch.pool:
            did = self.assigned[r.id]
            if did is None:
                unmatched.append(r.id)
            else:
                assignments.append(Assignment(r.id, did, self.driver(did).schedule))
        return MatchPlan(tuple(assignments), tuple(unmatched), self.cost)

    def violations(self):
        """Every constraint violation across all drivers (empty when feasible)."""
        b = self.batch
        out = []
        for d in self.drivers():
            v = validate_schedule(d, d.schedule, b.net, b.now)
            out.extend((d.id, x) for x in v.violations)
        for rid, did in self.assigned.items():
            if did is not None and rid not in self.driver(did).schedule.rider_ids():
                out.append((did, ("bookkeeping", rid, "assigned rider missing from schedule")))
        return out


def check_plan(plan: MatchPlan, pool, drivers, net, now):
    """List of invariant breaches for a plan (empty when valid)."""
    problems = []
    pool_ids = [r.id for r in pool]
    seen = [a.rider_id for a in plan.assignments] + list(plan.unmatched)
    if sorted(seen) != sorted(pool_ids):
        problems.append("riders not partitioned between assignments and unmatched")
    by_id = {d.id: d for d in drivers}
    scheds = {}
    for a in plan.assignments:
        if a.driver_id in scheds and scheds[a.driver_id] != a.schedule:
            problems.append(f"driver {a.driver_id} has inconsistent schedules")
        scheds[a.driver_id] = a.schedule
        if a.rider_id not in a.schedule.rider_ids():
            problems.append(f"rider {a.rider_id} missing from driver {a.driver_id} schedule")
    for did, sched in scheds.items():
        v = validate_schedule(by_id[did], sched, net, now)
        if not v.ok:
            problems.append(f"driver {did}: {v.violations}")
    return problems
