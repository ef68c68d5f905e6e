"""Problem instances: record format, file I/O and the synthetic generator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..domain import DEFAULT_SPEED, Driver, Rider
from ..roadnet import RoadNetwork, Unreachable


class InstanceError(ValueError):
    pass


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class InstanceRecord:
    """One line of an instance file.  Negative load marks a driver (|load| seats)."""

    id: int
    origin: int
    destination: int
    early: float
    late: float
    load: int

    def __post_init__(self):
        if self.load == 0:
            raise InstanceError(f"record {self.id}: load 0 is neither driver nor rider")
        if self.early > self.late:
            raise InstanceError(f"record {self.id}: early {self.early} after late {self.late}")

    @property
    def is_driver(self):
        return self.load < 0

    @property
    def capacity(self):
        return -self.load if self.load < 0 else 0

    def line(self):
        return f"{self.id} {self.origin} {self.destination} {_fmt(self.early)} {_fmt(self.late)} {self.load}"


def _fmt(t):
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def _num(tok):
    x = float(tok)
    return int(x) if x.is_integer() else x


@dataclass
class Instance:
    records: list = field(default_factory=list)

    def riders(self):
        return [Rider(r.id, r.origin, r.destination, r.early, r.late)
                for r in self.records if not r.is_driver]

    def drivers(self, speed=DEFAULT_SPEED):
        return [Driver(r.id, r.origin, r.destination, r.early, r.late, capacity=r.capacity, speed=speed)
                for r in self.records if r.is_driver]

    @property
    def rider_count(self):
        return sum(1 for r in self.records if not r.is_driver)

    @property
    def driver_count(self):
        return sum(1 for r in self.records if r.is_driver)

    def validate(self, net: RoadNetwork | None = None):
        seen = set()
        for r in self.records:
            if r.id in seen:
                raise InstanceError(f"duplicate record id {r.id}")
            seen.add(r.id)
            if net is not None:
                for v in (r.origin, r.destination):
                    if v not in net:
                        raise InstanceError(f"record {r.id}: unknown vertex {v}")
            if not r.is_driver and r.origin == r.destination:
                raise InstanceError(f"record {r.id}: rider origin equals destination")
        return self


def parse_instance(lines) -> Instance:
    recs = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 6:
            raise InstanceError(f"line {lineno}: expected 6 fields, got {len(parts)}")
        try:
            rid, o, d, load = int(parts[0]), int(parts[1]), int(parts[2]), int(parts[5])
            early, late = _num(parts[3]), _num(parts[4])
        except ValueError as exc:
            raise InstanceError(f"line {lineno}: {exc}") from exc
        if load > 1:
            raise InstanceError(f"line {lineno}: rider load {load} unsupported (single-seat riders only)")
        try:
            recs.append(InstanceRecord(rid, o, d, early, late, load))
        except InstanceError as exc:
            raise InstanceError(f"line {lineno}: {exc}") from exc
    inst = Instance(recs)
    try:
        inst.validate()
    except InstanceError as exc:
        raise InstanceError(f"{exc}") from exc
    return inst


def load_instance(path, net: RoadNetwork | None = None) -> Instance:
    inst = parse_instance(Path(path).read_text(encoding="utf-8").splitlines())
    return inst.validate(net) if net is not None else inst


def save_instance(inst: Instance, path, header=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# id origin destination early late load\n")
        if header:
            fh.write(f"# {header}\n")
        for r in inst.records:
            fh.write(r.line() + "\n")


@dataclass(frozen=True)
class GenParams:
    driver_count: int
    rider_count: int
    horizon_seconds: int = 1800
    capacity: int = 3
    driver_slack: float = 2.0
    rider_slack: float = 2.0
    speed: float = DEFAULT_SPEED
    profile: str = "uniform"  # or "batched"
    batch_seconds: int = 30
    initial_driver_fraction: float = 0.11
    rate_multiplier: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.driver_count < 0 or self.rider_count < 0:
            raise ValueError("counts must be >= 0")
        if self.driver_slack < 1 or self.rider_slack < 1:
            raise ValueError("slack factors must be >= 1")
        if self.profile not in ("uniform", "batched"):
            raise ValueError(f"unknown arrival profile {self.profile!r}")
        if self.horizon_seconds % self.batch_seconds:
            raise ValueError("horizon_seconds must be a multiple of batch_seconds")

    @property
    def effective_riders(self):
        return int(round(self.rider_count * self.rate_multiplier))


def _fill(total, groups, first=None):
    """Split ``total`` into ``groups`` counts: an optional fixed first group,
    then equal ceil-sized groups, the last one taking the remainder."""
    counts = [0] * groups
    left = total
    start = 0
    if first is not None and groups:
        counts[0] = min(first, left)
        left -= counts[0]
        start = 1
    if groups - start <= 0:
        return counts
    per = math.ceil(left / (groups - start)) if left else 0
    for g in range(start, groups):
        counts[g] = min(per, left)
        left -= counts[g]
    return counts


def arrival_counts(p: GenParams):
    """Per-group (riders, drivers) for the batched profile.

    There are ``horizon / batch + 1`` arrival groups: one per batch window plus
    a final group arriving exactly at the horizon, which the last batch
    boundary picks up.
    """
    n_groups = p.horizon_seconds // p.batch_seconds + 1
    riders = _fill(p.effective_riders, n_groups, first=None)
    first = int(round(p.driver_count * p.initial_driver_fraction))
    drivers = _fill(p.driver_count, n_groups, first=first)
    return riders, drivers


def _arrival_times(counts, p: GenParams, rng):
    times = []
    last = len(counts) - 1
    for g, c in enumerate(counts):
        if g == last:
            times.extend([p.horizon_seconds] * c)
        else:
            lo = g * p.batch_seconds
            times.extend(int(t) for t in rng.integers(lo, lo + p.batch_seconds, size=c))
    return times


def _sample_od(net: RoadNetwork, vertices, rng, tries=1000):
    for _ in range(tries):
        i, j = rng.choice(len(vertices), size=2, replace=False)
        o, d = vertices[int(i)], vertices[int(j)]
        try:
            dist = net.distance(o, d)
        except Unreachable:
            continue
        return o, d, dist
    raise GenerationError("no reachable origin/destination pair found")


def generate(net: RoadNetwork, p: GenParams, rng=None) -> Instance:
    """Random drivers and riders on ``net`` following ``p``."""
    rng = rng if rng is not None else np.random.default_rng(p.seed)
    vertices = net.vertices()
    if len(vertices) < 2:
        raise GenerationError("network needs at least two vertices")
    n_riders = p.effective_riders
    if p.profile == "batched":
        rc, dc = arrival_counts(p)
        r_times = _arrival_times(rc, p, rng)
        d_times = _arrival_times(dc, p, rng)
    else:
        r_times = [int(t) for t in rng.integers(0, p.horizon_seconds, size=n_riders)]
        d_times = [int(t) for t in rng.integers(0, p.horizon_seconds, size=p.driver_count)]
    raw = []
    for t in d_times:
        o, d, dist = _sample_od(net, vertices, rng)
        raw.append((t, 0, o, d, math.ceil(t + p.driver_slack * dist / p.speed), -p.capacity))
    for t in r_times:
        o, d, dist = _sample_od(net, vertices, rng)
        raw.append((t, 1, o, d, math.ceil(t + p.rider_slack * dist / p.speed), 1))
    raw.sort(key=lambda x: (x[0], x[1]))
    recs = [InstanceRecord(i, o, d, t, late, load) for i, (t, _, o, d, late, load) in enumerate(raw)]
    return Instance(recs)
