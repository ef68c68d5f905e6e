import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ridebbo.domain import (Driver, Rider, Schedule, Stop, StopKind, distance_overhead,
                            insert_rider, remove_rider, rider_feasible_alone, validate_schedule)
from ridebbo.roadnet import grid_network

from conftest import line_network


def P(r):
    return Stop(r.origin, StopKind.PICKUP, r)


def D(r):
    return Stop(r.dest, StopKind.DROPOFF, r)


def sched(driver, *mid):
    return Schedule((Stop(driver.loc, StopKind.ORIGIN),) + mid + (Stop(driver.dest, StopKind.DEST),))


def kinds(verdict):
    return {v.kind for v in verdict.violations}


def test_rider_invariants():
    with pytest.raises(ValueError):
        Rider(1, 0, 0, 0, 10)
    with pytest.raises(ValueError):
        Rider(1, 0, 1, 10, 5)
    assert Rider(1, 0, 1, 7, 9).request == 7


def test_driver_alone_is_feasible(abc):
    d = Driver(1, 0, 2, 0, 10, speed=1.0)
    assert validate_schedule(d, d.schedule, abc, 0).ok
    late = Driver(1, 0, 2, 0, 4, speed=1.0)
    assert kinds(validate_schedule(late, late.schedule, abc, 0)) == {"driver_deadline"}


def test_expired_window(abc):
    d = Driver(1, 0, 2, 0, 100, speed=1.0)
    r = Rider(9, 1, 2, 0, 4)
    assert "window_closed" in kinds(validate_schedule(d, sched(d, P(r), D(r)), abc, now=10))


def test_hand_simulated_late_dropoff(abc):
    # reach B at t=2, C at t=5 > r_l=4
    d = Driver(1, 0, 2, 0, 20, speed=1.0)
    r = Rider(9, 1, 2, 0, 4)
    v = validate_schedule(d, sched(d, P(r), D(r)), abc, 0)
    assert kinds(v) == {"late_dropoff"}
    assert v.stop_times == (0.0, 2.0, 5.0, 5.0)


def test_waits_at_pickup_until_early_time(abc):
    d = Driver(1, 0, 2, 0, 20, speed=1.0)
    r = Rider(9, 1, 2, 6, 9)
    v = validate_schedule(d, sched(d, P(r), D(r)), abc, 0)
    assert v.ok and v.stop_times == (0.0, 6.0, 9.0, 9.0)


def test_capacity_counts_assigned_riders(abc):
    d = Driver(1, 0, 2, 0, 100, capacity=1, speed=1.0)
    a, b = Rider(8, 0, 1, 0, 50), Rider(9, 1, 2, 0, 50)
    # never two on board at once, but two assigned exceeds a one-seat load
    assert "capacity" in kinds(validate_schedule(d, sched(d, P(a), D(a), P(b), D(b)), abc, 0))


def test_structure_errors(abc):
    d = Driver(1, 0, 2, 0, 100, speed=1.0)
    r = Rider(9, 1, 2, 0, 50)
    assert kinds(validate_schedule(d, sched(d, D(r), P(r)), abc, 0)) == {"structure"}
    assert kinds(validate_schedule(d, sched(d, P(r)), abc, 0)) == {"structure"}


def test_insert_into_empty_schedule(grid):
    d = Driver(1, 0, 35, 0, 10_000)
    r = Rider(9, 8, 20, 0, 10_000)
    ins = insert_rider(d, r, grid, 0)
    assert [s.vertex for s in ins.schedule.stops] == [0, 8, 20, 35]
    expected = (grid.distance(0, 8) + grid.distance(8, 20) + grid.distance(20, 35)
                - grid.distance(0, 35))
    assert math.isclose(ins.added_distance, expected, rel_tol=1e-9, abs_tol=1e-9)


def test_coincident_itinerary_adds_nothing(grid):
    d = Driver(1, 4, 30, 0, 10_000)
    ins = insert_rider(d, Rider(9, 4, 30, 0, 10_000), grid, 0)
    assert ins.added_distance == 0.0


def test_infeasible_insertion_is_none(abc):
    d = Driver(1, 0, 2, 0, 100, speed=1.0)
    assert insert_rider(d, Rider(9, 1, 2, 0, 4), abc, 0) is None
    full = Driver(2, 0, 2, 0, 100, capacity=0, speed=1.0)
    assert insert_rider(full, Rider(9, 1, 2, 0, 100), abc, 0) is None


def brute_force_insertion(driver, rider, net, now):
    stops = driver.schedule.stops
    best = None
    for i in range(len(stops) - 1):
        for j in range(i, len(stops) - 1):
            new = stops[:i + 1] + (P(rider),) + stops[i + 1:j + 1] + (D(rider),) + stops[j + 1:]
            s = Schedule(new)
            if validate_schedule(driver, s, net, now).ok:
                dist = net.schedule_distance(s.vertices)
                if best is None or dist < best - 1e-9:
                    best = dist
    return best


def test_best_insertion_matches_enumeration_on_path():
    net = line_network((4.0, 1.0, 6.0))
    d = Driver(1, 0, 3, 0, 100, speed=1.0)
    first = Rider(8, 2, 1, 0, 100)
    d = d.with_schedule(insert_rider(d, first, net, 0).schedule)
    for o, t in itertools.permutations(range(4), 2):
        r = Rider(9, o, t, 0, 100)
        ins = insert_rider(d, r, net, 0)
        best = brute_force_insertion(d, r, net, 0)
        if best is None:
            assert ins is None
        else:
            assert math.isclose(net.schedule_distance(ins.schedule.vertices), best)


@pytest.mark.parametrize("trip, expected", [(None, 0.0), ((1, 2), 0.0), ((2, 0), 10.0)])
def test_distance_overhead(abc, trip, expected):
    d = Driver(1, 0, 2, 0, 100)
    if trip is not None:
        r = Rider(9, *trip, 0, 100)
        d = d.with_schedule(sched(d, P(r), D(r)))
    assert distance_overhead(d, abc) == expected


def test_rider_feasible_alone(abc):
    assert rider_feasible_alone(Rider(1, 0, 2, 0, 5), abc, 1.0)
    assert not rider_feasible_alone(Rider(1, 0, 2, 0, 4.9), abc, 1.0)


FUZZ_NET = grid_network(5, 100.0, rng=np.random.default_rng(11), jitter=0.5)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
def test_insertion_properties(seed, capacity):
    net = FUZZ_NET
    rng = np.random.default_rng(seed)
    o, t = (int(x) for x in rng.choice(25, size=2, replace=False))
    d = Driver(1, o, t, 0, math.ceil(3 * net.distance(o, t) / 10), capacity=capacity)
    for k in range(6):
        ro, rd = (int(x) for x in rng.choice(25, size=2, replace=False))
        r = Rider(100 + k, ro, rd, int(rng.integers(0, 60)), int(rng.integers(60, 400)))
        before = net.schedule_distance(d.schedule.vertices)
        ins = insert_rider(d, r, net, 0)
        if ins is None:
            continue
        assert validate_schedule(d, ins.schedule, net, 0).ok
        after = net.schedule_distance(ins.schedule.vertices)
        assert ins.added_distance >= -1e-9
        assert math.isclose(ins.added_distance, after - before, abs_tol=1e-9)
        grown = d.with_schedule(ins.schedule)
        assert math.isclose(net.schedule_distance(remove_rider(grown, r.id).schedule.vertices),
                            before, abs_tol=1e-9)
        d = grown
        assert d.load <= d.capacity
