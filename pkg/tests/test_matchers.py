import math

import pytest

from ridebbo.domain import Driver, Rider
from ridebbo.matchers import (MATCHER_NAMES, Batch, Matching, SAParams, anneal, check_plan,
                              greedy_match, match, nn_match, sa_match)
from ridebbo.matchers.greedy import greedy_fill
from ridebbo.roadnet import load_network

from conftest import line_network, nontrivial_micro, random_batch

BIG = 10**6


@pytest.mark.parametrize("name", MATCHER_NAMES)
def test_empty_pool(name, grid):
    plan = match(name, [], [Driver(1, 0, 35, 0, BIG)], grid, 0)
    assert plan.assignments == () and plan.unmatched == ()


@pytest.mark.parametrize("name", MATCHER_NAMES)
def test_no_feasible_driver(name, grid):
    plan = match(name, [Rider(9, 0, 35, 0, 1)], [Driver(1, 0, 35, 0, BIG)], grid, 0)
    assert plan.unmatched == (9,)


@pytest.mark.parametrize("name", MATCHER_NAMES)
def test_coincident_trip(name, grid):
    plan = match(name, [Rider(9, 3, 33, 0, BIG)], [Driver(1, 3, 33, 0, BIG)], grid, 0)
    assert plan.rider_to_driver() == {9: 1}
    assert plan.cost == 0.0


def test_unknown_matcher(grid):
    with pytest.raises(ValueError):
        match("tshare", [], [], grid, 0)


def test_greedy_fcfs_single_seat(abc):
    d = Driver(1, 0, 2, 0, BIG, capacity=1, speed=1.0)
    first, second = Rider(5, 0, 2, 3, BIG), Rider(4, 0, 2, 7, BIG)
    plan = greedy_match([second, first], [d], abc, 0)
    assert plan.rider_to_driver() == {5: 1} and plan.unmatched == (4,)


def test_greedy_picks_least_added_distance():
    # path 0-1-2-3-4; rider 2->3; driver 10 (0->1) adds 7, driver 11 (4->3) adds 3
    net = line_network((1.0, 2.0, 1.5, 1.0))
    r = Rider(9, 2, 3, 0, BIG)
    x, y = Driver(10, 0, 1, 0, BIG, speed=1.0), Driver(11, 4, 3, 0, BIG, speed=1.0)
    state = Matching(Batch([r], [x, y], net, 0))
    assert [state.try_insert(r, d).added_distance for d in (10, 11)] == [7.0, 3.0]
    assert greedy_match([r], [x, y], net, 0).rider_to_driver() == {9: 11}


def test_greedy_tie_goes_to_lower_id(grid):
    r = Rider(9, 3, 33, 0, BIG)
    plan = greedy_match([r], [Driver(5, 3, 33, 0, BIG), Driver(2, 3, 33, 0, BIG)], grid, 0)
    assert plan.rider_to_driver() == {9: 2}


@pytest.fixture
def inverted():
    """Driver 1 sits 11 m from the pickup by air but 1 km by road; driver 2 is
    111 m away by air and 120 m by road."""
    nodes = [(0, 39.9, 116.4), (1, 39.9001, 116.4), (2, 39.901, 116.4), (3, 39.91, 116.4)]
    edges = [(1, 0, 1000.0), (2, 0, 120.0), (0, 3, 1200.0), (1, 3, 1250.0), (2, 3, 1000.0)]
    net = load_network(nodes, edges)
    drivers = [Driver(1, 1, 3, 0, BIG), Driver(2, 2, 3, 0, BIG)]
    return net, drivers, Rider(9, 0, 3, 0, BIG)


def test_nn_differs_from_greedy(inverted):
    net, drivers, r = inverted
    assert net.euclidean(1, 0) < net.euclidean(2, 0)
    assert nn_match([r], drivers, net, 0).rider_to_driver() == {9: 1}
    assert greedy_match([r], drivers, net, 0).rider_to_driver() == {9: 2}


def test_nn_skips_full_nearest(inverted):
    net, drivers, r = inverted
    full = Driver(1, 1, 3, 0, BIG, capacity=0)
    assert nn_match([r], [full, drivers[1]], net, 0).rider_to_driver() == {9: 2}


def test_nn_all_infeasible(inverted):
    net, _, r = inverted
    assert nn_match([r], [Driver(1, 1, 3, 0, BIG, capacity=0)], net, 0).unmatched == (9,)


@pytest.mark.parametrize("name", MATCHER_NAMES)
@pytest.mark.parametrize("seed", range(5))
def test_plans_are_valid(name, seed):
    net, drivers, riders = random_batch(seed)
    plan = match(name, riders, drivers, net, 0, rng_seed=seed)
    assert check_plan(plan, riders, drivers, net, 0) == []
    by_id = {d.id: d for d in drivers}
    for did, sched in plan.schedules().items():
        assert len(sched.rider_ids()) <= by_id[did].capacity


def test_greedy_is_seed_independent():
    net, drivers, riders = random_batch(3)
    plans = {greedy_match(riders, drivers, net, 0, rng_seed=s) for s in range(4)}
    assert len(plans) == 1


def test_sa_zero_budget_returns_greedy():
    net, drivers, riders = random_batch(2)
    params = SAParams(iterations_per_temperature=0)
    assert sa_match(riders, drivers, net, 0, 7, params=params) == greedy_match(riders, drivers, net, 0)


def test_sa_trace_is_nonincreasing_and_beats_start():
    net, drivers, riders = random_batch(4)
    batch = Batch(riders, drivers, net, 0)
    start = greedy_fill(Matching(batch), batch.pool).cost
    best, trace = anneal(batch, SAParams(), seed=1)
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert best.cost <= start and trace[0] == start
    assert math.isclose(best.cost, best.recompute_cost(), abs_tol=1e-12)


def test_sa_default_schedule_size():
    p = SAParams()
    assert p.temperature_steps == 135 and p.total_moves == 6750


def test_sa_reaches_optimum_with_large_budget():
    net, drivers, riders, opt = nontrivial_micro()
    params = SAParams(iterations_per_temperature=75)  # 135 * 75 ~ 10^4 moves
    hits = sum(sa_match(riders, drivers, net, 0, seed, params=params).cost <= opt + 1e-9
               for seed in range(20))
    assert hits >= 18
