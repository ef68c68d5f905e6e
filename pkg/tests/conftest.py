import math

import numpy as np
import pytest

from ridebbo.domain import Driver, Rider
from ridebbo.matchers import greedy_match
from ridebbo.roadnet import grid_network, load_network

from oracles import brute_force_cost, micro_instance


def line_network(weights=(2.0, 3.0), config=None):
    """Path graph 0-1-2-... with the given edge weights."""
    n = len(weights) + 1
    nodes = [(i, 39.9, 116.4 + 0.001 * i) for i in range(n)]
    edges = [(i, i + 1, w) for i, w in enumerate(weights)]
    return load_network(nodes, edges, config)


@pytest.fixture
def abc():
    """Line graph A(0) - B(1) - C(2) with weights 2 and 3."""
    return line_network()


@pytest.fixture
def grid():
    return grid_network(6, 100.0, rng=np.random.default_rng(3), jitter=0.4)


def random_batch(seed, n_drivers=6, n_riders=12):
    rng = np.random.default_rng(seed)
    net = grid_network(7, 150.0, rng=rng, jitter=0.3)
    n = net.n_vertices

    def od():
        return (int(x) for x in rng.choice(n, size=2, replace=False))

    drivers = []
    for k in range(n_drivers):
        o, t = od()
        drivers.append(Driver(k, o, t, 0, math.ceil(2 * net.distance(o, t) / 10),
                              capacity=int(rng.integers(1, 4))))
    riders = []
    for k in range(n_riders):
        o, t = od()
        e = int(rng.integers(0, 40))
        riders.append(Rider(100 + k, o, t, e, e + math.ceil(2 * net.distance(o, t) / 10)))
    return net, drivers, riders


def nontrivial_micro(limit=40):
    for seed in range(limit):
        net, drivers, riders = micro_instance(seed)
        opt = brute_force_cost(riders, drivers, net, 0, 0.5)
        if greedy_match(riders, drivers, net, 0).cost > opt + 1e-9:
            return net, drivers, riders, opt
    pytest.skip("no micro instance where greedy is suboptimal")
