"""First-come first-serve baselines: minimum-overhead greedy and nearest neighbour."""

from __future__ import annotations

import heapq

from .base import Batch, Matching


def greedy_fill(state: Matching, riders):
    for r in riders:
        state.assign_greedy(r)
    return state


def greedy_match(pool, drivers, net, now, rng_seed=None, alpha=0.5):
    """Assign each rider, in arrival order, to the feasible driver adding the least distance.

    ``rng_seed`` is accepted for interface uniformity and ignored.
    """
    batch = Batch(pool, drivers, net, now, alpha)
    return greedy_fill(Matching(batch), batch.pool).to_plan()


def nn_match(pool, drivers, net, now, rng_seed=None, alpha=0.5):
    """Walk drivers by straight-line distance to the pickup; first feasible one wins."""
    batch = Batch(pool, drivers, net, now, alpha)
    state = Matching(batch)
    for r in batch.pool:
        feasible = set(batch.candidates[r.id])
        queue = [(net.euclidean(state.driver(did).loc, r.origin), did) for did in batch.driver_ids]
        heapq.heapify(queue)
        while queue:
            _, did = heapq.heappop(queue)
            if did not in feasible:
                continue
            ins = state.try_insert(r, did)
            if ins is not None:
                state.apply(r, did, ins)
                break
    return state.to_plan()
