"""Simulated annealing over batch assignments, started from the greedy plan."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import Batch, Matching
from .greedy import greedy_fill


@dataclass(frozen=True)
class SAParams:
    initial_temperature: float = 1.0
    cooling_rate: float = 0.95
    iterations_per_temperature: int = 50
    min_temperature: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not self.initial_temperature > 0 or not self.min_temperature > 0:
            raise ValueError("temperatures must be positive")
        if not 0 < self.cooling_rate < 1:
            raise ValueError("cooling_rate must lie in (0, 1)")
        if self.iterations_per_temperature < 0:
            raise ValueError("iterations_per_temperature must be >= 0")

    @property
    def temperature_steps(self):
        if self.initial_temperature <= self.min_temperature:
            return 0
        return math.ceil(math.log(self.min_temperature / self.initial_temperature)
                         / math.log(self.cooling_rate))

    @property
    def total_moves(self):
        return self.temperature_steps * self.iterations_per_temperature


def _perturb(state: Matching, rng):
    """Apply one random move in place.  Returns False if the move was impossible."""
    batch = state.batch
    op = int(rng.integers(3))
    assigned = [rid for rid, did in state.assigned.items() if did is not None]
    if op == 0:  # reassign
        if not assigned:
            return False
        rid = assigned[int(rng.integers(len(assigned)))]
        old = state.unassign(rid)
        return state.assign_random(batch.riders[rid], rng, exclude=(old,)) is not None
    if op == 1:  # unassign
        if not assigned:
            return False
        state.unassign(assigned[int(rng.integers(len(assigned)))])
        return True
    waiting = [rid for rid, did in state.assigned.items() if did is None]
    if not waiting:
        return False
    rid = waiting[int(rng.integers(len(waiting)))]
    return state.assign_random(batch.riders[rid], rng) is not None


def anneal(batch: Batch, params: SAParams, seed=None):
    """Run the annealing schedule; returns (best Matching, best-cost trace)."""
    rng = np.random.default_rng(params.seed if seed is None else seed)
    current = greedy_fill(Matching(batch), batch.pool)
    best = current.copy()
    trace = [best.cost]
    t = params.initial_temperature
    for _ in range(params.temperature_steps):
        for _ in range(params.iterations_per_temperature):
            cand = current.copy()
            if not _perturb(cand, rng):
                trace.append(best.cost)
                continue
            delta = cand.cost - current.cost
            if delta <= 0 or rng.random() < math.exp(-delta / t):
                current = cand
                if current.cost < best.cost:
                    best = current.copy()
            trace.append(best.cost)
        t *= params.cooling_rate
    return best, trace


def sa_match(pool, drivers, net, now, rng_seed=None, alpha=0.5, params: SAParams | None = None):
    params = params or SAParams()
    batch = Batch(pool, drivers, net, now, alpha)
    best, _ = anneal(batch, params, rng_seed)
    return best.to_plan()
