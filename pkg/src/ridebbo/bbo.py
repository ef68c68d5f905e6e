"""Biogeography-based optimization of one batch of ride requests.

Each island is a :class:`~ridebbo.matchers.base.Matching` (a virtual map).
Its features are the matched vehicles: a driver together with the pool riders
it carries.  Migration transplants an emigrant's version of a vehicle into the
immigrating island, greedily re-homes the riders it displaces and optionally
rolls the whole transplant back when one of them cannot be re-homed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .matchers.base import Batch, MatchPlan, Matching


@dataclass(frozen=True)
class BBOConfig:
    population_size: int = 20
    generation_limit: int = 10
    elite_count: int = 1
    hybrid_ratio: float = 0.85
    rollback: bool = True
    mutation_probability: float = 0.1
    alpha: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not 0 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must lie in [0, population_size)")
        if self.generation_limit < 1:
            raise ValueError("generation_limit must be >= 1")
        for name in ("hybrid_ratio", "mutation_probability", "alpha"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def random_count(self):
        """Islands built by random assignment; the rest are built greedily."""
        return math.ceil(self.population_size * self.hybrid_ratio - 1e-9)


@dataclass
class Candidate:
    state: Matching
    immigration: float = 0.0
    emigration: float = 0.0

    @property
    def cost(self):
        return self.state.cost

    def copy(self):
        return Candidate(self.state.copy(), self.immigration, self.emigration)


@dataclass
class Population:
    candidates: list
    generation: int = 0
    best: Candidate | None = None

    def __len__(self):
        return len(self.candidates)

    def ranking(self):
        """Candidate indices best-first; equal costs keep index order."""
        return sorted(range(len(self.candidates)), key=lambda i: (self.candidates[i].cost, i))

    def update_best(self):
        i = self.ranking()[0]
        if self.best is None or self.candidates[i].cost < self.best.cost:
            self.best = self.candidates[i].copy()
        return self.best


def candidate_rng(seed, index, generation):
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, index, generation])


def _rotated(pool, start):
    return pool[start:] + pool[:start]


def build_random(state: Matching, riders, rng):
    for r in riders:
        state.assign_random(r, rng)
    return state


def build_greedy(state: Matching, riders):
    for r in riders:
        state.assign_greedy(r)
    return state


def init_population(batch: Batch, cfg: BBOConfig, seed=None) -> Population:
    """N islands: ceil(N * hybrid_ratio) random-built, the rest greedy-built.

    Every island walks the pool from its own starting rider so that greedy
    islands differ from one another.
    """
    seed = cfg.seed if seed is None else seed
    n = cfg.population_size
    pool = batch.pool
    starts = []
    if pool:
        offsets = candidate_rng(seed, n, 0).permutation(len(pool))
        starts = [int(offsets[k % len(pool)]) for k in range(n)]
    cands = []
    for k in range(n):
        state = Matching(batch)
        riders = _rotated(pool, starts[k]) if pool else []
        if k < cfg.random_count:
            build_random(state, riders, candidate_rng(seed, k, 0))
            state.tag = "random"
        else:
            build_greedy(state, riders)
            state.tag = "greedy"
        cands.append(Candidate(state))
    pop = Population(cands)
    pop.update_best()
    return pop


def compute_rates(pop: Population) -> Population:
    """Linear rank-based rates: rank i (best = 1) emigrates with (N - i + 1) / (N + 1)."""
    n = len(pop)
    for rank, i in enumerate(pop.ranking(), start=1):
        mu = (n - rank + 1) / (n + 1)
        pop.candidates[i].emigration = mu
        pop.candidates[i].immigration = 1.0 - mu
    return pop


def feature_universe(pop: Population):
    out = set()
    for c in pop.candidates:
        out.update(c.state.matched_drivers())
    return sorted(out)


def transplant(target: Matching, source: Matching, did, rollback=True) -> bool:
    """Copy ``source``'s version of vehicle ``did`` into ``target``.

    Returns False when the transplant was undone (rollback with a stranded
    rider) or was a no-op.
    """
    src_driver = source.driver(did)
    if target.driver(did) == src_driver:
        return False
    before = target.copy()
    incoming = source.riders_of(did)
    for rid in incoming:
        holder = target.assigned[rid]
        if holder is not None and holder != did:
            target.unassign(rid)
    waiting = [rid for rid in target.riders_of(did) if rid not in incoming]
    target.set_driver(did, src_driver)
    for rid in waiting:
        target.assigned[rid] = None
    for rid in incoming:
        target.assigned[rid] = did
    riders = target.batch.riders
    stranded = False
    for rid in waiting:
        if target.assign_greedy(riders[rid]) is None:
            stranded = True
            if rollback:
                break
    if stranded and rollback:
        target.restore(before)
        return False
    return True


def roulette(weights, rng):
    total = sum(weights)
    x = rng.random() * total
    acc = 0.0
    for i, w in enumerate(weights):
        acc += w
        if x < acc:
            return i
    return len(weights) - 1


def migrate(k, target: Candidate, pop: Population, cfg: BBOConfig, rng, features=None) -> Candidate:
    """Immigrate vehicle features into ``target`` (a copy of island ``k``).

    ``pop`` is the read-only snapshot of the previous generation.  For every
    vehicle matched on some island, with probability lambda_k an emigrating
    island is chosen by roulette over mu among the other islands carrying that
    vehicle, and its version of the vehicle is transplanted.
    """
    if features is None:
        features = feature_universe(pop)
    lam = target.immigration
    for did in features:
        if rng.random() >= lam:
            continue
        sources = [j for j, c in enumerate(pop.candidates)
                   if j != k and c.state.assigned_to(did)]
        if not sources:
            continue
        j = sources[roulette([pop.candidates[s].emigration for s in sources], rng)]
        transplant(target.state, pop.candidates[j].state, did, cfg.rollback)
    return target


def mutate(c: Candidate, cfg: BBOConfig, rng) -> Candidate:
    """With probability p_mut, re-home one random pool rider.

    The rider is taken off its vehicle and given a uniformly random outcome
    among its feasible drivers plus staying unmatched.
    """
    state = c.state
    pool = state.batch.pool
    if not pool or rng.random() >= cfg.mutation_probability:
        return c
    rider = pool[int(rng.integers(len(pool)))]
    state.unassign(rider.id)
    cands = state.batch.candidates[rider.id] + [None]
    for i in rng.permutation(len(cands)):
        did = cands[int(i)]
        if did is None:
            break
        ins = state.try_insert(rider, did)
        if ins is not None:
            state.apply(rider, did, ins)
            break
    return c


@dataclass
class EvolveResult:
    best: Matching
    trace: list = field(default_factory=list)
    population: Population | None = None

    @property
    def plan(self) -> MatchPlan:
        return self.best.to_plan()


def evolve(batch: Batch, cfg: BBOConfig, seed=None) -> EvolveResult:
    """Full generational loop; trace[g] is the best cost after generation g (g=0 is the initial population)."""
    seed = cfg.seed if seed is None else seed
    if not batch.pool:
        return EvolveResult(Matching(batch), [0.0])
    pop = init_population(batch, cfg, seed)
    trace = [pop.best.cost]
    for gen in range(1, cfg.generation_limit + 1):
        compute_rates(pop)
        ranking = pop.ranking()
        elites = [pop.candidates[i].copy() for i in ranking[:cfg.elite_count]]
        features = feature_universe(pop)
        nxt = []
        for k, cand in enumerate(pop.candidates):
            rng = candidate_rng(seed, k, gen)
            z = cand.copy()
            migrate(k, z, pop, cfg, rng, features)
            mutate(z, cfg, rng)
            nxt.append(z)
        pop = Population(nxt, gen, pop.best)
        worst = sorted(range(len(nxt)), key=lambda i: (nxt[i].cost, i), reverse=True)
        for slot, elite in zip(worst[:cfg.elite_count], elites):
            nxt[slot] = elite
        trace.append(min(c.cost for c in nxt))
        pop.update_best()
    return EvolveResult(pop.best.state, trace, pop)


def bbo_match(pool, drivers, net, now, rng_seed=None, alpha=None, config: BBOConfig | None = None):
    cfg = config or BBOConfig()
    if alpha is None:
        alpha = cfg.alpha
    batch = Batch(pool, drivers, net, now, alpha)
    return evolve(batch, cfg, rng_seed).plan
