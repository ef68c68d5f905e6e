"""Batch matchers behind one calling convention.

Every matcher takes ``(pool, drivers, net, now, rng_seed)`` and returns a
:class:`MatchPlan`.  :func:`match` dispatches by name.
"""

from .base import Assignment, Batch, MatchPlan, Matching, check_plan
from .greedy import greedy_match, nn_match
from .sa import SAParams, anneal, sa_match

MATCHER_NAMES = ("greedy", "nn", "sa", "bbo")


def match(name, pool, drivers, net, now, rng_seed=0, alpha=0.5, config=None) -> MatchPlan:
    """Run matcher ``name`` on one batch.

    ``config`` is an :class:`SAParams` for ``sa`` or a
    :class:`~ridebbo.bbo.BBOConfig` for ``bbo``; other matchers ignore it.
    """
    if name == "greedy":
        return greedy_match(pool, drivers, net, now, rng_seed, alpha)
    if name == "nn":
        return nn_match(pool, drivers, net, now, rng_seed, alpha)
    if name == "sa":
        return sa_match(pool, drivers, net, now, rng_seed, alpha, config)
    if name == "bbo":
        from ..bbo import bbo_match
        return bbo_match(pool, drivers, net, now, rng_seed, alpha, config)
    raise ValueError(f"unknown matcher {name!r}; choose from {', '.join(MATCHER_NAMES)}")


__all__ = ["Assignment", "Batch", "MATCHER_NAMES", "MatchPlan", "Matching", "SAParams", "anneal",
           "check_plan", "greedy_match", "match", "nn_match", "sa_match"]
