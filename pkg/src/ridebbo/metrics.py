"""Matching rate, distance overhead, matching delay and the weighted cost."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .domain import distance_overhead


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class CostParams:
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class MetricsSnapshot:
    matched_count: int
    total_riders: int
    overhead_sum: float
    rider_msp_sum: float
    matching_delays: tuple = ()
    base_driver_distance: float = 0.0
    base_rider_distance: float = 0.0
    matched_trip_distance: float = 0.0
    driver_count: int = 0

    def __post_init__(self):
        if self.matched_count > self.total_riders:
            raise MetricsError("matched_count exceeds total_riders")
        for name in ("overhead_sum", "rider_msp_sum", "base_driver_distance",
                     "base_rider_distance", "matched_trip_distance"):
            if getattr(self, name) < 0:
                raise MetricsError(f"{name} must be >= 0")

    def to_dict(self, alpha=None):
        d = asdict(self)
        d["matching_delays"] = list(self.matching_delays)
        d["matching_rate"] = matching_rate(self) if self.total_riders else None
        d["overhead_mean"] = overhead_mean(self)
        mean, mx = matching_delay_stats(self)
        d["matching_delay_mean"] = mean
        d["matching_delay_max"] = mx
        if alpha is not None:
            d["cost"] = cost(CostParams(alpha), self) if self.total_riders and self.rider_msp_sum > 0 else None
        return d


def matching_rate(s: MetricsSnapshot) -> float:
    if s.total_riders <= 0:
        raise MetricsError("matching rate undefined with zero riders")
    return s.matched_count / s.total_riders


def overhead_sum(drivers, net) -> float:
    """Sum of per-driver distance overheads."""
    return sum(distance_overhead(d, net) for d in drivers)


def overhead_mean(s: MetricsSnapshot) -> float:
    return s.overhead_sum / s.driver_count if s.driver_count else 0.0


def cost(p: CostParams, s: MetricsSnapshot) -> float:
    """alpha * D_ov / sum(rider MSP) + (1 - alpha) * (1 - M_R)."""
    if s.rider_msp_sum <= 0:
        raise MetricsError("cost undefined: rider MSP sum is zero")
    return p.alpha * s.overhead_sum / s.rider_msp_sum + (1 - p.alpha) * (1 - matching_rate(s))


def cost_from_parts(alpha, overhead, rider_msp_sum, matched, total):
    """Scalar form of :func:`cost` used inside the optimizers' inner loops."""
    return alpha * overhead / rider_msp_sum + (1 - alpha) * (1 - matched / total)


def matching_delay_stats(s: MetricsSnapshot):
    if not s.matching_delays:
        return 0.0, 0.0
    delays = s.matching_delays
    return sum(delays) / len(delays), max(delays)
