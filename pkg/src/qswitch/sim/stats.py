"""Simulation parameters, batch-means summaries and replication."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import InvalidParameterError
from ..model import SwitchConfig
from . import _kernels as kern

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimParams:
    """``horizon`` is simulated time for the continuous engine and a slot count for the slotted one."""

    config: SwitchConfig
    horizon: float
    seed: int = 0
    warmup_fraction: float = 0.1
    batches: int = 20
    check_invariants: bool = False

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise InvalidParameterError(f"horizon must be positive and finite, got {self.horizon}")
        if not 0 <= self.warmup_fraction < 1:
            raise InvalidParameterError(f"warmup_fraction must lie in [0, 1), got {self.warmup_fraction}")
        if int(self.batches) != self.batches or self.batches < 10:
            raise InvalidParameterError(f"need at least 10 batches, got {self.batches}")
        if int(self.seed) != self.seed or not 0 <= self.seed <= MASK64:
            raise InvalidParameterError(f"seed must be an integer in [0, 2**64), got {self.seed}")


def replication_seed(base: int, i: int) -> int:
    """Seed of replication ``i``: ``base XOR (golden-ratio increment * i) mod 2**64``."""
    return (base ^ (GOLDEN_GAMMA * i)) & MASK64


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SimStats:
    capacity_est: float
    capacity_ci: float  # 95% halfwidth
    eq_est: float
    eq_ci: float
    per_user_rate_est: tuple[float, ...]
    max_occupancy: int
    drops: int
    decohered: int
    measurements_attempted: int
    measurements_succeeded: int
    generated: int
    consumed: int
    stored_at_end: int
    max_nonempty: int
    invariant_violations: int
    effective_horizon: float
    batch_capacity: tuple[float, ...] = field(repr=False)
    batch_eq: tuple[float, ...] = field(repr=False)
    replications: int = 1

    @property
    def events(self) -> int:
        return self.generated + self.decohered

    @property
    def conserved(self) -> bool:
        return self.generated == self.consumed + self.drops + self.decohered + self.stored_at_end


def ci_halfwidth(samples) -> float:
    x = np.asarray(samples, dtype=float)
    if len(x) < 2:
        return math.inf
    return float(stats.t.ppf(0.975, len(x) - 1) * x.std(ddof=1) / math.sqrt(len(x)))


def summarize(raw, batch_lengths, time_scale=1.0) -> SimStats:
    """Build stats from a kernel's raw output; ``time_scale`` converts batch lengths to seconds."""
    area, succ, per_link, counts = raw
    lengths = np.asarray(batch_lengths, dtype=float)
    seconds = lengths * time_scale
    cap_b = succ / seconds
    eq_b = area / lengths
    total = seconds.sum()
    return SimStats(
        capacity_est=float(succ.sum() / total),
        capacity_ci=ci_halfwidth(cap_b),
        eq_est=float(area.sum() / lengths.sum()),
        eq_ci=ci_halfwidth(eq_b),
        per_user_rate_est=tuple((per_link / total).tolist()),
        max_occupancy=int(counts[kern.MAX_OCC]),
        drops=int(counts[kern.EVICTED]),
        decohered=int(counts[kern.DECOHERED]),
        measurements_attempted=int(counts[kern.ATTEMPTED]),
        measurements_succeeded=int(counts[kern.SUCCEEDED]),
        generated=int(counts[kern.GENERATED]),
        consumed=int(counts[kern.CONSUMED]),
        stored_at_end=int(counts[kern.STORED_END]),
        max_nonempty=int(counts[kern.MAX_NONEMPTY]),
        invariant_violations=int(counts[kern.VIOLATIONS]),
        effective_horizon=float(total),
        batch_capacity=tuple(cap_b.tolist()),
        batch_eq=tuple(eq_b.tolist()),
    )


def pool(runs: list[SimStats]) -> SimStats:
    """Combine independent runs; CIs come from the pooled batch means."""
    if len(runs) == 1:
        return runs[0]
    horizon = sum(r.effective_horizon for r in runs)
    weights = [r.effective_horizon / horizon for r in runs]
    cap_b = [c for r in runs for c in r.batch_capacity]
    eq_b = [e for r in runs for e in r.batch_eq]
    per_user = np.sum([np.asarray(r.per_user_rate_est) * w for r, w in zip(runs, weights)], axis=0)
    return SimStats(
        capacity_est=sum(r.capacity_est * w for r, w in zip(runs, weights)),
        capacity_ci=ci_halfwidth(cap_b),
        eq_est=sum(r.eq_est * w for r, w in zip(runs, weights)),
        eq_ci=ci_halfwidth(eq_b),
        per_user_rate_est=tuple(per_user.tolist()),
        max_occupancy=max(r.max_occupancy for r in runs),
        drops=sum(r.drops for r in runs),
        decohered=sum(r.decohered for r in runs),
        measurements_attempted=sum(r.measurements_attempted for r in runs),
        measurements_succeeded=sum(r.measurements_succeeded for r in runs),
        generated=sum(r.generated for r in runs),
        consumed=sum(r.consumed for r in runs),
        stored_at_end=sum(r.stored_at_end for r in runs),
        max_nonempty=max(r.max_nonempty for r in runs),
        invariant_violations=sum(r.invariant_violations for r in runs),
        effective_horizon=horizon,
        batch_capacity=tuple(cap_b),
        batch_eq=tuple(eq_b),
        replications=sum(r.replications for r in runs),
    )


def replicate(params: SimParams, replications: int, engine: str = "continuous") -> SimStats:
    """Run independent replications with seeds from :func:`replication_seed` and pool them."""
    from .continuous import run_ctmc_sim
    from .slotted import run_slotted_sim

    if int(replications) != replications or replications < 1:
        raise InvalidParameterError(f"replications must be a positive integer, got {replications}")
    runner = {"continuous": run_ctmc_sim, "slotted": run_slotted_sim}.get(engine)
    if runner is None:
        raise InvalidParameterError(f"unknown engine {engine!r}")
    runs = []
    for i in range(replications):
        seed = replication_seed(params.seed, i)
        runs.append(runner(SimParams(params.config, params.horizon, seed, params.warmup_fraction,
                                     params.batches, params.check_invariants)))
    return pool(runs)
