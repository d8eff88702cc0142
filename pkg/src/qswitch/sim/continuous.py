from __future__ import annotations

import numpy as np

from ..model import INF
from ._kernels import continuous_loop
from .stats import SimParams, SimStats, make_rng, summarize


def run_ctmc_sim(params: SimParams) -> SimStats:
    """Continuous-time OLEF simulation of any switch configuration (all n, B, alpha)."""
    cfg = params.config
    rates = np.asarray(cfg.rates, dtype=float)
    warmup = params.horizon * params.warmup_fraction
    buffer = -1 if cfg.buffer == INF else int(cfg.buffer)
    raw = continuous_loop(
        make_rng(params.seed), rates, cfg.n, buffer, float(cfg.q), float(cfg.alpha),
        float(params.horizon), warmup, int(params.batches), bool(params.check_invariants),
    )
    span = (params.horizon - warmup) / params.batches
    return summarize(raw, [span] * params.batches)
