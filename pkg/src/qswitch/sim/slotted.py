from __future__ import annotations

import numpy as np

from ..errors import InvalidParameterError, UnsupportedModelError
from ..model import INF, SwitchConfig
from ._kernels import slotted_loop
from .stats import SimParams, SimStats, make_rng, summarize


def slot_probabilities(cfg: SwitchConfig) -> tuple[float, ...]:
    """Per-slot success probabilities: explicit ``success_prob_p``, else from fibre-defined links."""
    if cfg.success_prob_p is not None:
        return cfg.success_prob_p
    probs = tuple(link.success_prob for link in cfg.links)
    if any(p is None for p in probs):
        raise InvalidParameterError("slotted simulation needs success_prob_p or fibre-defined links")
    if not all(0 < p < 1 for p in probs):
        raise InvalidParameterError(f"success probabilities must lie in (0, 1), got {probs}")
    return probs


def run_slotted_sim(params: SimParams) -> SimStats:
    """Slotted bipartite simulation; ``params.horizon`` is the number of slots."""
    cfg = params.config
    if cfg.n != 2:
        raise UnsupportedModelError(f"slotted simulation covers n = 2 only, got n = {cfg.n}")
    if cfg.alpha != 0:
        raise UnsupportedModelError("slotted simulation has no decoherence; use the continuous engine")
    slots = int(params.horizon)
    warmup = int(slots * params.warmup_fraction)
    if slots - warmup < params.batches:
        raise InvalidParameterError(f"{slots} slots cannot fill {params.batches} batches after warmup")
    probs = np.asarray(slot_probabilities(cfg), dtype=float)
    buffer = -1 if cfg.buffer == INF else int(cfg.buffer)
    raw = slotted_loop(
        make_rng(params.seed), probs, buffer, float(cfg.q), slots, warmup,
        int(params.batches), bool(params.check_invariants),
    )
    span = (slots - warmup) // params.batches
    lengths = [span] * (params.batches - 1) + [slots - warmup - span * (params.batches - 1)]
    return summarize(raw, lengths, time_scale=cfg.slot_tau)
