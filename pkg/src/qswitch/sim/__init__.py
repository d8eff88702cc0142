from .continuous import run_ctmc_sim
from .slotted import run_slotted_sim, slot_probabilities
from .stats import SimParams, SimStats, pool, replicate, replication_seed

__all__ = [
    "SimParams",
    "SimStats",
    "pool",
    "replicate",
    "replication_seed",
    "run_ctmc_sim",
    "run_slotted_sim",
    "slot_probabilities",
]
