"""Analytic and simulated performance of a quantum entanglement switch."""
from .errors import (
    ConjecturedStabilityWarning,
    InstabilityError,
    InvalidParameterError,
    NumericError,
    ResourceError,
    SwitchError,
    UnsupportedModelError,
    WrongModelError,
)
from .model import (
    INF,
    LinkConfig,
    PerformanceMetrics,
    StabilityBasis,
    StabilityReport,
    SwitchConfig,
    aggregate_rate,
    check_stability,
    link_rate_from_length,
)

__version__ = "0.1.0"
