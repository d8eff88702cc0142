"""Shared domain types: link and switch configuration, metrics, stability.

All rates are in ebits per second (or any consistent per-time unit); the
CLI is the only place that converts to and from Mega-ebits/second.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .errors import InvalidParameterError

INF = math.inf


def link_rate_from_length(
    length_km: float,
    attenuation_db_per_km: float = 0.2,
    efficiency_c: float = 0.1,
    slot_tau_seconds: float = 1e-9,
) -> float:
    """Entanglement generation rate of a fibre link, ``c * eta / tau``.

    ``eta = 10**(-0.1 * attenuation * length)`` is the fibre transmissivity.
    """
    if not slot_tau_seconds > 0:
        raise InvalidParameterError(f"slot length must be positive, got {slot_tau_seconds}")
    if not 0 < efficiency_c <= 1:
        raise InvalidParameterError(f"efficiency must lie in (0, 1], got {efficiency_c}")
    if length_km < 0 or attenuation_db_per_km < 0:
        raise InvalidParameterError("length and attenuation must be nonnegative")
    return efficiency_c * transmissivity(length_km, attenuation_db_per_km) / slot_tau_seconds


def transmissivity(length_km: float, attenuation_db_per_km: float = 0.2) -> float:
    return 10.0 ** (-0.1 * attenuation_db_per_km * length_km)


@dataclass(frozen=True)
class LinkConfig:
    """One user link. Either a direct rate, or a fibre description that fixes it."""

    rate_mu: float
    length_km: float | None = None
    attenuation_db_per_km: float | None = None
    efficiency_c: float | None = None
    slot_tau_seconds: float | None = None

    def __post_init__(self):
        if not (self.rate_mu > 0 and math.isfinite(self.rate_mu)):
            raise InvalidParameterError(f"link rate must be positive and finite, got {self.rate_mu}")

    @classmethod
    def from_length(
        cls,
        length_km: float,
        attenuation_db_per_km: float = 0.2,
        efficiency_c: float = 0.1,
        slot_tau_seconds: float = 1e-9,
    ) -> "LinkConfig":
        rate = link_rate_from_length(length_km, attenuation_db_per_km, efficiency_c, slot_tau_seconds)
        return cls(rate, length_km, attenuation_db_per_km, efficiency_c, slot_tau_seconds)

    @property
    def success_prob(self) -> float | None:
        """Per-slot success probability ``c * eta`` when the link is fibre-defined."""
        if self.length_km is None:
            return None
        return self.efficiency_c * transmissivity(self.length_km, self.attenuation_db_per_km)


@dataclass(frozen=True)
class SwitchConfig:
    """Complete description of one switch model.

    ``buffer`` is the per-link memory bound B, ``math.inf`` for unbounded.
    ``success_prob_p`` and ``slot_tau`` only matter for the slotted model.
    """

    links: tuple[LinkConfig, ...]
    n: int = 2
    buffer: float = INF
    q: float = 1.0
    alpha: float = 0.0
    success_prob_p: tuple[float, ...] | None = None
    slot_tau: float = 1.0

    def __post_init__(self):
        links = tuple(
            link if isinstance(link, LinkConfig) else LinkConfig(float(link)) for link in self.links
        )
        object.__setattr__(self, "links", links)
        if len(links) < 2:
            raise InvalidParameterError(f"need at least two links, got {len(links)}")
        if not isinstance(self.n, int) or self.n < 2:
            raise InvalidParameterError(f"entanglement size n must be an integer >= 2, got {self.n}")
        if self.n > len(links):
            raise InvalidParameterError(f"n={self.n} exceeds the number of links k={len(links)}")
        if self.buffer != INF:
            if self.buffer != int(self.buffer) or self.buffer < 1:
                raise InvalidParameterError(f"buffer must be an integer >= 1 or inf, got {self.buffer}")
            object.__setattr__(self, "buffer", int(self.buffer))
        # q = 0 is accepted: it is a legal degenerate switch whose capacity is zero
        if not 0 <= self.q <= 1:
            raise InvalidParameterError(f"q must lie in [0, 1], got {self.q}")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise InvalidParameterError(f"alpha must be finite and nonnegative, got {self.alpha}")
        if not self.slot_tau > 0:
            raise InvalidParameterError(f"slot_tau must be positive, got {self.slot_tau}")
        if self.success_prob_p is not None:
            p = self.success_prob_p
            p = (float(p),) * len(links) if isinstance(p, (int, float)) else tuple(float(x) for x in p)
            if len(p) != len(links):
                raise InvalidParameterError("success_prob_p needs one entry per link")
            if not all(0 < x < 1 for x in p):
                raise InvalidParameterError(f"success probabilities must lie in (0, 1), got {p}")
            object.__setattr__(self, "success_prob_p", p)

    @classmethod
    def from_rates(cls, rates: Sequence[float], **kwargs) -> "SwitchConfig":
        return cls(tuple(LinkConfig(float(r)) for r in rates), **kwargs)

    @classmethod
    def homogeneous(cls, k: int, mu: float = 1.0, **kwargs) -> "SwitchConfig":
        return cls.from_rates([mu] * k, **kwargs)

    @property
    def k(self) -> int:
        return len(self.links)

    @property
    def rates(self) -> tuple[float, ...]:
        return tuple(link.rate_mu for link in self.links)

    @property
    def gamma(self) -> float:
        return aggregate_rate(self)

    @property
    def is_homogeneous(self) -> bool:
        first = self.links[0].rate_mu
        return all(link.rate_mu == first for link in self.links)

    @property
    def finite_buffer(self) -> bool:
        return self.buffer != INF

    def replace(self, **changes) -> "SwitchConfig":
        return replace(self, **changes)


def aggregate_rate(config: SwitchConfig | Sequence[float]) -> float:
    """Aggregate generation rate over all links (``gamma``)."""
    rates = config.rates if isinstance(config, SwitchConfig) else config
    return math.fsum(rates)


@dataclass(frozen=True)
class PerformanceMetrics:
    capacity: float
    expected_queue: float
    per_user_rate: tuple[float, ...]
    per_link_queue: tuple[float, ...]
    notes: tuple[str, ...] = ()


class StabilityBasis(enum.Enum):
    PROVEN = "proven"
    CONJECTURED = "conjectured"


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    basis: StabilityBasis
    loads: tuple[float, ...] = field(default=())
    detail: str = ""


def link_loads(rates: Sequence[float]) -> tuple[float, ...]:
    """Per-link load ``mu_l / (gamma - mu_l)`` of the bipartite chain."""
    gamma = math.fsum(rates)
    return tuple(mu / (gamma - mu) if gamma > mu else INF for mu in rates)


def check_stability(config: SwitchConfig) -> StabilityReport:
    k, n = config.k, config.n
    if n > k:
        raise InvalidParameterError(f"n={n} exceeds k={k}")
    loads = link_loads(config.rates) if n == 2 else ()
    if config.finite_buffer:
        return StabilityReport(True, StabilityBasis.PROVEN, loads, "finite state space")
    if config.alpha > 0:
        return StabilityReport(True, StabilityBasis.PROVEN, loads, "decoherence bounds occupancy")
    if n == 2:
        stable = all(rho < 1 for rho in loads)
        return StabilityReport(stable, StabilityBasis.PROVEN, loads, "all loads below one" if stable else "some load >= 1")
    if not config.is_homogeneous:
        # only the homogeneous n-partite chain is characterised
        return StabilityReport(k > n, StabilityBasis.CONJECTURED, (), "heterogeneous n-partite")
    if n == 3:
        return StabilityReport(k > 3, StabilityBasis.PROVEN, (), "quarter-plane drift criterion")
    return StabilityReport(k > n, StabilityBasis.CONJECTURED, (), "k > n conjecture")
