"""Stationary distributions and metrics of the bipartite (n = 2) switch chains.

Every variant has the same star-shaped state space: the empty state plus one
arm per link, where state ``j e_l`` means link ``l`` holds ``j`` pairs.  Arm
``l`` carries the unnormalised weights ``t_{l,j} = prod_{i<=j} mu_l/(gamma - mu_l + i*alpha)``
relative to the empty state; everything below is a functional of the per-arm
mass ``sum_j t_{l,j}`` and first moment ``sum_j j t_{l,j}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InstabilityError, InvalidParameterError, NumericError, WrongModelError
from .model import INF, PerformanceMetrics, SwitchConfig, check_stability, link_loads

MAX_TRUNCATION_DEPTH = 10**6
_NEAR_ONE = 1e-8


@dataclass(frozen=True)
class BipartiteStationary:
    pi0: float
    loads: tuple[float, ...]
    buffer: float
    arm_mass: tuple[float, ...]  # P(link l stores >= 1 pair)
    arm_moment: tuple[float, ...]  # E[Q_l]
    decoherence_terms: tuple[np.ndarray, ...] | None = None  # t_{l,j}, j = 1..depth
    truncation_depth: int | None = None

    def total_mass(self) -> float:
        return self.pi0 + math.fsum(self.arm_mass)

    def arm_probabilities(self, link: int, depth: int) -> np.ndarray:
        """``pi_l^(j)`` for ``j = 1..depth`` (zero beyond the buffer)."""
        j = np.arange(1, depth + 1)
        if self.decoherence_terms is not None:
            terms = self.decoherence_terms[link]
            out = np.zeros(depth)
            m = min(depth, len(terms))
            out[:m] = terms[:m]
            return self.pi0 * out
        probs = self.pi0 * self.loads[link] ** j.astype(float)
        probs[j > self.buffer] = 0.0
        return probs


def _geometric_log_moments(rho: float, buffer: float) -> tuple[float, float]:
    """log of ``sum_{j=1}^B rho^j`` and ``sum_{j=1}^B j rho^j``, stable for any rho > 0."""
    if buffer == INF:
        return math.log(rho) - math.log1p(-rho), math.log(rho) - 2 * math.log1p(-rho)
    B = int(buffer)
    if abs(1.0 - rho) < _NEAR_ONE:
        j = np.arange(1, B + 1, dtype=float)
        logs = j * math.log(rho)
        return float(logsumexp(logs)), float(logsumexp(logs + np.log(j)))
    if rho < 1:
        rb = rho**B
        s1 = rho * (1 - rb) / (1 - rho)
        s2 = rho * (B * rb * rho - (B + 1) * rb + 1) / (1 - rho) ** 2
        return math.log(s1), math.log(s2)
    # rho > 1: factor out rho^B and sum the reversed geometric series in sigma = 1/rho
    sigma = 1.0 / rho
    sb = sigma**B
    geo = (1 - sb) / (1 - sigma)  # sum_{m=0}^{B-1} sigma^m
    m_geo = sigma * (1 - B * sb / sigma + (B - 1) * sb) / (1 - sigma) ** 2  # sum m sigma^m
    logscale = B * math.log(rho)
    return logscale + math.log(geo), logscale + math.log(B * geo - m_geo)


def _decoherence_log_terms(rates, gamma, alpha, buffer, tol):
    """log t_{l,j} for every arm, truncated adaptively when the buffer is large."""
    rates = np.asarray(rates, dtype=float)
    mu_max = rates.max()
    log_mu = np.log(rates)[:, None]
    limit = MAX_TRUNCATION_DEPTH if buffer == INF else min(int(buffer), MAX_TRUNCATION_DEPTH)
    chunks = []
    last = np.zeros(len(rates))
    log_z = 0.0  # running log normaliser, log(1 + sum of terms so far)
    depth, size = 0, 256
    log_tol = math.log(tol)
    while True:
        j = np.arange(depth + 1, min(depth + size, limit) + 1, dtype=float)
        step = log_mu - np.log(gamma - rates[:, None] + j[None, :] * alpha)
        block = last[:, None] + np.cumsum(step, axis=1)
        chunks.append(block)
        last = block[:, -1]
        depth = int(j[-1])
        log_z = float(logsumexp(np.concatenate(([log_z], logsumexp(block, axis=1)))))
        if depth >= (int(buffer) if buffer != INF else math.inf):
            break
        r = mu_max / (gamma - mu_max + (depth + 1) * alpha)
        if r < 1:
            # geometric bound on the neglected mass and first moment, relative to the normaliser
            factor = depth * r / (1 - r) + r / (1 - r) ** 2
            tail = float(logsumexp(last)) + math.log(factor)
            if tail - log_z < log_tol:
                break
        if depth >= limit:
            raise NumericError(f"decoherence series did not converge within {MAX_TRUNCATION_DEPTH} terms")
        size *= 2
    return np.concatenate(chunks, axis=1), depth


def stationary_bipartite(
    config: SwitchConfig, truncation_tol: float = 1e-13, series: bool = False
) -> BipartiteStationary:
    """Stationary law of the star chain.

    With ``series=True`` the product-series route used for decoherence is taken
    even when ``alpha == 0``; it must then agree with the geometric closed forms.
    """
    if config.n != 2:
        raise WrongModelError(f"bipartite analytics need n = 2, got n = {config.n}")
    if not truncation_tol > 0:
        raise InvalidParameterError("truncation_tol must be positive")
    rates = np.asarray(config.rates, dtype=float)
    gamma = config.gamma
    loads = link_loads(config.rates)
    B = config.buffer

    if config.alpha > 0 or series:
        if B == INF and config.alpha == 0 and not check_stability(config).stable:
            raise InstabilityError(f"chain is unstable: loads {loads}")
        log_terms, depth = _decoherence_log_terms(rates, gamma, config.alpha, B, truncation_tol)
        j = np.arange(1, depth + 1, dtype=float)
        log_s1 = logsumexp(log_terms, axis=1)
        log_s2 = logsumexp(log_terms + np.log(j)[None, :], axis=1)
        log_z = float(logsumexp(np.concatenate(([0.0], log_s1))))
        terms = tuple(np.exp(row) for row in log_terms)
    else:
        if B == INF and not check_stability(config).stable:
            raise InstabilityError(f"chain is unstable: loads {loads}")
        pairs = [_geometric_log_moments(rho, B) for rho in loads]
        log_s1 = np.array([p[0] for p in pairs])
        log_s2 = np.array([p[1] for p in pairs])
        log_z = float(logsumexp(np.concatenate(([0.0], log_s1))))
        terms, depth = None, None

    return BipartiteStationary(
        pi0=math.exp(-log_z),
        loads=loads,
        buffer=B,
        arm_mass=tuple(np.exp(log_s1 - log_z).tolist()),
        arm_moment=tuple(np.exp(log_s2 - log_z).tolist()),
        decoherence_terms=terms,
        truncation_depth=depth,
    )


def _homogeneous_closed_form(k: int, mu: float, q: float, buffer: float) -> tuple[float, float, float]:
    """(pi0, C, E[Q]) of the homogeneous birth-death chain, k >= 3, no decoherence."""
    if buffer == INF:
        return (k - 2) / (2 * (k - 1)), q * mu * k / 2, k / (2 * (k - 2))
    B = int(buffer)
    rho = 1.0 / (k - 1)
    rb = rho**B
    pi0 = (k - 2) / (2 * (k - 1) - k * rb)
    cap = q * mu * k * (1 - rb) / (2 - k * rb * rho)
    eq = k * (B * rb * rho + 1 - (B + 1) * rb) / ((2 - k * rb * rho) * (k - 2))
    return pi0, cap, eq


def metrics_from_stationary(config: SwitchConfig, st: BipartiteStationary) -> PerformanceMetrics:
    rates = np.asarray(config.rates, dtype=float)
    gamma = config.gamma
    mass = np.asarray(st.arm_mass)
    busy = mass.sum()
    q = config.q
    capacity = q * float(np.dot(gamma - rates, mass))
    per_user = q * ((gamma - rates) * mass + rates * (busy - mass))
    return PerformanceMetrics(
        capacity=capacity,
        expected_queue=math.fsum(st.arm_moment),
        per_user_rate=tuple(per_user.tolist()),
        per_link_queue=st.arm_moment,
    )


def metrics_bipartite(config: SwitchConfig, truncation_tol: float = 1e-13) -> PerformanceMetrics:
    """Capacity, E[Q], per-user rates and per-link queues for any n = 2 variant."""
    if config.n != 2:
        raise WrongModelError(f"bipartite analytics need n = 2, got n = {config.n}")
    k, q = config.k, config.q
    if config.alpha == 0 and config.is_homogeneous and k >= 3:
        mu = config.rates[0]
        _, cap, eq = _homogeneous_closed_form(k, mu, q, config.buffer)
        return PerformanceMetrics(cap, eq, (2 * cap / k,) * k, (eq / k,) * k)

    st = stationary_bipartite(config, truncation_tol)
    m = metrics_from_stationary(config, st)
    if config.alpha == 0 and config.buffer == INF:
        rates = config.rates
        return PerformanceMetrics(q * config.gamma / 2, m.expected_queue, tuple(q * r for r in rates), m.per_link_queue)
    return m


def homogeneous_pi0(config: SwitchConfig) -> float:
    if not (config.is_homogeneous and config.k >= 3 and config.alpha == 0 and config.n == 2):
        raise WrongModelError("closed-form pi0 needs a homogeneous n = 2 switch with k >= 3 and alpha = 0")
    return _homogeneous_closed_form(config.k, config.rates[0], config.q, config.buffer)[0]


def capacity_general_sum(config: SwitchConfig) -> float:
    """Infinite-buffer capacity in its series form ``q sum mu_l/(1-rho_l) / (1 + sum rho_l/(1-rho_l))``.

    Algebraically equal to ``q gamma / 2``; kept separate so the identity can be checked.
    """
    if config.n != 2 or config.alpha != 0:
        raise WrongModelError("series form covers n = 2 without decoherence")
    if not check_stability(config.replace(buffer=INF)).stable:
        raise InstabilityError("series form requires every load below one")
    rho = np.asarray(link_loads(config.rates))
    mu = np.asarray(config.rates)
    return config.q * float(np.sum(mu / (1 - rho))) / (1 + float(np.sum(rho / (1 - rho))))


def decoherence_capacity_drop(
    config: SwitchConfig, alpha_max: float, truncation_tol: float = 1e-13
) -> tuple[float, float]:
    """Capacity without decoherence and at ``alpha_max``, everything else fixed."""
    if config.n != 2:
        raise WrongModelError("decoherence analytics cover n = 2 only")
    base = metrics_bipartite(config.replace(alpha=0.0), truncation_tol).capacity
    if alpha_max == 0:
        return base, base
    return base, metrics_bipartite(config.replace(alpha=float(alpha_max)), truncation_tol).capacity
