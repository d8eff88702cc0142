"""Slotted (discrete-time) model of the homogeneous, infinite-buffer bipartite switch.

The stationary law is geometric, ``pi_i = beta**(i-1) * pi_1`` for ``i >= 1``,
where ``beta`` is the unique root in (0, 1) of

    f(beta) = (beta*p + (1-p))**(k-1) * (p + beta*(1-p)) - beta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidParameterError, NumericError
from .model import PerformanceMetrics

BRACKET_LEFT = 1e-12
BRACKET_RIGHT = 1.0 - 1e-6


def _check(p: float, k: int) -> None:
    if not 0 < p < 1:
        raise InvalidParameterError(f"p must lie in the open interval (0, 1), got {p}")
    if int(k) != k or k < 3:
        raise InvalidParameterError(f"the slotted chain needs k >= 3 links, got {k}")


def f_beta(beta: float, p: float, k: int) -> float:
    if beta < 0.5:
        return (beta * p + 1.0 - p) ** (k - 1) * (p + beta * (1.0 - p)) - beta
    # same polynomial as expm1(log(...)) + (1 - beta): avoids cancellation near beta = 1
    delta = 1.0 - beta
    log_prod = (k - 1) * math.log1p(-p * delta) + math.log1p(-(1.0 - p) * delta)
    return math.expm1(log_prod) + delta


def beta_bracket(p: float, k: int, tol: float = 1e-14) -> tuple[float, float, float]:
    """Root of ``f`` in (0, 1) as ``(beta, lo, hi)`` with ``f(lo) > 0 >= f(hi)``.

    Bisection, with a secant step tried inside the bracket on every iteration.
    The right end starts below 1 so the trivial root ``beta = 1`` is never returned.
    """
    _check(p, k)
    if not tol > 0:
        raise InvalidParameterError("tol must be positive")
    lo, hi = BRACKET_LEFT, BRACKET_RIGHT
    f_lo, f_hi = f_beta(lo, p, k), f_beta(hi, p, k)
    if f_lo <= 0:
        lo, f_lo = 0.0, f_beta(0.0, p, k)
    if not (f_lo > 0 and f_hi < 0):
        raise NumericError(f"could not bracket the root for p={p}, k={k}: f({lo})={f_lo}, f({hi})={f_hi}")

    for _ in range(500):
        if hi - lo <= tol and min(f_lo, -f_hi) <= tol:
            break
        s = _secant(lo, hi, f_lo, f_hi)
        if lo < s < hi:
            f_s = f_beta(s, p, k)
            if f_s > 0:
                lo, f_lo = s, f_s
            else:
                hi, f_hi = s, f_s
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break  # bracket is at machine resolution
        f_mid = f_beta(mid, p, k)
        if f_mid > 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    else:
        raise NumericError("root finder did not converge")
    beta = lo if f_lo < -f_hi else hi
    if beta <= 0.0:
        # root below the float resolution of the bracket; keep it strictly inside (0, 1)
        s = _secant(lo, hi, f_lo, f_hi)
        beta = s if 0.0 < s < hi else hi
    return beta, lo, hi


def _secant(lo, hi, f_lo, f_hi):
    # anchor at the endpoint with the smaller residual to keep the step accurate
    if f_lo < -f_hi:
        return lo - f_lo * (hi - lo) / (f_hi - f_lo)
    return hi - f_hi * (hi - lo) / (f_hi - f_lo)


def solve_beta(p: float, k: int, tol: float = 1e-14) -> float:
    return beta_bracket(p, k, tol)[0]


@dataclass(frozen=True)
class DtmcSolution:
    p: float
    k: int
    beta: float
    pi1: float
    pi0: float
    slot_tau_seconds: float = 1.0

    def pi(self, i: int) -> float:
        return self.pi0 if i == 0 else self.beta ** (i - 1) * self.pi1

    @property
    def expected_queue(self) -> float:
        # sum_i i beta^(i-1) pi1 = pi1 / (1-beta)^2 with pi1 = (1-beta^2)/2
        return (1 + self.beta) / (2 * (1 - self.beta))


def solve_dtmc(p: float, k: int, tau: float = 1.0, tol: float = 1e-14) -> DtmcSolution:
    beta = solve_beta(p, k, tol)
    return DtmcSolution(p, k, beta, (1 - beta * beta) / 2, (1 - beta) / 2, tau)


def dtmc_metrics(p: float, k: int, q: float = 1.0, tau: float = 1.0) -> PerformanceMetrics:
    if not 0 <= q <= 1:
        raise InvalidParameterError(f"q must lie in [0, 1], got {q}")
    if not tau > 0:
        raise InvalidParameterError(f"tau must be positive, got {tau}")
    sol = solve_dtmc(p, k, tau)
    cap = q * k * p / (2 * tau)
    eq = sol.expected_queue
    return PerformanceMetrics(cap, eq, (2 * cap / k,) * k, (eq / k,) * k)


def binomial_pmf(m: int, p: float) -> np.ndarray:
    """P(Bin(m, p) = j) for j = 0..m; log-space once m > 60."""
    j = np.arange(m + 1)
    if m <= 60:
        coeffs = np.array([math.comb(m, int(x)) for x in j], dtype=float)
        return coeffs * p**j * (1 - p) ** (m - j)
    logc = np.array([math.lgamma(m + 1) - math.lgamma(x + 1) - math.lgamma(m - x + 1) for x in j])
    return np.exp(logc + j * math.log(p) + (m - j) * math.log1p(-p))


def parity_tails(p: float, k: int) -> tuple[np.ndarray, np.ndarray]:
    """``(P_e, P_o)`` with ``P_e[i] = sum_{j >= i, j even} C(k-1, j) p^j (1-p)^(k-1-j)``.

    Arrays are indexed ``i = 0..k`` (entries past ``k-1`` are zero).
    """
    pmf = binomial_pmf(k - 1, p)
    even = np.where(np.arange(k) % 2 == 0, pmf, 0.0)
    odd = pmf - even
    pe = np.zeros(k + 1)
    po = np.zeros(k + 1)
    pe[:k] = np.cumsum(even[::-1])[::-1]
    po[:k] = np.cumsum(odd[::-1])[::-1]
    return pe, po


def boundary_rows(p: float, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Transition probabilities into states 0 and 1: ``P[i, 0]`` (i = 1..k-1), ``P[i, 1]`` (i = 1..k).

    Returned as arrays indexed by i (index 0 unused; ``P0[k] = 0``).
    """
    _check(p, k)
    pb = 1.0 - p
    pe, po = parity_tails(p, k)
    to0 = np.zeros(k + 1)
    to1 = np.zeros(k + 1)
    for i in range(1, k + 1):
        if i <= k - 1:
            if i % 2 == 0:
                to0[i] = pb * pe[i] + p * po[i + 1]
            else:
                to0[i] = pb * po[i] + p * pe[i + 1]
        if i % 2 == 0:
            to1[i] = pb * po[i - 1] + p * pe[i]
        else:
            to1[i] = pb * pe[i - 1] + p * po[i]
    return to0, to1


def boundary_kernel_identity(p: float, k: int, beta: float) -> float:
    """Residual of ``sum_{i<k} beta^i (P_i0 + P_i1) + beta^k P_k1 = beta``; zero at the interior root."""
    to0, to1 = boundary_rows(p, k)
    i = np.arange(1, k)
    lhs = math.fsum((beta**i * (to0[1:k] + to1[1:k])).tolist()) + beta**k * to1[k]
    return lhs - beta


def ctmc_expected_queue(k: int) -> float:
    return k / (2 * (k - 2))


def rel_err_curve(k: int, p_grid: Iterable[float]) -> np.ndarray:
    """``|E[Q]_slotted - E[Q]_continuous| / E[Q]_slotted`` over a grid of p (mu = p / tau)."""
    eq_c = ctmc_expected_queue(k)
    out = []
    for p in p_grid:
        eq_d = solve_dtmc(float(p), k).expected_queue
        out.append(abs(eq_d - eq_c) / eq_d)
    return np.array(out)


def max_rel_err_eq(k: int, p_grid: Iterable[float]) -> float:
    return float(rel_err_curve(k, p_grid).max())
