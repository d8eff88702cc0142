"""Homogeneous, infinite-buffer switch serving n-partite (GHZ) entanglement.

States are tuples ``(i_1, ..., i_{n-1})`` of stored-pair counts on the (at
most n-1) links that hold pairs.  The uniformized chain moves, per step:

* no zero entry: all counts drop by one w.p. ``(k-n+1)/k``, or ``i_l`` grows w.p. ``1/k``;
* ``j`` zero entries (0 < j < n-1): a zero entry grows w.p. ``(k-(n-1-j))/(k j)``,
  a nonzero entry w.p. ``1/k``;
* the empty state moves to each ``e_l`` w.p. ``1/(n-1)``.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConjecturedStabilityWarning,
    InstabilityError,
    InvalidParameterError,
    NumericError,
    ResourceError,
)
from .model import PerformanceMetrics

DEFAULT_MAX_STATES = 2_000_000
_DIRECT_LIMIT = 20_000


def zero_count(state) -> int:
    """Index j of the partition class S_j the state belongs to."""
    return sum(1 for x in state if x == 0)


def kernel_row(state, k: int, n: int, exact: bool = False) -> list[tuple[tuple[int, ...], float]]:
    """Untruncated transitions out of ``state`` as ``(target, probability)`` pairs."""
    num = Fraction if exact else (lambda a, b=1: a / b)
    state = tuple(int(x) for x in state)
    d = n - 1
    if len(state) != d or min(state) < 0:
        raise InvalidParameterError(f"state must be {d} nonnegative counts, got {state}")
    j = zero_count(state)
    if j == d:
        return [(tuple(1 if m == l else 0 for m in range(d)), num(1, d)) for l in range(d)]
    out = []
    if j == 0:
        out.append((tuple(x - 1 for x in state), num(k - d, k)))
    for l in range(d):
        target = state[:l] + (state[l] + 1,) + state[l + 1 :]
        if state[l] == 0:
            out.append((target, num(k - (d - j), k * j)))
        else:
            out.append((target, num(1, k)))
    return out


@dataclass(frozen=True)
class TransitionKernel:
    k: int
    n: int
    cap: int
    states: np.ndarray  # (N, n-1) integer coordinates, row-major over {0..cap}^(n-1)
    matrix: sp.csr_matrix

    def index(self, state) -> int:
        idx = 0
        for x in state:
            idx = idx * (self.cap + 1) + int(x)
        return idx

    def row(self, state) -> list[tuple[tuple[int, ...], float]]:
        i = self.index(state)
        lo, hi = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return [
            (tuple(int(x) for x in self.states[c]), float(v))
            for c, v in zip(self.matrix.indices[lo:hi], self.matrix.data[lo:hi])
        ]

    @property
    def busy(self) -> np.ndarray:
        """Mask of states where every coordinate is positive (class S_0)."""
        return np.all(self.states > 0, axis=1)

    @property
    def size(self) -> np.ndarray:
        return self.states.sum(axis=1)


def build_uniformized_kernel(k: int, n: int, cap: int, max_states: int = DEFAULT_MAX_STATES) -> TransitionKernel:
    """Sparse kernel on ``{0..cap}^(n-1)``; growth past ``cap`` is redirected to a self-loop."""
    if n < 2 or k < n:
        raise InvalidParameterError(f"need k >= n >= 2, got k={k}, n={n}")
    if cap < 2:
        raise InvalidParameterError(f"truncation cap must be >= 2, got {cap}")
    d = n - 1
    size = (cap + 1) ** d
    if size > max_states:
        raise ResourceError(f"{size} states exceeds the limit of {max_states}")

    states = np.array(list(itertools.product(range(cap + 1), repeat=d)), dtype=np.int64).reshape(size, d)
    weights = (cap + 1) ** np.arange(d - 1, -1, -1)
    rows, cols, vals = [], [], []
    for s_idx, state in enumerate(states.tolist()):
        for target, prob in kernel_row(state, k, n):
            t_idx = s_idx if max(target) > cap else int(np.dot(target, weights))
            rows.append(s_idx)
            cols.append(t_idx)
            vals.append(prob)
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))
    matrix.sum_duplicates()
    return TransitionKernel(k, n, cap, states, matrix)


def stationary_truncated(kernel, tol: float = 1e-10, max_iter: int = 200_000) -> np.ndarray:
    """Solve ``pi P = pi``, ``sum(pi) = 1``.

    ``kernel`` is a :class:`TransitionKernel` or any row-stochastic (sparse) matrix.
    The first component is pinned to one and the remaining balance equations are
    solved directly (small chains) or by ILU-preconditioned GMRES; a lazy power
    iteration is the fallback.
    """
    P = sp.csr_matrix(kernel.matrix if isinstance(kernel, TransitionKernel) else kernel)
    N = P.shape[0]
    if N == 1:
        return np.ones(1)
    A = (P.T - sp.identity(N, format="csr")).tocsc()
    reduced = A[1:, 1:].tocsc()
    rhs = -A[1:, 0].toarray().ravel()

    pi = None
    try:
        if N <= _DIRECT_LIMIT:
            x = spla.spsolve(reduced, rhs)
        else:
            ilu = spla.spilu(reduced, drop_tol=1e-4, fill_factor=10)
            precond = spla.LinearOperator(reduced.shape, ilu.solve)
            x, _ = spla.gmres(reduced, rhs, M=precond, rtol=1e-12, restart=200, maxiter=50)
        pi = _accept(np.concatenate(([1.0], x)), P, tol)
    except (RuntimeError, ValueError):
        pass  # singular factorisation: fall through to iteration
    if pi is not None:
        return pi

    pi = np.full(N, 1.0 / N)
    PT = P.T.tocsr()
    for it in range(max_iter):
        # lazy chain: same stationary law, no periodicity issues
        pi = 0.5 * (pi + PT @ pi)
        if it % 50 == 0 and (out := _accept(pi, P, tol)) is not None:
            return out
    raise NumericError(f"stationary solve did not reach residual {tol} within {max_iter} iterations")


def _accept(x, P, tol):
    if not np.all(np.isfinite(x)) or x.sum() <= 0:
        return None
    x = x / x.sum()
    if x.min() < -tol or np.abs(x @ P - x).sum() > tol:
        return None
    x = np.clip(x, 0.0, None)
    return x / x.sum()


def busy_mass(kernel: TransitionKernel, pi: np.ndarray) -> float:
    return float(pi[kernel.busy].sum())


def expected_total(kernel: TransitionKernel, pi: np.ndarray) -> float:
    return float(pi @ kernel.size)


def uniformized_capacity(kernel: TransitionKernel, pi: np.ndarray, mu: float = 1.0, q: float = 1.0) -> float:
    """Measurement rate ``q mu (k-n+1)`` times the stationary mass of S_0."""
    return q * mu * (kernel.k - kernel.n + 1) * busy_mass(kernel, pi)


def mean_drift(kernel: TransitionKernel, pi: np.ndarray, V: np.ndarray) -> float:
    """``E[V(Q_{t+1}) - V(Q_t)]`` under ``pi`` for a test function tabulated on the states."""
    return float(pi @ (kernel.matrix @ V - V))


def busy_mass_closed_form(k: int, n: int) -> float:
    return k / (n * (k - n + 1))


def npartite_metrics(k: int, n: int, mu: float = 1.0, q: float = 1.0) -> PerformanceMetrics:
    """Capacity ``q mu k / n`` and expected total storage ``(n-1) k / (2 (k-n))``."""
    if n < 2 or int(n) != n:
        raise InvalidParameterError(f"n must be an integer >= 2, got {n}")
    if not mu > 0 or not 0 <= q <= 1:
        raise InvalidParameterError("need mu > 0 and q in [0, 1]")
    if k <= n:
        raise InstabilityError(f"k={k} <= n={n}: expected storage is unbounded")
    notes = ()
    if n >= 4:
        notes = ("stability for n >= 4 is conjectured, not proven",)
        warnings.warn(notes[0], ConjecturedStabilityWarning, stacklevel=2)
    cap = q * mu * k / n
    eq = (n - 1) * k / (2 * (k - n))
    return PerformanceMetrics(cap, eq, (n * cap / k,) * k, (eq / k,) * k, notes)


@dataclass(frozen=True)
class DriftQuantities:
    Mx: Fraction
    My: Fraction
    Mpx: Fraction
    Mpy: Fraction
    Mppx: Fraction
    Mppy: Fraction


@dataclass(frozen=True)
class MalyshevResult:
    drift: DriftQuantities
    ergodic: bool
    applicable: bool


def _mean_jumps(state, k):
    row = kernel_row(state, k, 3, exact=True)
    dx = sum(((t[0] - state[0]) * p for t, p in row), Fraction(0))
    dy = sum(((t[1] - state[1]) * p for t, p in row), Fraction(0))
    return dx, dy


def drift_quantities(k: int) -> DriftQuantities:
    """Mean jumps of the n = 3 chain in the interior and on each axis, read off the kernel rows."""
    if k < 3:
        raise InvalidParameterError(f"tripartite switch needs k >= 3, got {k}")
    regions = {
        "interior": [(1, 1), (1, 4), (3, 1), (5, 7)],
        "x_axis": [(1, 0), (6, 0)],
        "y_axis": [(0, 1), (0, 6)],
    }
    jumps = {}
    for name, states in regions.items():
        values = {_mean_jumps(s, k) for s in states}
        if len(values) != 1:
            raise NumericError(f"mean jump is not constant over the {name} region: {values}")
        jumps[name] = values.pop()
    (mx, my), (mpx, mpy), (mppx, mppy) = jumps["interior"], jumps["x_axis"], jumps["y_axis"]
    return DriftQuantities(mx, my, mpx, mpy, mppx, mppy)


def malyshev_check(k: int) -> MalyshevResult:
    """Ergodicity of the tripartite chain by the quarter-plane mean-drift criterion."""
    d = drift_quantities(k)
    applicable = (d.Mx, d.My) != (0, 0)
    cross_x = d.Mx * d.Mpy - d.My * d.Mpx
    cross_y = d.My * d.Mppx - d.Mx * d.Mppy
    ergodic = applicable and (
        (d.Mx < 0 and d.My < 0 and cross_x < 0 and cross_y < 0)
        or (d.Mx < 0 and d.My >= 0 and cross_y < 0)
        or (d.Mx >= 0 and d.My < 0 and cross_x < 0)
    )
    return MalyshevResult(d, bool(ergodic), applicable)
