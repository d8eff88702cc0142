"""Acceptance checks, one test per criterion, each printing a PASS/FAIL line.

The lines are collected in ``RESULTS`` and repeated at the end of the pytest
run by ``conftest.py``.
"""
import time
import warnings
from fractions import Fraction

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oracles import birth_death
from qswitch import INF, ConjecturedStabilityWarning, SwitchConfig
from qswitch.ctmc import (
    capacity_general_sum,
    decoherence_capacity_drop,
    homogeneous_pi0,
    metrics_bipartite,
    metrics_from_stationary,
    stationary_bipartite,
)
from qswitch.dtmc import boundary_kernel_identity, dtmc_metrics, f_beta, max_rel_err_eq, solve_beta
from qswitch.npartite import (
    build_uniformized_kernel,
    busy_mass,
    drift_quantities,
    expected_total,
    malyshev_check,
    npartite_metrics,
    stationary_truncated,
    uniformized_capacity,
)
from qswitch.sim import SimParams, run_ctmc_sim, run_slotted_sim

RESULTS = {}


def report(number, ok, detail, elapsed, limit=None):
    in_time = limit is None or elapsed < limit
    budget = f" of {limit:g}s" if limit is not None else ""
    line = f"criterion {number}: {'PASS' if ok and in_time else 'FAIL'}  {detail}  [{elapsed:.2f}s{budget}]"
    RESULTS[number] = line
    print(line)
    assert ok, line
    assert in_time, line


def rel(a, b):
    return abs(a - b) / abs(b)


def within(stats_est, stats_ci, target, width=3.0):
    return abs(stats_est - target) <= width * stats_ci


def test_homogeneous_closed_forms():
    start = time.perf_counter()
    worst = 0.0
    for k in (3, 4, 10, 25):
        pi, cap, eq = birth_death(k, cap=500)
        cfg = SwitchConfig.homogeneous(k)
        m = metrics_bipartite(cfg)
        assert homogeneous_pi0(cfg) == (k - 2) / (2 * (k - 1))
        worst = max(worst, rel(homogeneous_pi0(cfg), pi[0]), rel(m.capacity, cap), rel(m.expected_queue, eq))
    eq25 = metrics_bipartite(SwitchConfig.homogeneous(25)).expected_queue
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and round(eq25, 4) == 0.5435
    report(1, ok, f"max rel err {worst:.1e}, E[Q](k=25) = {eq25:.4f}", elapsed, 1.0)


def test_heterogeneous_capacity_identity():
    rng = np.random.default_rng(20240)
    start = time.perf_counter()
    worst = 0.0
    found = 0
    while found < 50:
        k = int(rng.integers(3, 11))
        rates = rng.uniform(0.05, 10.0, k)
        if rates.max() >= rates.sum() - rates.max():
            continue
        found += 1
        q = float(rng.uniform(0.05, 1.0))
        cfg = SwitchConfig.from_rates(rates.tolist(), q=q)
        half = q * cfg.gamma / 2
        m = metrics_from_stationary(cfg, stationary_bipartite(cfg))
        per_user = np.array(m.per_user_rate)
        worst = max(
            worst,
            rel(capacity_general_sum(cfg), half),
            float(np.max(np.abs(per_user - q * rates) / (q * rates))),
            rel(per_user.sum(), 2 * m.capacity),
        )
    elapsed = time.perf_counter() - start
    report(2, worst < 1e-10, f"50 stable vectors, max rel err {worst:.1e}", elapsed, 1.0)


def test_slotted_and_continuous_capacity_match():
    start = time.perf_counter()
    cap_gap = root_res = ident_res = 0.0
    tau = 1.0
    for p in np.round(np.arange(0.1, 1.0, 0.1), 1):
        for k in (3, 10, 20, 50):
            slotted = dtmc_metrics(p, k, tau=tau).capacity
            continuous = metrics_bipartite(SwitchConfig.homogeneous(k, p / tau)).capacity
            beta = solve_beta(p, k)
            cap_gap = max(cap_gap, abs(slotted - continuous))
            root_res = max(root_res, abs(f_beta(beta, p, k)))
            ident_res = max(ident_res, abs(boundary_kernel_identity(p, k, beta)))
    elapsed = time.perf_counter() - start
    ok = cap_gap < 1e-12 and root_res < 1e-12 and ident_res < 1e-9
    report(3, ok, f"capacity gap {cap_gap:.1e}, |f(root)| {root_res:.1e}, identity {ident_res:.1e}", elapsed)


def test_max_relative_error_curve():
    start = time.perf_counter()
    grid = np.linspace(0.001, 0.999, 999)
    errs = [max_rel_err_eq(k, grid) for k in (3, 10, 20, 50)]
    elapsed = time.perf_counter() - start
    ok = 1.8 <= errs[0] <= 2.05 and all(a > b for a, b in zip(errs, errs[1:]))
    report(4, ok, "maxRelErr " + ", ".join(f"{e:.4f}" for e in errs), elapsed, 5.0)


def test_simulation_matches_analytics():
    cases = [
        ("k=3", SwitchConfig.homogeneous(3), 2e6),
        ("k=3 B=1", SwitchConfig.homogeneous(3, buffer=1), 1e6),
        ("rates 1.9,1,1", SwitchConfig.from_rates([1.9, 1, 1]), 1.5e8),
        ("k=5 alpha=mu", SwitchConfig.homogeneous(5, alpha=1.0), 1e6),
    ]
    start = time.perf_counter()
    ok = True
    parts = []
    for label, cfg, horizon in cases:
        ref = metrics_bipartite(cfg)
        s = run_ctmc_sim(SimParams(cfg, horizon, seed=1, batches=20))
        case_ok = (
            s.events >= 1e6
            and within(s.capacity_est, s.capacity_ci, ref.capacity)
            and within(s.eq_est, s.eq_ci, ref.expected_queue)
            and s.capacity_ci < 0.01 * s.capacity_est
            and s.eq_ci < 0.01 * s.eq_est
        )
        ok &= case_ok
        parts.append(f"{label} C {s.capacity_est:.4f}/{ref.capacity:.4f} E[Q] {s.eq_est:.4f}/{ref.expected_queue:.4f}")
    continuous_elapsed = time.perf_counter() - start

    slotted_cfg = SwitchConfig.homogeneous(3, success_prob_p=0.5)
    s = run_slotted_sim(SimParams(slotted_cfg, 1_000_000, seed=1, batches=20))
    ref_eq = dtmc_metrics(0.5, 3).expected_queue
    slotted_ok = within(s.capacity_est, s.capacity_ci, 0.75, 1.0) and within(s.eq_est, s.eq_ci, ref_eq, 1.0)
    parts.append(f"slotted C {s.capacity_est:.4f}/0.75 E[Q] {s.eq_est:.4f}/{ref_eq:.4f}")
    elapsed = time.perf_counter() - start
    # the time budget covers the continuous runs
    parts.append(f"continuous runs {continuous_elapsed:.1f}s of 60s")
    report(5, ok and slotted_ok and continuous_elapsed < 60.0, "; ".join(parts), elapsed)


def test_multipartite_truncated_solution():
    start = time.perf_counter()
    ok = True
    parts = []
    for k, n in ((4, 3), (5, 3), (6, 4)):
        K = build_uniformized_kernel(k, n, cap=40)
        pi = stationary_truncated(K)
        busy = busy_mass(K, pi)
        total = expected_total(K, pi)
        cap = uniformized_capacity(K, pi)
        ok &= abs(busy - k / (n * (k - n + 1))) < 2e-3
        ok &= rel(total, (n - 1) * k / (2 * (k - n))) < 0.02
        ok &= rel(cap, k / n) < 0.01
        parts.append(f"({k},{n}) busy {busy:.4f} E|Q| {total:.3f} C {cap:.4f}")
    cfg = SwitchConfig.homogeneous(4, n=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConjecturedStabilityWarning)
        ref = npartite_metrics(4, 3)
    s = run_ctmc_sim(SimParams(cfg, 1e6, seed=1, batches=20))
    ok &= within(s.capacity_est, s.capacity_ci, ref.capacity) and within(s.eq_est, s.eq_ci, ref.expected_queue)
    parts.append(f"sim (4,3) C {s.capacity_est:.4f} E[Q] {s.eq_est:.3f}")
    elapsed = time.perf_counter() - start
    report(6, ok, "; ".join(parts), elapsed, 120.0)


def test_ergodicity_checker():
    start = time.perf_counter()
    ok = True
    for k in range(4, 1001):
        d = drift_quantities(k)
        ok &= d.Mx == d.My == Fraction(-(k - 3), k)
        ok &= (d.Mpx, d.Mpy, d.Mppx, d.Mppy) == (Fraction(1, k), Fraction(k - 1, k), Fraction(k - 1, k), Fraction(1, k))
        ok &= malyshev_check(k).ergodic
    three = malyshev_check(3)
    ok &= not three.applicable
    elapsed = time.perf_counter() - start
    report(7, ok, "k = 4..1000 ergodic with exact drifts, k = 3 inapplicable", elapsed, 1.0)


def test_decoherence_capacity_drop():
    start = time.perf_counter()
    c0, c1 = decoherence_capacity_drop(SwitchConfig.from_rates([35, 15, 15, 3, 3], buffer=100), 14.2)
    h0, h1 = decoherence_capacity_drop(SwitchConfig.homogeneous(5, 14.2, buffer=100), 14.2)
    elapsed = time.perf_counter() - start
    hetero, homog = c0 - c1, h0 - h1
    ok = abs(hetero - 7.35) <= 0.15 and abs(homog - 4.54) <= 0.10
    report(8, ok, f"heterogeneous drop {hetero:.3f}, homogeneous drop {homog:.3f}", elapsed, 10.0)


def test_buffer_convergence():
    start = time.perf_counter()
    ok = True
    gaps = {}
    for k in range(3, 51):
        unlimited = metrics_bipartite(SwitchConfig.homogeneous(k)).capacity
        caps = [metrics_bipartite(SwitchConfig.homogeneous(k, buffer=b)).capacity for b in range(1, 51)]
        # strictly increasing until the values agree with the limit to machine precision
        ok &= all(a < b or rel(a, unlimited) < 1e-14 for a, b in zip(caps, caps[1:]))
        ok &= rel(caps[-1], unlimited) < 1e-6
        for b in range(1, 6):
            gaps[(k, b)] = (unlimited - caps[b - 1]) / caps[b - 1]
    worst = max(gaps, key=gaps.get)
    ok &= abs(gaps[worst] - 0.25) <= 0.01 and worst == (3, 1)
    elapsed = time.perf_counter() - start
    report(9, ok, f"largest gap {gaps[worst]:.4f} at (k, B) = {worst}", elapsed)


continuous_configs = st.builds(
    lambda k, n_off, rates, buffer, q, alpha: SwitchConfig.from_rates(
        rates[:k], n=min(2 + n_off, k), buffer=buffer, q=q, alpha=alpha
    ),
    st.integers(2, 8),
    st.integers(0, 3),
    st.lists(st.floats(0.1, 5.0), min_size=8, max_size=8),
    st.one_of(st.just(INF), st.integers(1, 8)),
    st.sampled_from([0.0, 0.3, 1.0]),
    st.sampled_from([0.0, 0.2, 2.0]),
)
slotted_configs = st.builds(
    lambda k, probs, buffer: SwitchConfig.from_rates([1.0] * k, success_prob_p=tuple(probs[:k]), buffer=buffer),
    st.integers(2, 8),
    st.lists(st.floats(0.01, 0.99), min_size=8, max_size=8),
    st.one_of(st.just(INF), st.integers(1, 8)),
)
simulator_cases = st.one_of(
    st.tuples(st.just("continuous"), continuous_configs),
    st.tuples(st.just("slotted"), slotted_configs),
)


def test_simulator_invariants():
    checked = []

    @settings(max_examples=100, derandomize=True, deadline=None, database=None,
              suppress_health_check=[HealthCheck.too_slow])
    @given(simulator_cases, st.integers(0, 2**64 - 1))
    def check(case, seed):
        engine, cfg = case
        run = run_ctmc_sim if engine == "continuous" else run_slotted_sim
        params = SimParams(cfg, 2000.0, seed=seed, check_invariants=True)
        s = run(params)
        assert s.invariant_violations == 0
        assert s.max_nonempty <= cfg.n - 1
        assert s.conserved
        assert s.measurements_succeeded <= s.measurements_attempted
        if cfg.buffer != INF:
            assert s.max_occupancy <= (cfg.n - 1) * cfg.buffer
        assert run(params) == s
        checked.append(engine)

    start = time.perf_counter()
    failure = None
    try:
        check()
    except AssertionError as exc:
        failure = exc
    elapsed = time.perf_counter() - start
    detail = f"{len(checked)} configurations ({checked.count('slotted')} slotted)"
    if failure is not None:
        detail += f", falsified: {failure}"
    report(10, failure is None and len(checked) >= 100, detail, elapsed, 120.0)
