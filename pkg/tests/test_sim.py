import math
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oracles import slotted_chain
from qswitch import INF, ConjecturedStabilityWarning, InvalidParameterError, SwitchConfig, UnsupportedModelError
from qswitch.ctmc import metrics_bipartite
from qswitch.dtmc import dtmc_metrics
from qswitch.npartite import npartite_metrics
from qswitch.sim import SimParams, replicate, replication_seed, run_ctmc_sim, run_slotted_sim


def within(estimate, ci, target, width=3.0):
    return abs(estimate - target) <= width * ci


@pytest.mark.parametrize("cfg", [
    SwitchConfig.homogeneous(3),
    SwitchConfig.homogeneous(3, buffer=1),
    SwitchConfig.from_rates([1.9, 1, 1], buffer=5),
    SwitchConfig.homogeneous(5, alpha=1.0),
    SwitchConfig.from_rates([3, 2, 1, 1], buffer=3, alpha=0.4, q=0.6),
])
def test_bipartite_agreement(cfg):
    ref = metrics_bipartite(cfg)
    s = run_ctmc_sim(SimParams(cfg, 4e5 / cfg.gamma * 2, seed=11))
    assert within(s.capacity_est, s.capacity_ci, ref.capacity)
    assert within(s.eq_est, s.eq_ci, ref.expected_queue)


@pytest.mark.parametrize("k, n", [(4, 3), (5, 3), (6, 4)])
def test_multipartite_agreement(k, n):
    cfg = SwitchConfig.homogeneous(k, n=n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConjecturedStabilityWarning)
        ref = npartite_metrics(k, n)
    s = run_ctmc_sim(SimParams(cfg, 4e5, seed=5, check_invariants=True))
    assert within(s.capacity_est, s.capacity_ci, ref.capacity)
    assert within(s.eq_est, s.eq_ci, ref.expected_queue)
    assert s.max_nonempty <= n - 1 and s.invariant_violations == 0


def test_zero_q_never_succeeds():
    s = run_ctmc_sim(SimParams(SwitchConfig.homogeneous(3, q=0.0), 1e4, seed=1))
    assert s.capacity_est == 0.0 and s.measurements_succeeded == 0
    assert s.measurements_attempted > 0


def test_q_scales_capacity():
    a = run_ctmc_sim(SimParams(SwitchConfig.homogeneous(3, q=0.25), 2e5, seed=2))
    b = run_ctmc_sim(SimParams(SwitchConfig.homogeneous(3, q=0.5), 2e5, seed=2))
    assert b.capacity_est / a.capacity_est == pytest.approx(2.0, rel=0.03)


def test_same_seed_same_stats():
    params = SimParams(SwitchConfig.from_rates([2, 1, 1, 1], n=3, buffer=4, alpha=0.3), 2e4, seed=99)
    assert run_ctmc_sim(params) == run_ctmc_sim(params)
    other = run_ctmc_sim(SimParams(params.config, params.horizon, seed=100))
    assert other != run_ctmc_sim(params)


def test_single_replication_is_the_plain_run():
    params = SimParams(SwitchConfig.homogeneous(3), 1e4, seed=7)
    assert replicate(params, 1) == run_ctmc_sim(params)


def test_seed_splitting_rule():
    assert replication_seed(12345, 0) == 12345
    assert replication_seed(0, 1) == 0x9E3779B97F4A7C15
    assert replication_seed(2**64 - 1, 3) < 2**64
    assert len({replication_seed(7, i) for i in range(1000)}) == 1000


def test_ci_shrinks_with_replications():
    params = SimParams(SwitchConfig.homogeneous(3), 2e4, seed=3)
    few = replicate(params, 4)
    many = replicate(params, 16)
    assert many.replications == 16 and len(many.batch_capacity) == 16 * params.batches
    assert few.capacity_ci / many.capacity_ci == pytest.approx(2.0, rel=0.4)
    assert few.eq_ci / many.eq_ci == pytest.approx(2.0, rel=0.4)


def test_homogeneous_links_are_served_equally():
    s = run_ctmc_sim(SimParams(SwitchConfig.homogeneous(4), 2e5, seed=8))
    rates = np.array(s.per_user_rate_est)
    assert np.ptp(rates) < 0.02 * rates.mean()


def test_buffer_evictions_are_counted():
    s = run_ctmc_sim(SimParams(SwitchConfig.from_rates([3, 1, 1], buffer=2), 1e4, seed=4, check_invariants=True))
    assert s.drops > 0 and s.invariant_violations == 0 and s.max_occupancy <= 2
    assert s.conserved


def test_decoherence_is_counted():
    s = run_ctmc_sim(SimParams(SwitchConfig.homogeneous(3, alpha=2.0), 1e4, seed=4))
    assert s.decohered > 0 and s.conserved


configs = st.builds(
    lambda k, n_off, rates, buffer, q, alpha: SwitchConfig.from_rates(
        rates[:k], n=min(2 + n_off, k), buffer=buffer, q=q, alpha=alpha
    ),
    st.integers(2, 6),
    st.integers(0, 3),
    st.lists(st.floats(0.1, 5.0), min_size=6, max_size=6),
    st.one_of(st.just(INF), st.integers(1, 6)),
    st.sampled_from([0.0, 0.5, 1.0]),
    st.sampled_from([0.0, 0.2, 2.0]),
)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(configs, st.integers(0, 2**64 - 1))
def test_invariants_on_random_configs(cfg, seed):
    params = SimParams(cfg, 300.0, seed=seed, check_invariants=True)
    s = run_ctmc_sim(params)
    assert s.invariant_violations == 0
    assert s.max_nonempty <= cfg.n - 1
    assert s.conserved
    assert s.measurements_succeeded <= s.measurements_attempted
    if cfg.buffer != INF:
        assert s.max_occupancy <= (cfg.n - 1) * cfg.buffer
    assert sum(s.per_user_rate_est) == pytest.approx(cfg.n * s.capacity_est, rel=1e-12, abs=1e-12)
    assert run_ctmc_sim(params) == s


@pytest.mark.parametrize("kwargs", [
    {"horizon": 0.0},
    {"horizon": -1.0},
    {"horizon": math.inf},
    {"batches": 5},
    {"warmup_fraction": 1.0},
    {"seed": -1},
    {"seed": 2**64},
])
def test_params_validation(kwargs):
    base = {"config": SwitchConfig.homogeneous(3), "horizon": 10.0}
    with pytest.raises(InvalidParameterError):
        SimParams(**{**base, **kwargs})


def test_replications_must_be_positive():
    with pytest.raises(InvalidParameterError):
        replicate(SimParams(SwitchConfig.homogeneous(3), 10.0), 0)


# ---- slotted engine ---------------------------------------------------------

def test_slotted_three_links_half_probability():
    s = run_slotted_sim(SimParams(SwitchConfig.homogeneous(3, success_prob_p=0.5), 1_000_000, seed=1,
                                  check_invariants=True))
    ref = dtmc_metrics(0.5, 3)
    assert within(s.capacity_est, s.capacity_ci, 0.75)
    assert within(s.eq_est, s.eq_ci, ref.expected_queue)
    assert s.max_nonempty == 1 and s.invariant_violations == 0 and s.conserved


@pytest.mark.parametrize("p, k, buffer", [(0.5, 3, 2), (0.3, 5, 1), (0.7, 4, INF)])
def test_slotted_matches_chain_oracle(p, k, buffer):
    pi, rate = slotted_chain(p, k, cap=300, buffer=buffer, with_rate=True)
    s = run_slotted_sim(SimParams(SwitchConfig.homogeneous(k, success_prob_p=p, buffer=buffer), 600_000, seed=2))
    assert within(s.capacity_est, s.capacity_ci, rate)
    assert within(s.eq_est, s.eq_ci, float(np.arange(len(pi)) @ pi))


def test_slotted_capacity_is_per_second():
    cfg = SwitchConfig.homogeneous(3, success_prob_p=0.5, slot_tau=1e-3)
    s = run_slotted_sim(SimParams(cfg, 200_000, seed=3))
    assert within(s.capacity_est, s.capacity_ci, 750.0)


def test_slotted_heterogeneous_runs():
    cfg = SwitchConfig.from_rates([1, 1, 1, 1], success_prob_p=(0.9, 0.2, 0.2, 0.1), buffer=3)
    s = run_slotted_sim(SimParams(cfg, 50_000, seed=4, check_invariants=True))
    assert s.invariant_violations == 0 and s.conserved and s.max_occupancy <= 3
    assert sum(s.per_user_rate_est) == pytest.approx(2 * s.capacity_est)


def test_slotted_uses_fibre_probabilities():
    from qswitch import LinkConfig
    cfg = SwitchConfig(tuple(LinkConfig.from_length(20.0) for _ in range(3)))
    s = run_slotted_sim(SimParams(cfg, 20_000, seed=5))
    assert s.generated > 0


def test_slotted_determinism():
    params = SimParams(SwitchConfig.homogeneous(5, success_prob_p=0.4), 20_000, seed=6)
    assert run_slotted_sim(params) == run_slotted_sim(params)
    assert replicate(params, 3, engine="slotted") == replicate(params, 3, engine="slotted")


@pytest.mark.parametrize("kwargs, error", [
    ({"n": 3, "success_prob_p": 0.5}, UnsupportedModelError),
    ({"alpha": 0.5, "success_prob_p": 0.5}, UnsupportedModelError),
    ({}, InvalidParameterError),
])
def test_slotted_rejections(kwargs, error):
    with pytest.raises(error):
        run_slotted_sim(SimParams(SwitchConfig.homogeneous(4, **kwargs), 1000))


def test_slotted_needs_enough_slots():
    with pytest.raises(InvalidParameterError):
        run_slotted_sim(SimParams(SwitchConfig.homogeneous(3, success_prob_p=0.5), 15))
