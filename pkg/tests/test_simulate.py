import math
from fractions import Fraction

import numpy as np
import pytest

from helpers import random_reversible_spec
from metastab import (ChainSpec, MetaPartition, PathSample, ValleySpec, build_chain, builtin,
                      empirical_meta_rates, exit_law_experiment, hitting_probability,
                      ks_exponential_test, project_path, sample_path, stationary_measure,
                      trace_by_hitting)
from metastab.errors import AbsorbedBeforeTarget, StartsInAnnulus, TooFewSamples


def two_state(a=1.0, b=1.0):
    return build_chain(ChainSpec(("a", "b"), {("a", "b"): a, ("b", "a"): b}))


def test_two_state_alternates():
    p = sample_path(two_state(), "a", horizon=50.0, seed=3)
    assert all(s != t for s, t in zip(p.states, p.states[1:]))
    assert p.times[0] == 0.0 and p.horizon == 50.0
    assert all(t0 < t1 for t0, t1 in zip(p.times, p.times[1:]))
    assert p.stop_reason == "horizon"


def test_seed_determinism_and_streams():
    c = build_chain(random_reversible_spec(np.random.default_rng(60), 8)[0])
    a = sample_path(c, 0, horizon=20.0, seed=5, stream=2)
    b = sample_path(c, 0, horizon=20.0, seed=5, stream=2)
    d = sample_path(c, 0, horizon=20.0, seed=5, stream=3)
    assert a == b
    assert a.times != d.times


def test_hit_target_records_end_state():
    c = build_chain(ChainSpec((0, 1, 2), {(0, 1): 1.0, (1, 0): 1.0, (1, 2): 1.0, (2, 1): 1.0}))
    p = sample_path(c, 0, target={2}, seed=1)
    assert p.stop_reason == "hit-target" and p.end_state == 2
    assert 2 not in p.states
    assert p.hitting_time({2}) == p.horizon


def test_start_in_target_rejected():
    with pytest.raises(ValueError):
        sample_path(two_state(), "a", target={"a"})


def test_ergodic_occupation_matches_stationary():
    rng = np.random.default_rng(61)
    c = build_chain(random_reversible_spec(rng, 5, spread=1.0)[0])
    mu = stationary_measure(c)
    p = sample_path(c, 0, horizon=2e4, seed=0)
    frac = np.array([p.occupation({s}) for s in c.states]) / p.horizon
    assert np.allclose(frac, mu.mu, atol=0.02)


def test_absorbed_before_target():
    c = build_chain(ChainSpec((0, 1, 2), {(0, 1): 1.0, (1, 0): 1.0, (1, 2): 1.0}),
                    simulation_only=True)
    with pytest.raises(AbsorbedBeforeTarget):
        for k in range(100):
            sample_path(c, 1, target={0}, seed=k)
    p = sample_path(c, 0, horizon=1e3, seed=0, allow_absorption=True)
    assert p.states[-1] == 2 and p.horizon == 1e3


def test_hitting_frequency_matches_solver():
    rng = np.random.default_rng(62)
    c = build_chain(random_reversible_spec(rng, 6, spread=1.0)[0])
    f = hitting_probability(c, {0}, {5})
    reps = 4000
    hits = 0
    for r in range(reps):
        p = sample_path(c, 2, target={0, 5}, seed=7, stream=r)
        hits += p.end_state == 0
    se = math.sqrt(f[2] * (1 - f[2]) / reps)
    assert abs(hits / reps - f[2]) <= 4 * se


def test_trace_path_rates_match_trace_chain():
    # jump counts over occupation on F estimate the trace rates
    c = build_chain(ChainSpec((0, 1, 2), {(0, 1): 1.0, (1, 0): 2.0, (1, 2): 1.0, (2, 1): 0.5}))
    tr = trace_by_hitting(c, [0, 2])
    part = MetaPartition({"l": {0}, "r": {2}}, {"l": 0, "r": 2})
    est = empirical_meta_rates(c, part, theta=1.0, horizon=2000.0, reps=4, seed=0)
    for (x, y), s, t in [(("l", "r"), 0, 2), (("r", "l"), 2, 0)]:
        assert abs(est.rates[(x, y)] - tr.rate(s, t)) <= 4 * est.stderr[(x, y)]


def _p(states, durations):
    times = [0.0]
    for d in durations:
        times.append(times[-1] + d)
    return PathSample(tuple(states), tuple(times), "horizon")


PART = MetaPartition({1: {"a"}, 2: {"b"}}, {1: "a", 2: "b"})


def test_projection_variants():
    p = _p(["a", "d", "b"], [1.0, 0.5, 2.0])
    tr = project_path(p, PART, "trace")
    assert tr.labels == (1, 2)
    assert [float(d) for _, d in tr.segments] == [1.0, 2.0]
    lv = project_path(p, PART, "last-visit")
    assert lv.labels == (1, 2)
    assert [float(d) for _, d in lv.segments] == [1.5, 2.0]


def test_projection_difference_is_annulus_time():
    rng = np.random.default_rng(63)
    states = ["a"] + [str(s) for s in rng.choice(["a", "b", "d", "e"], 300)]
    states = [s for k, s in enumerate(states) if k == 0 or s != states[k - 1]]
    p = _p(states, rng.exponential(size=len(states)).tolist())
    tr = project_path(p, PART, "trace")
    lv = project_path(p, PART, "last-visit")
    assert lv.duration - tr.duration == p.exact_occupation({"d", "e"})
    assert isinstance(tr.duration, Fraction)


def test_last_visit_starts_in_annulus():
    with pytest.raises(StartsInAnnulus):
        project_path(_p(["d", "a"], [1.0, 1.0]), PART, "last-visit")


def test_ks_calibration():
    rng = np.random.default_rng(64)
    res = ks_exponential_test(rng.exponential(size=2000))
    assert res.p_value > 0.01
    assert res.n == 2000


def test_ks_rejects_wrong_mean():
    rng = np.random.default_rng(65)
    assert ks_exponential_test(rng.exponential(0.5, size=2000)).p_value < 1e-6


def test_ks_constant_sample():
    res = ks_exponential_test(np.ones(100))
    assert res.statistic == pytest.approx(1 - math.exp(-1), rel=1e-12)
    assert res.p_value < 1e-10


def test_ks_statistic_matches_scipy():
    from scipy.stats import kstest

    x = np.random.default_rng(66).exponential(size=300)
    assert ks_exponential_test(x).statistic == pytest.approx(kstest(x, "expon").statistic, rel=1e-12)


def test_ks_too_few_samples():
    with pytest.raises(TooFewSamples):
        ks_exponential_test(np.ones(29))


def test_ex8_attractor_rarely_first():
    fx = builtin("ex8")
    st = exit_law_experiment(fx.family.chain(100), fx.valleys[0], 1.0, reps=2000, seed=0, start=2)
    assert st.attractor_first_frequency <= 0.03


def test_exit_law_validation():
    fx = builtin("ex6")
    c = fx.family.chain(10)
    with pytest.raises(ValueError):
        exit_law_experiment(c, fx.valleys[0], 0.0)
    with pytest.raises(ValueError):
        exit_law_experiment(c, fx.valleys[0], 1.0, start=3)


def test_exit_law_small_run_mean():
    # two-state basin {a}: exit time from a is Exp(1) exactly
    c = two_state()
    st = exit_law_experiment(c, ValleySpec({"a"}, {"a"}, "a"), 1.0, reps=3000, seed=2)
    assert abs(st.mean_exit_time - 1) <= 4 / math.sqrt(3000)
    assert st.ks.p_value > 0.001
    assert st.attractor_first_frequency == 1.0
    assert st.max_delta_occupation == 0.0


@pytest.mark.slow
def test_ex6_exit_law():
    fx = builtin("ex6")
    st = exit_law_experiment(fx.family.chain(100), fx.valleys[0], 2.0, reps=10_000, seed=0)
    assert 0.97 <= st.mean_exit_time <= 1.03


def test_meta_rate_report_labelled():
    fx = builtin("ex7")
    est = empirical_meta_rates(fx.family.chain(10), fx.partition, theta=10.0, reps=5, seed=0)
    d = est.as_dict()
    assert "consistency check" in d["note"]
    assert d["rng"].startswith("PCG64")
