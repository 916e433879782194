import math

import numpy as np
import pytest

from helpers import (dense_integral, exact_additive, exact_generator, exact_hitting,
                     exact_stationary, float_spec, random_rational_reversible, random_spec)
from metastab import (ChainSpec, additive_until_hitting, build_chain, escape_probability,
                      expected_additive_until_hitting, hitting_probability, stationary_measure,
                      transient_functional, transient_functional_vector)
from metastab.errors import (InvalidSpec, NotIrreducible, OverlappingSets, SimulationOnly,
                             SolverFailure, UnknownState, ZeroHoldingRate)


def two_state(a=1.0, b=1.0):
    return build_chain(ChainSpec(("a", "b"), {("a", "b"): a, ("b", "a"): b}))


def test_spec_drops_zero_rates():
    s = ChainSpec((0, 1, 2), {(0, 1): 1.0, (1, 0): 2.0, (1, 2): 0.0})
    assert s.rates == {(0, 1): 1.0, (1, 0): 2.0}


@pytest.mark.parametrize("rates, err", [
    ({(0, 2): 1.0}, UnknownState),
    ({(0, 0): 1.0}, InvalidSpec),
    ({(0, 1): -1.0}, InvalidSpec),
    ({(0, 1): math.inf}, InvalidSpec),
    ({(0, 1): math.nan}, InvalidSpec),
])
def test_spec_rejects(rates, err):
    with pytest.raises(err):
        ChainSpec((0, 1), rates)


def test_duplicate_states():
    with pytest.raises(InvalidSpec):
        ChainSpec((0, 0), {})


def test_self_loop_message_is_diagnostic():
    with pytest.raises(InvalidSpec, match="self-loop"):
        ChainSpec((0, 1), {(0, 0): 1.0})


def test_zero_holding_rate():
    with pytest.raises(ZeroHoldingRate):
        build_chain(ChainSpec((0, 1, 2), {(0, 1): 1.0, (1, 0): 1.0, (0, 2): 1.0}))


def test_not_irreducible_reports_components():
    spec = ChainSpec((0, 1, 2, 3), {(0, 1): 1.0, (1, 0): 1.0, (2, 3): 1.0, (3, 2): 1.0})
    with pytest.raises(NotIrreducible) as info:
        build_chain(spec)
    assert len(info.value.components) == 2


def test_simulation_only_allows_absorbing():
    spec = ChainSpec((0, 1), {(0, 1): 1.0})
    chain = build_chain(spec, simulation_only=True)
    assert chain.holding[1] == 0
    with pytest.raises(SimulationOnly):
        stationary_measure(chain)


def test_holding_and_jump():
    c = build_chain(ChainSpec((0, 1, 2), {(0, 1): 1.0, (0, 2): 3.0, (1, 0): 2.0, (2, 0): 1.0}))
    assert c.holding.tolist() == [4.0, 2.0, 1.0]
    assert c.p(0, 2) == pytest.approx(0.75)
    assert np.allclose(np.asarray(c.jump.sum(axis=1)).ravel(), 1.0)
    assert not c.holding.flags.writeable


def test_two_state_stationary():
    mu = stationary_measure(two_state(1.0, 3.0))
    assert mu.mu.tolist() == pytest.approx([0.75, 0.25], rel=1e-14)
    assert mu.reversible


def test_stationary_matches_exact_oracle():
    rng = np.random.default_rng(1)
    for _ in range(10):
        n = int(rng.integers(3, 9))
        rates, _ = random_rational_reversible(rng, n)
        L = exact_generator(n, rates)
        exact = np.array([float(x) for x in exact_stationary(L)])
        mu = stationary_measure(build_chain(float_spec(n, rates)))
        assert np.allclose(mu.mu, exact, rtol=1e-12, atol=0)


def test_stationary_nonreversible_flagged():
    # directed 3-cycle: uniform invariant law but no detailed balance
    c = build_chain(ChainSpec((0, 1, 2), {(0, 1): 1.0, (1, 2): 1.0, (2, 0): 1.0}))
    mu = stationary_measure(c)
    assert mu.mu == pytest.approx([1 / 3] * 3)
    assert not mu.reversible
    assert mu.residual <= 1e-12


def test_stationary_wide_rate_range():
    # rates spanning 12 orders of magnitude remain accurate through the jump chain
    N = 1e4
    c = build_chain(ChainSpec((0, 1, 2), {(0, 1): N ** -3, (1, 0): 1.0, (1, 2): 1.0, (2, 1): N ** -1}))
    mu = stationary_measure(c)
    m = np.array([N ** 3, 1.0, N])
    assert np.allclose(mu.mu, m / m.sum(), rtol=1e-10)


def test_hitting_probability_oracle():
    rng = np.random.default_rng(2)
    for _ in range(10):
        n = int(rng.integers(4, 9))
        rates, _ = random_rational_reversible(rng, n)
        L = exact_generator(n, rates)
        A, B = {0}, {n - 1, n - 2}
        f = hitting_probability(build_chain(float_spec(n, rates)), A, B)
        assert np.allclose(f, [float(x) for x in exact_hitting(L, A, B)], rtol=1e-12, atol=1e-14)


def test_hitting_probability_errors():
    c = two_state()
    with pytest.raises(OverlappingSets):
        hitting_probability(c, {"a"}, {"a"})
    with pytest.raises(UnknownState):
        hitting_probability(c, {"z"}, {"a"})


def test_additive_functional_oracle():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(3, 9))
        rates, _ = random_rational_reversible(rng, n)
        L = exact_generator(n, rates)
        g = [int(v) for v in rng.integers(0, 5, n)]
        u = additive_until_hitting(build_chain(float_spec(n, rates)), np.array(g, float), {0})
        assert np.allclose(u, [float(x) for x in exact_additive(L, g, {0})], rtol=1e-11)


def test_expected_hitting_time_ex6_exact():
    # from 1 the exit time of {1,2} into 3 has mean 2 for every N
    for N in (10, 100, 1000):
        c = build_chain(ChainSpec((1, 2, 3), {(1, 2): N, (2, 1): N - 1.0, (2, 3): 1.0, (3, 2): 1.0}))
        assert expected_additive_until_hitting(c, np.ones(3), 1, {3}) == pytest.approx(2.0, rel=1e-12)


def test_additive_zero_in_target():
    c = two_state()
    assert expected_additive_until_hitting(c, np.ones(2), "a", {"a"}) == 0.0


@pytest.mark.parametrize("t", [0.0, 0.1, 1.0, 10.0])
def test_transient_functional_matches_expm(t):
    rng = np.random.default_rng(4)
    c = build_chain(random_spec(rng, 6))
    g = rng.normal(size=6)
    v = transient_functional_vector(c, g, t)
    assert np.allclose(v, dense_integral(c, g, t), rtol=1e-9, atol=1e-11)


def test_transient_functional_constant():
    c = two_state(2.0, 5.0)
    assert transient_functional(c, np.ones(2), "a", 3.5) == pytest.approx(3.5, rel=1e-12)


def test_transient_functional_guard():
    c = two_state(1e6, 1e6)
    with pytest.raises(SolverFailure):
        transient_functional_vector(c, np.ones(2), 1e3)


def test_escape_probability_line():
    # unit-rate line 0-1-2: leaving 0 the walk is at 1, then hits 2 before 0 w.p. 1/2
    c = build_chain(ChainSpec((0, 1, 2), {(0, 1): 1.0, (1, 0): 1.0, (1, 2): 1.0, (2, 1): 1.0}))
    assert escape_probability(c, 0, {0}, {2}) == pytest.approx(0.5)
    with pytest.raises(InvalidSpec):
        escape_probability(c, 1, {0}, {2})


def test_vector_coercion():
    c = two_state()
    assert c.vector({"b": 2.0}).tolist() == [0.0, 2.0]
    assert c.vector(lambda s: 1.0 if s == "a" else 0.0).tolist() == [1.0, 0.0]
    with pytest.raises(InvalidSpec):
        c.vector([1.0, 2.0, 3.0])
