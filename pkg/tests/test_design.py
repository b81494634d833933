import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from endograph._validation import CapExceededError
from endograph.design import (
    BernoulliDesign,
    assignment_matrix,
    assignment_probabilities,
    draw,
    enumerate_assignments,
    exact_covariance,
    exact_expectation,
    substreams,
)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_design_needs_interior_probability(p):
    with pytest.raises(ValueError):
        BernoulliDesign(p, 3)


def test_same_seed_same_draw():
    d = BernoulliDesign(0.5, 3, seed=42)
    assert np.array_equal(draw(d), draw(d))
    assert np.array_equal(draw(d), draw(BernoulliDesign(0.5, 3, seed=42)))


def test_marginal_frequency_matches_p():
    T = BernoulliDesign(0.3, 1, seed=7).draw_batch(100_000)
    assert abs(T.mean() - 0.3) < 0.01


def test_enumeration_single_unit():
    got = {tuple(t): pr for t, pr in enumerate_assignments(1, 0.5)}
    assert got == {(0,): 0.5, (1,): 0.5}


def test_enumeration_two_units_uniform():
    got = list(enumerate_assignments(2, 0.5))
    assert len(got) == 4
    assert all(pr == 0.25 for _, pr in got)


def test_enumeration_probability_product():
    probs = {tuple(t): pr for t, pr in enumerate_assignments(3, 0.3)}
    assert probs[(1, 1, 0)] == pytest.approx(0.3 * 0.3 * 0.7, abs=1e-15)
    assert math.fsum(probs.values()) == pytest.approx(1.0, abs=1e-15)


def test_assignment_matrix_order_unit_zero_most_significant():
    T = assignment_matrix(3)
    assert T[1].tolist() == [0, 0, 1]
    assert T[4].tolist() == [1, 0, 0]


def test_enumeration_cap():
    with pytest.raises(CapExceededError):
        assignment_matrix(21)
    with pytest.raises(CapExceededError):
        exact_expectation(lambda t: 1.0, 5, 0.5, cap=4)


def test_exact_expectation_constants_and_marginals():
    assert exact_expectation(lambda t: 1.0, 4, 0.3) == pytest.approx(1.0, abs=1e-15)
    assert exact_expectation(lambda t: t[0], 3, 0.3) == pytest.approx(0.3, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(n_r=st.integers(1, 8), p=st.floats(0.05, 0.95), seed=st.integers(0, 10_000))
def test_exact_moments_match_brute_force(n_r, p, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=n_r), rng.normal(size=n_r)

    def f(t):
        return float(np.dot(a, t) ** 2)

    def g(t):
        return float(np.dot(b, t))

    assert exact_expectation(f, n_r, p) == pytest.approx(oracles.expectation(f, n_r, p), abs=1e-12)
    assert exact_covariance(f, g, n_r, p) == pytest.approx(oracles.covariance(f, g, n_r, p), abs=1e-12)
    # linear statistics: Cov(a.T, b.T) = p(1-p) a.b
    assert exact_covariance(lambda t: np.dot(a, t), g, n_r, p) == pytest.approx(p * (1 - p) * a @ b, abs=1e-12)


def test_probabilities_sum_to_one():
    assert math.fsum(assignment_probabilities(10, 0.37)) == pytest.approx(1.0, abs=1e-14)


def test_substreams_are_reproducible_and_distinct():
    a = [g.random() for g in substreams(5, 4)]
    b = [g.random() for g in substreams(5, 4)]
    assert a == b
    assert len(set(a)) == 4
    assert a != [g.random() for g in substreams(6, 4)]
