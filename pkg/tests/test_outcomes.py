import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import small_instances
from endograph import canonical
from endograph._validation import AssumptionError
from endograph.generators import random_small_instance
from endograph.graph import EndogenousGraph, RealizedGraph
from endograph.outcomes import (
    OutcomeModel,
    Weights,
    check_weight_band,
    declared_bound,
    exposure,
    outcome,
    potential_outcomes,
    true_tte,
    tte_from_potential_outcomes,
)


def test_exposure_counts_treated_neighbours():
    full = RealizedGraph.from_matrix(np.ones((3, 4)))
    assert exposure(full, np.ones(4)).tolist() == [4, 4, 4]
    assert exposure(full, np.zeros(4)).tolist() == [0, 0, 0]
    g = canonical.example1().graph
    assert exposure(g.realize([1]), [1]).tolist() == [1]


def test_exposure_weight_forms_agree():
    r = RealizedGraph.from_matrix([[1, 1, 0], [0, 1, 1]])
    t = [1, 1, 1]
    dense = np.array([[0.5, 2.0, 9.0], [9.0, -1.0, 3.0]])
    pairs = Weights.from_pairs([0, 0, 1, 1], [0, 1, 1, 2], [0.5, 2.0, -1.0, 3.0])
    assert exposure(r, t, dense).tolist() == [2.5, 2.0]
    assert exposure(r, t, pairs).tolist() == [2.5, 2.0]


def test_sharp_null_outcomes_ignore_treatment():
    inst = canonical.example2(3.0, 1.0)
    for t in ([0], [1]):
        assert potential_outcomes(inst.graph, inst.model, t).tolist() == [3.0, 1.0]


def test_example1_outcomes_are_constant():
    inst = canonical.example1(2.5)
    assert potential_outcomes(inst.graph, inst.model, [0]).tolist() == [2.5]
    assert potential_outcomes(inst.graph, inst.model, [1]).tolist() == [2.5]


def test_direct_effect_on_unipartite_graph():
    g = EndogenousGraph(2, 2, {}, unipartite=True)
    model = OutcomeModel(np.zeros(2), np.zeros(2), np.array([2.0, 2.0]))
    assert outcome(model, g.realize([1, 0]), [1, 0]).tolist() == [2.0, 0.0]


def test_bipartite_models_reject_direct_effects():
    inst = canonical.example2()
    model = OutcomeModel([0.0, 0.0], [0.0, 0.0], [1.0, 0.0])
    with pytest.raises(AssumptionError):
        outcome(model, inst.graph.realize([1]), [1])


def test_diagonal_weight_must_vanish_on_unipartite_graphs():
    g = EndogenousGraph(2, 2, {}, unipartite=True)
    model = OutcomeModel(np.zeros(2), np.ones(2), None, Weights.explicit([(0, 0, 1.0)]))
    with pytest.raises(AssumptionError) as exc:
        outcome(model, g.realize([1, 1]), [1, 1])
    assert exc.value.assumption == "unipartite_diagonal"


@pytest.mark.parametrize("builder", [canonical.example1, canonical.example2, canonical.example3])
def test_canonical_examples_have_zero_tte(builder):
    inst = builder()
    assert true_tte(inst.graph, inst.model) == 0.0


def test_single_always_on_edge():
    g = EndogenousGraph(1, 1, {(0, 0): 1})
    assert true_tte(g, OutcomeModel([0.7], [3.0])) == 3.0


def test_both_tte_routes_agree_on_random_instances():
    for inst in small_instances(20, 1) + small_instances(10, 2, unipartite=True, with_gamma=True, max_r=7):
        a = true_tte(inst.graph, inst.model)
        b = tte_from_potential_outcomes(inst.graph, inst.model)
        c = oracles.tte(oracles.from_package(inst))
        assert a == pytest.approx(b, abs=1e-12)
        assert a == pytest.approx(c, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), n_a=st.integers(1, 4), n_r=st.integers(1, 6))
def test_outcomes_match_plain_loop_oracle(seed, n_a, n_r):
    rng = np.random.default_rng(seed)
    inst = random_small_instance(rng, n_a, n_r)
    plain = oracles.from_package(inst)
    t = (rng.random(n_r) < 0.5).astype(int)
    got = potential_outcomes(inst.graph, inst.model, t)
    assert np.allclose(got, oracles.outcomes(plain, tuple(t)), atol=1e-12)


def test_degree_normalized_weights():
    g = EndogenousGraph.exogenous([[1, 1, 0], [0, 0, 1]])
    w = Weights.degree_normalized(g)
    assert w.for_graph(g).tolist() == [0.5, 0.5, 1.0]
    assert check_weight_band(g, w, (1.0, 1.0)) == []
    assert check_weight_band(g, Weights.uniform(1.0), (1.0, 1.0)) == [0]


def test_declared_bound_covers_every_outcome():
    for inst in small_instances(10, 3, banded=True):
        M = declared_bound(inst.graph, inst.model)
        plain = oracles.from_package(inst)
        for t, _ in oracles.assignments(inst.graph.n_r, 0.5):
            assert max(abs(v) for v in oracles.outcomes(plain, t)) <= M + 1e-12


def test_weights_validation():
    with pytest.raises(ValueError):
        Weights("triangular")
    with pytest.raises(ValueError):
        Weights.explicit([(0, 0, 1.0), (0, 0, 2.0)])
    assert Weights.explicit([(1, 0, 2.0), (0, 1, 3.0)]).to_dict() == {
        "kind": "explicit",
        "entries": [[0, 1, 3.0], [1, 0, 2.0]],
    }
