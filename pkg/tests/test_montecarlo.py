import math

import numpy as np
import pytest

from endograph import canonical
from endograph.montecarlo import (
    Scenario,
    bias_table,
    draw_assignments,
    normality_diagnostic,
    replicate,
    variance_envelope,
    variance_scaling_study,
)
from endograph.outcomes import OutcomeModel


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario("nope")
    with pytest.raises(ValueError):
        Scenario("example1", mode="other")
    with pytest.raises(ValueError):
        Scenario("fixed")


def test_example1_ht_mean_is_near_y():
    s = replicate(Scenario("example1", {"y": 1.0}, seed=3, mode="ht_bias"), None, 4000)
    assert s.truth == 0.0
    assert abs(s.mean - 1.0) < 3 * s.std_error
    assert s.bias_vs_truth == pytest.approx(s.mean)


def test_example1_anchored_estimator_is_centred():
    s = replicate(Scenario("example1", {"y": 1.0}, seed=4), None, 4000)
    assert s.estimator == "mu_hat"
    assert abs(s.mean) < 3 * s.std_error + 1e-12


def test_random_small_mu_tilde_targets_anchor_weighted_slopes():
    sc = Scenario("random_small", {"n_a": 3}, seed=2)
    s = replicate(sc, 6, 20000, "mu_tilde")
    inst = sc.instance(6)
    assert s.truth == pytest.approx(float(np.mean(inst.model.beta * inst.config.anchor_weight)))
    assert abs(s.bias_vs_truth) < 4 * s.std_error


def test_replication_is_reproducible_and_seed_sensitive():
    sc = Scenario("degree_capped", seed=5)
    a, b = replicate(sc, 100, 50), replicate(sc, 100, 50)
    assert np.array_equal(a.estimates, b.estimates)
    c = replicate(Scenario("degree_capped", seed=6), 100, 50)
    assert not np.array_equal(a.estimates, c.estimates)
    assert a.to_dict() == b.to_dict()
    assert "estimates" in a.to_dict(include_samples=True)


def test_draw_assignments_rows_are_independent_streams():
    T = draw_assignments(1, 10, 200, 0.3, 40)
    assert T.shape == (40, 200)
    assert abs(T.mean() - 0.3) < 0.03
    # a longer run keeps the earlier replications unchanged
    assert np.array_equal(draw_assignments(1, 10, 200, 0.3, 60)[:40], T)


def test_replicate_argument_checks():
    sc = Scenario("example1")
    with pytest.raises(ValueError):
        replicate(sc, None, 1)
    with pytest.raises(ValueError):
        replicate(sc, None, 10, "median")


def test_scaling_study_requires_several_sizes():
    sc = Scenario("degree_capped")
    with pytest.raises(ValueError):
        variance_scaling_study(sc, [200], 50)
    with pytest.raises(ValueError):
        variance_scaling_study(sc, [400, 200, 800], 50)


def test_scaling_study_small_run():
    rep = variance_scaling_study(Scenario("degree_capped", seed=1), [100, 200, 400], 300)
    assert -1.4 < rep.slope < -0.6
    assert all(r <= 1.5 for r in rep.envelope_ratios())
    assert set(rep.to_dict()) >= {"sizes", "variances", "envelopes", "slope"}


def test_envelope_needs_declared_constants():
    inst = canonical.anchored_example2()
    with pytest.raises(ValueError):
        variance_envelope(inst)


def test_normality_needs_enough_replications():
    with pytest.raises(ValueError):
        normality_diagnostic(Scenario("degree_capped"), 200, 999)


def test_normality_rejects_zero_variance():
    inst = canonical.anchored_example2(0.0, 0.0)
    inst = type(inst)(inst.graph, OutcomeModel([0.0, 0.0], [0.0, 0.0]), inst.config)
    with pytest.raises(ValueError):
        normality_diagnostic(Scenario("fixed", fixed=inst), None, 1000)


def test_heavy_degree_ks_is_reported():
    # few analysis units per randomization unit keeps the draw far from normal
    sc = Scenario("degree_capped", {"r_ratio": 0.05, "d_R": 200}, seed=2)
    s = replicate(sc, 100, 1000)
    assert s.ks_distance is not None and 0 <= s.ks_distance <= 1
    assert s.d_R >= 50


def test_bias_table_examples():
    rep = bias_table()
    r1, r2, r3 = rep.row(1), rep.row(2), rep.row(3)
    assert (r1.tte, r1.ht_expectation) == (0.0, 1.0)
    assert r2.tte == 0.0
    assert r2.ht_total_expectation == pytest.approx(3.0 - 1.0)
    assert r2.ht_expectation == pytest.approx((3.0 - 1.0) / 2)
    assert r3.tte == 0.0
    for r in rep.rows:
        assert r.mu_hat_expectation == pytest.approx(0.0, abs=1e-12)


def test_example3_case_table_matches_direct_enumeration():
    y1, y2 = 2.0, 5.0
    r3 = bias_table((3,), y1=y1, y2=y2).row(3)
    cases = {dict(c)["assignment"]: dict(c)["ht"] for c in r3.case_table}
    # unit 0 sees itself, unit 1 sees itself and unit 0 when unit 0 is treated
    expected = {"00": (-2 * y1 - 2 * y2) / 2, "01": (-2 * y1 + 2 * y2) / 2,
                "10": 2 * y1 / 2, "11": (2 * y1 + 4 * y2) / 2}
    for k, v in expected.items():
        assert cases[k] == pytest.approx(v)
    assert r3.ht_expectation == pytest.approx(math.fsum(expected.values()) / 4)
    assert r3.ht_expectation == pytest.approx(y2 / 2)


def test_bias_table_rejects_unknown_example():
    with pytest.raises(ValueError):
        bias_table((4,))
