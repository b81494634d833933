import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES
from endograph import canonical
from endograph._validation import AssumptionError, SchemaError
from endograph.graph import EndogenousGraph, PairRule
from endograph.io import (
    RunReport,
    canonical_json,
    config_from_dict,
    config_to_dict,
    graph_from_dict,
    graph_to_dict,
    load_graph,
    load_scenario,
    model_from_dict,
    model_to_dict,
    observations_from_dict,
    read_json,
    rows_to_csv,
    save_graph,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from endograph.outcomes import potential_outcomes

GRAPHS = sorted(p.name for p in FIXTURES.glob("*_graph.json"))
SCENARIOS = sorted(p.name for p in FIXTURES.glob("scenario_*.json"))


def _graph_doc(**overrides):
    doc = {
        "n_a": 1,
        "n_r": 2,
        "rule": {"pairs": [{"a": 0, "r": 0, "depends_on": [1], "table": {"0": 0, "1": 1}}]},
    }
    doc.update(overrides)
    return doc


@pytest.mark.parametrize("name", GRAPHS)
def test_graph_fixture_round_trip(name, tmp_path):
    graph, anchor = load_graph(FIXTURES / name)
    save_graph(graph, tmp_path / "g.json", anchor)
    again, anchor2 = load_graph(tmp_path / "g.json")
    assert again == graph
    assert anchor2 == anchor
    assert graph_to_dict(again, anchor2) == graph_to_dict(graph, anchor)


@pytest.mark.parametrize("name", SCENARIOS)
def test_scenario_fixture_round_trip(name, tmp_path):
    scenario = load_scenario(FIXTURES / name)
    save_scenario(scenario, tmp_path / "s.json")
    again = load_scenario(tmp_path / "s.json")
    assert scenario_to_dict(again) == scenario_to_dict(scenario)
    if scenario.family == "fixed":
        assert again.fixed.graph == scenario.fixed.graph


def test_example2_fixture_is_the_built_in_example():
    graph, anchor = load_graph(FIXTURES / "example2_graph.json")
    assert graph == canonical.example2().graph
    assert anchor is None


def test_model_and_config_round_trip():
    graph, anchor = load_graph(FIXTURES / "small_graph.json")
    obs = observations_from_dict(json.loads((FIXTURES / "small_outcomes.json").read_text()), "$", graph)
    assert obs.treatment.tolist() == [1, 0, 1, 1]
    # y is generated from the model when not given
    assert obs.y.tolist() == potential_outcomes(graph, obs.model, obs.treatment).tolist()
    model = obs.model
    assert model_to_dict(model_from_dict(model_to_dict(model), "$", graph)) == model_to_dict(model)
    raw = json.loads((FIXTURES / "anchored_config.json").read_text())
    cfg = config_from_dict(raw, "$", graph, anchor=anchor, weights=model.weights)
    again = config_from_dict(config_to_dict(cfg), "$", graph, weights=model.weights)
    assert again.anchor == cfg.anchor and again.p == cfg.p


def test_missing_anchor_reports_path():
    doc = json.loads((FIXTURES / "scenario_example2_fixed.json").read_text())
    doc["mode"] = "anchor_tte"
    doc["estimator"] = {"p": 0.5}
    with pytest.raises(SchemaError) as exc:
        scenario_from_dict(doc)
    assert str(exc.value) == "$.estimator.anchor: required field missing"
    assert exc.value.path == "$.estimator.anchor"


def test_unknown_fields_rejected_with_path():
    with pytest.raises(SchemaError) as exc:
        graph_from_dict(_graph_doc(colour="red"))
    assert exc.value.path == "$.colour"
    doc = _graph_doc()
    doc["rule"]["pairs"][0]["extra"] = 1
    with pytest.raises(SchemaError) as exc:
        graph_from_dict(doc)
    assert exc.value.path == "$.rule.pairs[0].extra"


@pytest.mark.parametrize(
    "table, where",
    [
        ({"0": 0}, "$.rule.pairs[0].table"),
        ({"0": 0, "1": 2}, "$.rule.pairs[0].table.1"),
        ({"0": 0, "10": 1}, "$.rule.pairs[0].table.10"),
        ({"0": 0, "1": True}, "$.rule.pairs[0].table.1"),
    ],
)
def test_bad_tables(table, where):
    doc = _graph_doc()
    doc["rule"]["pairs"][0]["table"] = table
    with pytest.raises(SchemaError) as exc:
        graph_from_dict(doc)
    assert exc.value.path == where


@pytest.mark.parametrize(
    "field, value, where",
    [
        ("n_a", 0, "$.n_a"),
        ("n_a", 1.5, "$.n_a"),
        ("n_r", True, "$.n_r"),
        ("pre_edges", [[0, 9]], "$.pre_edges[0]"),
        ("anchor", [[0]], "$.anchor[0]"),
    ],
)
def test_bad_scalar_fields(field, value, where):
    with pytest.raises(SchemaError) as exc:
        graph_from_dict(_graph_doc(**{field: value}))
    assert exc.value.path.startswith(where)


def test_outcome_vectors_checked():
    graph = canonical.example2().graph
    with pytest.raises(SchemaError) as exc:
        model_from_dict({"alpha": [1.0, float("nan")], "beta": 0.0}, "$.outcomes", graph)
    assert exc.value.path == "$.outcomes.alpha[1]"
    with pytest.raises(SchemaError):
        model_from_dict({"alpha": [1.0], "beta": 0.0}, "$.outcomes", graph)


def test_unipartite_diagonal_violation_is_an_assumption_error():
    doc = {
        "n_a": 2, "n_r": 2, "unipartite": True,
        "rule": {"pairs": [{"a": 1, "r": 1, "depends_on": [0], "table": {"0": 0, "1": 1}}]},
    }
    with pytest.raises(AssumptionError):
        graph_from_dict(doc)


def test_scenario_mode_and_source_checks():
    base = {"mode": "ht_bias", "design": {"p": 0.5}, "generator": {"family": "example1"}}
    assert scenario_from_dict(base).family == "example1"
    with pytest.raises(SchemaError) as exc:
        scenario_from_dict({**base, "mode": "other"})
    assert exc.value.path == "$.mode"
    with pytest.raises(SchemaError):
        scenario_from_dict({**base, "graph": _graph_doc()})
    with pytest.raises(SchemaError) as exc:
        scenario_from_dict({**base, "mode": "anchor_tte"})
    assert exc.value.path == "$.estimator"
    with pytest.raises(SchemaError) as exc:
        scenario_from_dict({**base, "generator": {"family": "degree_capped", "params": {"n_b": 3}}})
    assert exc.value.path.startswith("$.generator.params")
    with pytest.raises(SchemaError) as exc:
        scenario_from_dict({**base, "design": {"p": 1.5}})
    assert exc.value.path == "$.design.p"


def test_bad_json_reports_byte_offset(tmp_path):
    f = tmp_path / "bad.json"
    f.write_text('{"n_a": 1,\n "n_r": }')
    with pytest.raises(SchemaError) as exc:
        read_json(f)
    assert "byte offset 19" in str(exc.value)
    with pytest.raises(SchemaError):
        read_json(tmp_path / "missing.json")


def test_read_json_hash_is_of_raw_bytes(tmp_path):
    import hashlib

    f = tmp_path / "x.json"
    f.write_bytes(b'{"a": 1}')
    data, digest = read_json(f)
    assert data == {"a": 1}
    assert digest == hashlib.sha256(b'{"a": 1}').hexdigest()


def test_canonical_json_and_reports():
    assert canonical_json({"b": np.float64(1.5), "a": np.arange(2)}) == '{\n  "a": [\n    0,\n    1\n  ],\n  "b": 1.5\n}\n'
    rep = RunReport({"cmd": "x"}, {"f": "abc"}, {"v": 1.0}, {"total": 0.1})
    assert "timing" not in json.loads(rep.payload())
    assert json.loads(rep.to_json())["timing"] == {"total": 0.1}


def test_rows_to_csv_keeps_full_precision():
    text = rows_to_csv([{"a": 0.1 + 0.2, "b": 1}, {"a": 1 / 3, "c": [1, 2]}])
    lines = text.splitlines()
    assert lines[0] == "a,b,c"
    assert lines[1] == "0.30000000000000004,1,"
    assert float(lines[2].split(",")[0]) == 1 / 3


@st.composite
def graphs(draw):
    n_a = draw(st.integers(1, 4))
    n_r = draw(st.integers(1, 4))
    rules = {}
    for a in range(n_a):
        for r in range(n_r):
            k = draw(st.integers(0, min(2, n_r)))
            deps = tuple(draw(st.permutations(range(n_r)))[:k])
            table = tuple(draw(st.lists(st.integers(0, 1), min_size=2**k, max_size=2**k)))
            rules[(a, r)] = PairRule(deps, table)
    pre = draw(st.lists(st.tuples(st.integers(0, n_a - 1), st.integers(0, n_r - 1)), max_size=4, unique=True))
    return EndogenousGraph(n_a, n_r, rules, pre_edges=pre)


@settings(max_examples=50, deadline=None)
@given(graphs())
def test_graph_round_trip_property(graph):
    doc = json.loads(canonical_json(graph_to_dict(graph)))
    again, _ = graph_from_dict(doc)
    assert again == graph
    T = np.array(np.meshgrid(*[[0, 1]] * graph.n_r)).reshape(graph.n_r, -1).T.astype(np.int8)
    assert np.array_equal(again.edge_values(T), graph.edge_values(T))
