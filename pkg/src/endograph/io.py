"""Strict JSON files for graphs, outcomes, estimator configs and scenarios, plus run reports.

Every loader rejects unknown fields and reports problems as
:class:`SchemaError` with a JSON path such as ``$.outcomes.alpha[3]``.
Every accepted object re-serializes to a canonical form, so
``load(save(load(f)))`` equals ``load(f)``.
"""

from __future__ import annotations

import csv
import hashlib
import inspect
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import canonical
from ._validation import AssumptionError, SchemaError
from .canonical import Instance
from .estimators import EstimatorConfig
from .generators import degree_capped_instance, random_small_instance
from .graph import KINDS, AnchorSubgraph, EndogenousGraph, PairRule
from .montecarlo import MODES, Scenario
from .outcomes import OutcomeModel, Weights

_GENERATORS = {
    "degree_capped": degree_capped_instance,
    "random_small": random_small_instance,
    "example1": canonical.example1,
    "example2": canonical.example2,
    "example3": canonical.example3,
}
# generator arguments a scenario may not set (supplied from elsewhere)
_RESERVED = {"rng", "seed", "p"}


# ---------------------------------------------------------------------------
# Field checkers
# ---------------------------------------------------------------------------
def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _int(v, path, lo=None):
    if not _is_int(v):
        raise SchemaError(path, "expected an integer")
    if lo is not None and v < lo:
        raise SchemaError(path, f"must be at least {lo}")
    return v


def _num(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(path, "expected a number")
    if not math.isfinite(v):
        raise SchemaError(path, "must be finite")
    return float(v)


def _bool(v, path):
    if not isinstance(v, bool):
        raise SchemaError(path, "expected true or false")
    return v


def _str(v, path, choices=None):
    if not isinstance(v, str):
        raise SchemaError(path, "expected a string")
    if choices is not None and v not in choices:
        raise SchemaError(path, f"must be one of {sorted(choices)}")
    return v


def _list(v, path):
    if not isinstance(v, list):
        raise SchemaError(path, "expected an array")
    return v


def _probability(v, path):
    v = _num(v, path)
    if not 0 < v < 1:
        raise SchemaError(path, "must lie strictly between 0 and 1")
    return v


def _pairs(v, path, n_a, n_r):
    out = []
    for i, pair in enumerate(_list(v, path)):
        p = f"{path}[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError(p, "expected an [a, r] pair")
        a = _int(pair[0], f"{p}[0]", 0)
        r = _int(pair[1], f"{p}[1]", 0)
        if a >= n_a or r >= n_r:
            raise SchemaError(p, f"pair ({a}, {r}) out of range for n_a={n_a}, n_r={n_r}")
        out.append((a, r))
    return out


def _unit_values(v, path, n):
    if isinstance(v, list):
        if len(v) != n:
            raise SchemaError(path, f"expected {n} values, got {len(v)}")
        return np.array([_num(x, f"{path}[{i}]") for i, x in enumerate(v)])
    return np.full(n, _num(v, path))


class _Fields:
    """Reads an object's fields and remembers which ones were consumed."""

    def __init__(self, data, path):
        if not isinstance(data, dict):
            raise SchemaError(path, "expected an object")
        self.data, self.path, self.seen = data, path, set()

    def at(self, key) -> str:
        return f"{self.path}.{key}"

    def has(self, key) -> bool:
        return key in self.data

    def get(self, key, check, *args, required=True, default=None):
        self.seen.add(key)
        if key not in self.data or (not required and self.data[key] is None):
            if required:
                raise SchemaError(self.at(key), "required field missing")
            return default
        return check(self.data[key], self.at(key), *args)

    def done(self):
        extra = sorted(set(self.data) - self.seen)
        if extra:
            raise SchemaError(self.at(extra[0]), "unknown field")


def _passthrough(v, path):
    return v


# ---------------------------------------------------------------------------
# Graphs
# ---------------------------------------------------------------------------
def _rule(data, path, n_r):
    f = _Fields(data, path)
    deps = [_int(d, f"{path}.depends_on[{i}]", 0) for i, d in enumerate(f.get("depends_on", _list))]
    if any(d >= n_r for d in deps):
        raise SchemaError(f.at("depends_on"), "unit index out of range")
    if len(set(deps)) != len(deps):
        raise SchemaError(f.at("depends_on"), "duplicate unit")
    raw = f.get("table", _passthrough)
    tpath = f.at("table")
    if not isinstance(raw, dict):
        raise SchemaError(tpath, "expected an object keyed by bitstrings")
    k = len(deps)
    table = [None] * (2**k)
    for key, val in raw.items():
        if len(key) != k or any(c not in "01" for c in key):
            raise SchemaError(f"{tpath}.{key}", f"key must be a {k}-character bitstring")
        if val not in (0, 1) or isinstance(val, bool):
            raise SchemaError(f"{tpath}.{key}", "edge values must be 0 or 1")
        table[int(key, 2) if k else 0] = val
    if any(v is None for v in table):
        raise SchemaError(tpath, f"table must list all {2**k} assignments")
    a = f.get("a", _int, 0)
    r = f.get("r", _int, 0)
    f.done()
    return (a, r), PairRule(tuple(deps), tuple(table))


def graph_from_dict(data, path: str = "$") -> tuple[EndogenousGraph, AnchorSubgraph | None]:
    """Parse a graph object; returns the graph and its anchor (``None`` if absent)."""
    f = _Fields(data, path)
    n_a = f.get("n_a", _int, 1)
    n_r = f.get("n_r", _int, 1)
    unipartite = f.get("unipartite", _bool, required=False, default=False)
    pre = f.get("pre_edges", _pairs, n_a, n_r, required=False, default=[])
    rf = _Fields(f.get("rule", _passthrough), f.at("rule"))
    kind = rf.get("kind", _str, set(KINDS), required=False)
    rules = {}
    for i, entry in enumerate(rf.get("pairs", _list)):
        p = f"{rf.at('pairs')}[{i}]"
        key, rule = _rule(entry, p, n_r)
        if key[0] >= n_a or key[1] >= n_r:
            raise SchemaError(p, f"pair {key} out of range")
        if key in rules:
            raise SchemaError(p, f"duplicate pair {key}")
        rules[key] = rule
    rf.done()
    anchor_pairs = f.get("anchor", _pairs, n_a, n_r, required=False)
    f.done()
    try:
        graph = EndogenousGraph(n_a, n_r, rules, unipartite=unipartite, pre_edges=pre, kind=kind)
    except AssumptionError:
        raise
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from exc
    anchor = None if anchor_pairs is None else AnchorSubgraph(tuple(anchor_pairs), n_a, n_r)
    return graph, anchor


def graph_to_dict(graph: EndogenousGraph, anchor: AnchorSubgraph | None = None) -> dict:
    pairs = []
    for (a, r), rule in graph.rules.items():
        k = len(rule.depends_on)
        table = {format(i, f"0{k}b") if k else "": v for i, v in enumerate(rule.table)}
        pairs.append({"a": a, "r": r, "depends_on": list(rule.depends_on), "table": table})
    out = {
        "n_a": graph.n_a,
        "n_r": graph.n_r,
        "unipartite": graph.unipartite,
        "pre_edges": graph.pre_edges.tolist(),
        "rule": {"pairs": pairs},
    }
    if graph.declared_kind is not None:
        out["rule"]["kind"] = graph.declared_kind
    if anchor is not None:
        out["anchor"] = [list(p) for p in anchor.pairs]
    return out


# ---------------------------------------------------------------------------
# Weights, outcome models, estimator configs
# ---------------------------------------------------------------------------
def weights_from_dict(data, path: str, graph: EndogenousGraph | None = None) -> Weights:
    f = _Fields(data, path)
    kind = f.get("kind", _str, {"uniform", "explicit", "degree"})
    if kind == "uniform":
        w = Weights.uniform(f.get("value", _num, required=False, default=1.0))
    elif kind == "explicit":
        entries = []
        for i, e in enumerate(f.get("entries", _list)):
            p = f"{f.at('entries')}[{i}]"
            if not isinstance(e, list) or len(e) != 3:
                raise SchemaError(p, "expected an [a, r, w] triple")
            entries.append((_int(e[0], f"{p}[0]", 0), _int(e[1], f"{p}[1]", 0), _num(e[2], f"{p}[2]")))
        try:
            w = Weights.explicit(entries)
        except ValueError as exc:
            raise SchemaError(f.at("entries"), str(exc)) from exc
    else:
        if graph is None:
            raise SchemaError(path, "degree-normalized weights need a graph")
        w = Weights.degree_normalized(graph)
    f.done()
    return w


def _band(v, path):
    v = _list(v, path)
    if len(v) != 2:
        raise SchemaError(path, "expected [W_l, W_h]")
    lo, hi = _num(v[0], f"{path}[0]"), _num(v[1], f"{path}[1]")
    if not 0 < lo <= hi:
        raise SchemaError(path, "need 0 < W_l <= W_h")
    return lo, hi


def model_from_dict(data, path: str, graph: EndogenousGraph) -> OutcomeModel:
    f = _Fields(data, path)
    n = graph.n_a
    alpha = f.get("alpha", _unit_values, n)
    beta = f.get("beta", _unit_values, n)
    gamma = f.get("gamma", _unit_values, n, required=False)
    weights = f.get("weights", weights_from_dict, graph, required=False, default=Weights.uniform())
    bound = f.get("bound_M", _num, required=False)
    band = f.get("band", _band, required=False)
    f.done()
    try:
        model = OutcomeModel(alpha, beta, gamma, weights, bound, band)
        model.check_graph(graph)
    except AssumptionError:
        raise
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from exc
    return model


def _floats(values) -> list:
    return [float(v) for v in np.asarray(values).tolist()]


def model_to_dict(model: OutcomeModel) -> dict:
    return {
        "alpha": _floats(model.alpha),
        "beta": _floats(model.beta),
        "gamma": _floats(model.gamma) if np.any(model.gamma != 0) else None,
        "weights": model.weights.to_dict(),
        "bound_M": model.bound_M,
        "band": list(model.band) if model.band is not None else None,
    }


def _instrument(data, path, graph):
    """``{"kind": "uniform"}`` spreads u over each unit's anchor pairs; else explicit entries."""
    f = _Fields(data, path)
    if f.get("kind", _str, {"uniform", "explicit"}) == "explicit":
        return weights_from_dict(data, path, graph)
    f.done()
    return None


def config_from_dict(
    data, path: str, graph: EndogenousGraph, *, anchor=None, weights: Weights | None = None, p: float | None = None
) -> EstimatorConfig:
    """Estimator config: ``{"anchor", "p", "u", "weights"}``.

    ``anchor`` is required unless the graph file supplied one; ``p`` and the
    exposure ``weights`` fall back to the design and the outcome model.
    """
    f = _Fields(data, path)
    pairs = f.get("anchor", _pairs, graph.n_a, graph.n_r, required=anchor is None)
    if pairs is not None:
        anchor = AnchorSubgraph(tuple(pairs), graph.n_a, graph.n_r)
    p = f.get("p", _probability, required=p is None, default=p)
    u = f.get("u", _instrument, graph, required=False)
    w = f.get("weights", weights_from_dict, graph, required=False, default=weights or Weights.uniform())
    f.done()
    return EstimatorConfig(anchor, p, w, u, graph.unipartite)


def config_to_dict(config: EstimatorConfig) -> dict:
    return {
        "anchor": [list(p) for p in config.anchor.pairs],
        "p": config.p,
        "u": {"kind": "uniform"} if config.instrument is None else config.instrument.to_dict(),
        "weights": config.weights.to_dict(),
    }


@dataclass(frozen=True)
class Observations:
    treatment: np.ndarray
    y: np.ndarray
    model: OutcomeModel | None = None


def observations_from_dict(data, path: str, graph: EndogenousGraph) -> Observations:
    """``{"treatment": [...], "y": [...]}`` or ``{"treatment": [...], "model": {...}}``."""
    from .outcomes import potential_outcomes

    f = _Fields(data, path)
    t = f.get("treatment", _list)
    if len(t) != graph.n_r or any(v not in (0, 1) or isinstance(v, bool) for v in t):
        raise SchemaError(f.at("treatment"), f"expected {graph.n_r} entries, each 0 or 1")
    t = np.array(t, dtype=np.int8)
    if f.has("y") == f.has("model"):
        raise SchemaError(path, "give exactly one of 'y' and 'model'")
    model = f.get("model", model_from_dict, graph, required=False)
    y = f.get("y", _unit_values, graph.n_a, required=False)
    f.done()
    if model is not None:
        y = potential_outcomes(graph, model, t)
    return Observations(t, y, model)


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------
def _generator_params(params, path, family):
    if not isinstance(params, dict):
        raise SchemaError(path, "expected an object")
    sig = inspect.signature(_GENERATORS[family])
    allowed = {k for k in sig.parameters if k not in _RESERVED}
    if family == "degree_capped":
        allowed.add("n_a")
    if family == "random_small":
        allowed.discard("n_a")
        allowed.update({"n_a", "n_r"})
    for key, val in params.items():
        if key not in allowed:
            raise SchemaError(f"{path}.{key}", "unknown generator parameter")
        if isinstance(val, (dict, type(None))):
            raise SchemaError(f"{path}.{key}", "expected a scalar or an array")
    return dict(params)


def scenario_from_dict(data, path: str = "$") -> Scenario:
    f = _Fields(data, path)
    mode = f.get("mode", _str, set(MODES))
    df = _Fields(f.get("design", _passthrough), f.at("design"))
    p = df.get("p", _probability)
    seed = df.get("seed", _int, 0, required=False, default=0)
    df.done()
    if f.has("graph") == f.has("generator"):
        raise SchemaError(path, "give exactly one of 'graph' and 'generator'")

    if f.has("generator"):
        gf = _Fields(f.get("generator", _passthrough), f.at("generator"))
        family = gf.get("family", _str, set(_GENERATORS))
        params = gf.get("params", _generator_params, family, required=False, default={})
        gf.done()
        if f.has("outcomes"):
            raise SchemaError(f.at("outcomes"), "generated scenarios draw their own outcomes")
        est = f.get("estimator", _passthrough, required=False)
        if mode == "anchor_tte":
            if est is None:
                raise SchemaError(f.at("estimator"), "required field missing")
            ef = _Fields(est, f.at("estimator"))
            ef.get("anchor", _str, {"generated"})
            ef.done()
        elif est is not None:
            raise SchemaError(f.at("estimator"), "only used in anchor_tte mode")
        f.done()
        params["p"] = p
        scenario = Scenario(family, params, seed, mode=mode)
        try:
            scenario.instance()
        except (TypeError, ValueError) as exc:
            if isinstance(exc, AssumptionError):
                raise
            raise SchemaError(f.at("generator.params"), str(exc)) from exc
        return scenario

    graph, anchor = f.get("graph", graph_from_dict)
    model = f.get("outcomes", model_from_dict, graph)
    config = None
    if mode == "anchor_tte":
        raw = f.get("estimator", _passthrough)
        config = config_from_dict(raw, f.at("estimator"), graph, weights=model.weights, p=p)
    elif f.has("estimator"):
        raise SchemaError(f.at("estimator"), "only used in anchor_tte mode")
    if anchor is not None:
        raise SchemaError(f.at("graph.anchor"), "put the scenario's anchor under 'estimator'")
    f.done()
    if config is not None and config.p != p:
        raise SchemaError(f.at("estimator.p"), "must match design.p")
    return Scenario("fixed", {"p": p}, seed, Instance(graph, model, config), mode=mode)


def scenario_to_dict(scenario: Scenario) -> dict:
    out = {"mode": scenario.mode, "design": {"p": scenario.p, "seed": scenario.seed}}
    if scenario.family == "fixed":
        inst = scenario.fixed
        out["graph"] = graph_to_dict(inst.graph)
        out["outcomes"] = model_to_dict(inst.model)
        if scenario.mode == "anchor_tte":
            out["estimator"] = config_to_dict(inst.config)
    else:
        params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in scenario.params.items() if k != "p"}
        out["generator"] = {"family": scenario.family, "params": params}
        if scenario.mode == "anchor_tte":
            out["estimator"] = {"anchor": "generated"}
    return out


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------
def read_json(path) -> tuple[object, str]:
    """Parse a JSON file; returns the document and the sha256 of its bytes."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise SchemaError(str(path), f"cannot read file: {exc.strerror}") from exc
    digest = hashlib.sha256(raw).hexdigest()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise SchemaError(str(path), f"not UTF-8 at byte offset {exc.start}") from exc
    try:
        return json.loads(text), digest
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise SchemaError(str(path), f"invalid JSON at byte offset {offset}: {exc.msg}") from exc


def load_graph(path):
    data, _ = read_json(path)
    return graph_from_dict(data)


def load_scenario(path) -> Scenario:
    data, _ = read_json(path)
    return scenario_from_dict(data)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(canonical_json(scenario_to_dict(scenario)))


def save_graph(graph: EndogenousGraph, path, anchor: AnchorSubgraph | None = None) -> None:
    Path(path).write_text(canonical_json(graph_to_dict(graph, anchor)))


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, (set, frozenset, tuple)):
        return sorted(obj) if isinstance(obj, (set, frozenset)) else list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------
@dataclass
class RunReport:
    """What was run, on which inputs, what came out, and how long each phase took."""

    command: dict
    inputs: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    status: str = "ok"

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "results": self.results,
            "timing": self.timing,
            "status": self.status,
        }

    def payload(self) -> str:
        """Canonical JSON of everything except timing; stable across identical runs."""
        body = self.to_dict()
        body.pop("timing")
        return canonical_json(body)

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def save_report(report: RunReport, path) -> None:
    Path(path).write_text(report.to_json())


def rows_to_csv(rows: list[dict]) -> str:
    """Plot-ready CSV; columns are the union of keys in first-seen order."""
    columns: list[str] = []
    for row in rows:
        columns += [k for k in row if k not in columns]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _csv_value(v) for k, v in row.items()})
    return buf.getvalue()


def _csv_value(v):
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, sort_keys=True, default=_json_default)
    return v
