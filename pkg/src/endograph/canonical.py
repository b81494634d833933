"""Small hand-built graphs showing how edge endogeneity biases naive estimators.

Each builder returns an :class:`Instance` with constant outcomes (so the true
total treatment effect is zero).  ``anchored_*`` variants add always-present
edges so that the anchor-instrument estimator is defined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimators import EstimatorConfig
from .graph import AnchorSubgraph, EndogenousGraph, PairRule
from .outcomes import OutcomeModel, Weights


@dataclass(frozen=True)
class Instance:
    graph: EndogenousGraph
    model: OutcomeModel
    config: EstimatorConfig | None = None


def _constant_model(values) -> OutcomeModel:
    values = np.asarray(values, dtype=float)
    return OutcomeModel(alpha=values, beta=np.zeros(len(values)))


def example1(y: float = 1.0) -> Instance:
    """One analysis unit linked to its only randomization unit iff treated."""
    graph = EndogenousGraph(1, 1, {(0, 0): PairRule.r_driven(0, 0, 1)}, kind="r_driven")
    return Instance(graph, _constant_model([y]))


def example2(y1: float = 3.0, y2: float = 1.0) -> Instance:
    """The single randomization unit links to unit 0 if treated, to unit 1 otherwise."""
    rules = {(0, 0): PairRule.r_driven(0, 0, 1), (1, 0): PairRule.r_driven(0, 1, 0)}
    graph = EndogenousGraph(2, 1, rules, kind="r_driven")
    return Instance(graph, _constant_model([y1, y2]))


def example3(y1: float = 0.0, y2: float = 16.0) -> Instance:
    """Unipartite pair: unit 1 is exposed to unit 0 iff unit 0 is treated.

    The directed edge "from unit 0 to unit 1" is read as ``E_{1,0}(T) = T_0``
    (unit 1's outcome may depend on unit 0's treatment).
    """
    rules = {(1, 0): PairRule.r_driven(0, 0, 1)}
    graph = EndogenousGraph(2, 2, rules, unipartite=True, kind="r_driven")
    return Instance(graph, _constant_model([y1, y2]))


def gatekeeper_counterexample() -> EndogenousGraph:
    """One analysis unit whose edge to unit 0 exists iff unit 1 is treated."""
    rule = PairRule((1,), (0, 1))
    return EndogenousGraph(1, 2, {(0, 0): rule})


def anchored_example1(y: float = 1.0, p: float = 0.5) -> Instance:
    graph = EndogenousGraph(1, 1, {(0, 0): PairRule.constant(1)}, kind="r_driven")
    anchor = AnchorSubgraph(((0, 0),), 1, 1)
    return Instance(graph, _constant_model([y]), EstimatorConfig(anchor, p))


def anchored_example2(y1: float = 3.0, y2: float = 1.0, p: float = 0.5) -> Instance:
    graph = EndogenousGraph(2, 1, {(0, 0): 1, (1, 0): 1}, kind="r_driven")
    anchor = AnchorSubgraph(((0, 0), (1, 0)), 2, 1)
    return Instance(graph, _constant_model([y1, y2]), EstimatorConfig(anchor, p))


def anchored_example3(y1: float = 0.0, y2: float = 16.0, y3: float = 0.0, p: float = 0.5) -> Instance:
    """Example 3 plus a third unit that is an always-present neighbour of the others.

    The original endogenous edge ``E_{1,0}(T) = T_0`` is kept; unit 2 gives
    units 0 and 1 an instrument, and unit 0 is unit 2's anchor.
    """
    rules = {
        (1, 0): PairRule.r_driven(0, 0, 1),
        (0, 2): 1,
        (1, 2): 1,
        (2, 0): 1,
    }
    graph = EndogenousGraph(3, 3, rules, unipartite=True, kind="r_driven")
    anchor = AnchorSubgraph(((0, 2), (1, 2), (2, 0)), 3, 3)
    config = EstimatorConfig(anchor, p, Weights.uniform(), None, unipartite=True)
    return Instance(graph, _constant_model([y1, y2, y3]), config)
