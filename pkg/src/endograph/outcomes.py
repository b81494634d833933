"""Linear exposure-response outcome model and the true total treatment effect."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import AssumptionError, DimensionError, check_treatment, check_unit_vector
from .graph import EndogenousGraph, RealizedGraph


@dataclass(frozen=True)
class Weights:
    """Exposure (or instrument) weights defined on every pair.

    ``kind="uniform"`` gives ``value`` everywhere (zero on the diagonal of a
    unipartite graph).  ``kind="explicit"`` stores ``(a, r, w)`` entries and
    is zero elsewhere.
    """

    kind: str = "uniform"
    value: float = 1.0
    entries: tuple = ()
    _lookup: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("uniform", "explicit"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "explicit":
            clean = tuple(sorted((int(a), int(r), float(w)) for a, r, w in self.entries))
            object.__setattr__(self, "entries", clean)
            self._lookup.update({(a, r): w for a, r, w in clean})
            if len(self._lookup) != len(clean):
                raise ValueError("duplicate weight entries")

    @classmethod
    def uniform(cls, value: float = 1.0) -> "Weights":
        return cls("uniform", float(value))

    @classmethod
    def explicit(cls, entries) -> "Weights":
        return cls("explicit", 1.0, tuple(entries))

    @classmethod
    def from_pairs(cls, rows, cols, values) -> "Weights":
        return cls.explicit(zip(np.asarray(rows).tolist(), np.asarray(cols).tolist(), np.asarray(values).tolist()))

    @classmethod
    def degree_normalized(cls, graph: EndogenousGraph) -> "Weights":
        """``w_ar = 1 / |R_a|`` on the edges present under full treatment."""
        on = graph.full_treatment_edges.astype(bool)
        rows, cols = graph.rows, graph.cols
        if graph.unipartite:
            on &= rows != cols
        deg = np.bincount(rows[on], minlength=graph.n_a)
        w = 1.0 / deg[rows[on]]
        return cls.from_pairs(rows[on], cols[on], w)

    def on_pairs(self, rows, cols, unipartite: bool = False) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self.kind == "uniform":
            w = np.full(len(rows), self.value, dtype=float)
            if unipartite:
                w[rows == cols] = 0.0
            return w
        get = self._lookup.get
        return np.array([get((a, r), 0.0) for a, r in zip(rows.tolist(), cols.tolist())], dtype=float)

    def for_graph(self, graph: EndogenousGraph | RealizedGraph) -> np.ndarray:
        return self.on_pairs(graph.rows, graph.cols, graph.unipartite)

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform", "value": self.value}
        return {"kind": "explicit", "entries": [list(e) for e in self.entries]}


def pair_weights(w, realized: RealizedGraph) -> np.ndarray:
    """Coerce ``w`` (scalar, dense matrix, pair-aligned vector or Weights) to the realized pairs."""
    if isinstance(w, Weights):
        return w.for_graph(realized)
    arr = np.asarray(w, dtype=float)
    if arr.ndim == 0:
        return np.full(len(realized.rows), float(arr))
    if arr.shape == (realized.n_a, realized.n_r):
        return arr[realized.rows, realized.cols]
    if arr.shape == (len(realized.rows),):
        return arr
    raise DimensionError(f"weights of shape {arr.shape} do not match the graph")


@dataclass(frozen=True)
class OutcomeModel:
    """``y_a = alpha_a + beta_a x_a (+ gamma_a T_a on unipartite graphs)``.

    ``bound_M`` and ``band = (W_l, W_h)`` are optional declarations used by
    the boundedness and weight-band checks.
    """

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray | None = None
    weights: Weights = field(default_factory=Weights.uniform)
    bound_M: float | None = None
    band: tuple | None = None

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).ravel()
        n = len(alpha)
        object.__setattr__(self, "alpha", check_unit_vector(alpha, n, "alpha"))
        object.__setattr__(self, "beta", check_unit_vector(self.beta, n, "beta"))
        gamma = np.zeros(n) if self.gamma is None else self.gamma
        object.__setattr__(self, "gamma", check_unit_vector(gamma, n, "gamma"))
        if self.band is not None:
            lo, hi = (float(b) for b in self.band)
            if not 0 < lo <= hi:
                raise ValueError("weight band needs 0 < W_l <= W_h")
            object.__setattr__(self, "band", (lo, hi))

    @property
    def n_a(self) -> int:
        return len(self.alpha)

    def check_graph(self, graph: EndogenousGraph | RealizedGraph) -> None:
        if graph.n_a != self.n_a:
            raise DimensionError(f"model has {self.n_a} units, graph has {graph.n_a}")
        if not graph.unipartite and np.any(self.gamma != 0):
            raise AssumptionError("bipartite_gamma", "direct effects need a unipartite graph")
        if graph.unipartite:
            w = self.weights.for_graph(graph)
            diag = graph.rows == graph.cols
            bad = graph.rows[diag & (w != 0)]
            if len(bad):
                raise AssumptionError("unipartite_diagonal", "self-exposure weights must be zero", bad)


def exposure(realized: RealizedGraph, t, w=1.0) -> np.ndarray:
    """Weighted count of treated realized neighbours, ``x_a = sum_r T_r e_ar w_ar``."""
    t = check_treatment(t, realized.n_r)
    w = pair_weights(w, realized)
    contrib = t[realized.cols] * realized.values * w
    return np.bincount(realized.rows, weights=contrib, minlength=realized.n_a)


def outcome(model: OutcomeModel, realized: RealizedGraph, t) -> np.ndarray:
    model.check_graph(realized)
    t = check_treatment(t, realized.n_r)
    y = model.alpha + model.beta * exposure(realized, t, model.weights.for_graph(realized))
    if realized.unipartite:
        y = y + model.gamma * t
    return y


def potential_outcomes(graph: EndogenousGraph, model: OutcomeModel, t) -> np.ndarray:
    """``Y(T)`` for one assignment: realize the graph, then apply the model."""
    return outcome(model, graph.realize(t), t)


def full_treatment_exposure(graph: EndogenousGraph, weights: Weights) -> np.ndarray:
    """``W_a(1) = sum_r w_ar E_ar(1)``."""
    w = weights.for_graph(graph)
    return np.bincount(graph.rows, weights=w * graph.full_treatment_edges, minlength=graph.n_a)


def true_tte(graph: EndogenousGraph, model: OutcomeModel) -> float:
    """Total treatment effect via ``mean_a(W_a(1) beta_a + gamma_a)``."""
    model.check_graph(graph)
    per_unit = full_treatment_exposure(graph, model.weights) * model.beta
    if graph.unipartite:
        per_unit = per_unit + model.gamma
    return math.fsum(per_unit) / graph.n_a


def tte_from_potential_outcomes(graph: EndogenousGraph, model: OutcomeModel) -> float:
    """Total treatment effect as ``mean_a(Y_a(1) - Y_a(0))``."""
    ones = np.ones(graph.n_r, dtype=np.int8)
    zeros = np.zeros(graph.n_r, dtype=np.int8)
    diff = potential_outcomes(graph, model, ones) - potential_outcomes(graph, model, zeros)
    return math.fsum(diff) / graph.n_a


def declared_bound(graph: EndogenousGraph, model: OutcomeModel) -> float:
    """A valid ``M``: ``|alpha| + |beta| sum_r |w_ar| E_ar(1) + |gamma|``."""
    w = np.abs(model.weights.for_graph(graph))
    reach = np.bincount(graph.rows, weights=w * graph.full_treatment_edges, minlength=graph.n_a)
    # edges that exist only when T_r = 0 never count toward exposure
    return float(np.max(np.abs(model.alpha) + np.abs(model.beta) * reach + np.abs(model.gamma)))


def check_weight_band(graph: EndogenousGraph, weights: Weights, band) -> list[int]:
    """Units violating ``W_l/|R_a| <= |w_ar| <= W_h/|R_a|`` for ``r`` in ``R_a``."""
    lo, hi = band
    on = graph.full_treatment_edges.astype(bool)
    if graph.unipartite:
        on &= graph.rows != graph.cols
    rows = graph.rows[on]
    deg = np.bincount(rows, minlength=graph.n_a)
    w = np.abs(weights.for_graph(graph)[on])
    d = deg[rows].astype(float)
    tol = 1e-12
    bad = (w < lo / d - tol) | (w > hi / d + tol)
    return sorted(set(rows[bad].tolist()))
