"""Total-treatment-effect estimators on endogenous graphs.

The anchor-instrument estimator multiplies, per analysis unit, an
instrumental-variable estimate of the slope ``beta_a`` with an augmented
inverse-probability estimate of the full-treatment exposure ``W_a(1)``.
The instrument ``z_a = sum_r T_r u_ar`` only loads on anchor pairs, whose
edges exist under every assignment, so ``Cov(x_a, z_a)`` is known in closed
form even though the graph reacts to treatment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    AssumptionError,
    DimensionError,
    check_probability,
    check_treatment,
    check_treatment_batch,
    check_unit_vector,
)
from .graph import AnchorSubgraph, EndogenousGraph, RealizedGraph, verify_anchor
from .outcomes import OutcomeModel, Weights

HT_SCALES = ("mean", "total")


def _row_aggregator(rows, n_a) -> sp.csr_matrix:
    """(P, n_a) 0/1 matrix summing pair quantities into their analysis unit."""
    P = len(rows)
    return sp.csr_matrix((np.ones(P), (np.arange(P), rows)), shape=(P, n_a))


# ---------------------------------------------------------------------------
# Horvitz-Thompson
# ---------------------------------------------------------------------------
def ht_batch(rows, cols, n_a, E, T, Y, p, scale="mean", aggregator=None) -> np.ndarray:
    """Horvitz-Thompson for a batch: ``E`` (B, P) edges, ``T`` (B, n_r), ``Y`` (B, n_a)."""
    E = np.asarray(E, dtype=float)
    agg = _row_aggregator(rows, n_a) if aggregator is None else aggregator
    treated = T[:, cols] * E
    deg = np.rint(np.asarray(E @ agg))
    n_treated = np.rint(np.asarray(treated @ agg))
    has = deg > 0
    all_t = has & (n_treated == deg)
    all_c = has & (n_treated == 0)
    term = np.where(all_t, p ** -deg, 0.0) - np.where(all_c, (1.0 - p) ** -deg, 0.0)
    total = np.sum(Y * term, axis=1)
    return total / n_a if scale == "mean" else total


def horvitz_thompson(realized: RealizedGraph, y, t, p: float, scale: str = "mean") -> float:
    """Horvitz-Thompson contrast of fully treated and fully control units.

    Treats the realized neighbourhoods ``R_a(T)`` as fixed, which biases it
    when the graph responds to treatment.  Units without neighbours
    contribute zero.  ``scale="total"`` returns the unnormalized sum over
    units instead of the mean.
    """
    p = check_probability(p)
    y = check_unit_vector(y, realized.n_a, "y")
    t = check_treatment(t, realized.n_r)
    if scale not in HT_SCALES:
        raise ValueError(f"scale must be one of {HT_SCALES}")
    return float(
        ht_batch(realized.rows, realized.cols, realized.n_a, realized.values[None, :],
                 t[None, :], y[None, :], p, scale)[0]
    )


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class EstimatorConfig:
    """Anchor subgraph, instrument weights ``u``, exposure weights ``w`` and ``p``.

    Centering weights are always the anchor indicator.  ``instrument=None``
    spreads ``u`` uniformly over each unit's anchor pairs (diagonal excluded
    on unipartite graphs).  ``u`` is rescaled per unit to sum to one.
    """

    anchor: AnchorSubgraph
    p: float
    weights: Weights = field(default_factory=Weights.uniform)
    instrument: Weights | None = None
    unipartite: bool = False

    def __post_init__(self):
        object.__setattr__(self, "p", check_probability(self.p))

    @property
    def n_a(self) -> int:
        return self.anchor.n_a

    @property
    def n_r(self) -> int:
        return self.anchor.n_r

    @cached_property
    def _anchor_arrays(self):
        pairs = np.array(self.anchor.pairs, dtype=np.int64).reshape(-1, 2)
        rows, cols = pairs[:, 0], pairs[:, 1]
        w = self.weights.on_pairs(rows, cols, self.unipartite)
        if self.instrument is None:
            u = np.ones(len(rows))
            if self.unipartite:
                u[rows == cols] = 0.0
        else:
            u = self.instrument.on_pairs(rows, cols, False)
        return rows, cols, w, u

    @cached_property
    def raw_instrument_sum(self) -> np.ndarray:
        rows, _, _, u = self._anchor_arrays
        return np.bincount(rows, weights=u, minlength=self.n_a)

    @cached_property
    def normalized_instrument(self) -> np.ndarray:
        """``u`` on anchor pairs, rescaled per unit to sum to one where possible."""
        rows, _, _, u = self._anchor_arrays
        s = self.raw_instrument_sum[rows]
        return np.where(s != 0, u / np.where(s != 0, s, 1.0), u)

    @cached_property
    def instrument_matrix(self) -> sp.csr_matrix:
        rows, cols, _, _ = self._anchor_arrays
        return sp.csr_matrix(
            (self.normalized_instrument, (rows, cols)), shape=(self.n_a, self.n_r)
        )

    @cached_property
    def anchor_weight(self) -> np.ndarray:
        """``sum_r w_ar c_ar`` per unit."""
        rows, _, w, _ = self._anchor_arrays
        return np.bincount(rows, weights=w, minlength=self.n_a)

    def validate(self) -> None:
        """Raise :class:`AssumptionError` for support, relevance or weight violations."""
        rows, cols, w, u = self._anchor_arrays
        if self.instrument is not None and self.instrument.kind == "explicit":
            outside = [
                (a, r) for a, r, val in self.instrument.entries if val != 0 and (a, r) not in self.anchor
            ]
            if outside:
                raise AssumptionError(
                    "support", f"instrument weight on non-anchor pair {outside[0]}", {a for a, _ in outside}
                )
        if self.unipartite:
            diag = rows == cols
            bad = rows[diag & ((u != 0) | (w != 0))]
            if len(bad):
                raise AssumptionError(
                    "unipartite_diagonal", "self pairs must carry zero exposure and instrument weight", bad
                )
            offdiag = ~diag
        else:
            offdiag = np.ones(len(rows), dtype=bool)
        bad = rows[offdiag & (w == 0)]
        if len(bad):
            raise AssumptionError("nonzero_weight", "exposure weight is zero on an anchor pair", bad)
        n_support = np.bincount(rows[u != 0], minlength=self.n_a)
        empty = np.nonzero(n_support == 0)[0]
        if len(empty):
            raise AssumptionError("relevance", "unit has no instrument (empty anchor support)", empty)
        instrument_covariance(self)


def instrument_exposure(t, config: EstimatorConfig) -> tuple[np.ndarray, np.ndarray]:
    """``z_a = sum_r T_r u_ar`` and its mean ``p sum_r u_ar`` (normalized ``u``)."""
    t = check_treatment(t, config.n_r)
    z = config.instrument_matrix @ t.astype(float)
    ez = config.p * np.asarray(config.instrument_matrix.sum(axis=1)).ravel()
    return z, ez


def instrument_covariance(config: EstimatorConfig) -> np.ndarray:
    """Closed-form ``Cov(x_a, z_a) = p(1-p) sum_r w_ar u_ar`` over anchor pairs."""
    rows, _, w, _ = config._anchor_arrays
    cov = config.p * (1.0 - config.p) * np.bincount(
        rows, weights=w * config.normalized_instrument, minlength=config.n_a
    )
    zero = np.nonzero(np.abs(cov) < 1e-14)[0]
    if len(zero):
        raise AssumptionError("relevance", "instrument is uncorrelated with exposure", zero)
    return cov


def check_identification(graph: EndogenousGraph, config: EstimatorConfig) -> None:
    """Validate every assumption the unbiasedness argument rests on.

    Edges must be r-driven, the anchor must hold under every assignment, the
    instrument must live on the anchor, anchor weights must be nonzero and
    each unit needs an instrument with nonzero covariance.
    """
    if (graph.n_a, graph.n_r) != (config.n_a, config.n_r):
        raise DimensionError("graph and estimator config dimensions differ")
    if graph.unipartite != config.unipartite:
        raise DimensionError("graph and estimator config disagree on unipartite mode")
    dep = graph.dependency
    if not graph.is_r_driven:
        offenders = {a for (a, r), s in dep.minimal_sets.items() if not set(s) <= {r}}
        raise AssumptionError(
            "r_driven",
            f"edges must depend only on their own randomization unit, graph is {dep.kind}",
            offenders,
        )
    report = verify_anchor(graph, config.anchor, "exhaustive")
    if not report.passed:
        raise AssumptionError(
            "anchor", "anchor pair does not exist under every assignment", {a for (a, _), _ in report.violations}
        )
    config.validate()


# ---------------------------------------------------------------------------
# Per-assignment estimators
# ---------------------------------------------------------------------------
def beta_hat(y, t, config: EstimatorConfig) -> np.ndarray:
    """Instrumental-variable slope ``y_a (z_a - E z_a) / Cov(x_a, z_a)``."""
    y = check_unit_vector(y, config.n_a, "y")
    cov = instrument_covariance(config)
    z, ez = instrument_exposure(t, config)
    return y * (z - ez) / cov


def _pair_arrays(realized: RealizedGraph, config: EstimatorConfig):
    """Realized pairs extended with any anchor pair missing from them."""
    rows, cols, e = realized.rows, realized.cols, realized.values.astype(float)
    keys = rows * realized.n_r + cols
    anchor = np.array(config.anchor.pairs, dtype=np.int64).reshape(-1, 2)
    akeys = anchor[:, 0] * realized.n_r + anchor[:, 1]
    missing = ~np.isin(akeys, keys)
    if missing.any():
        rows = np.concatenate([rows, anchor[missing, 0]])
        cols = np.concatenate([cols, anchor[missing, 1]])
        e = np.concatenate([e, np.zeros(int(missing.sum()))])
        keys = rows * realized.n_r + cols
    c = np.isin(keys, akeys).astype(float)
    w = config.weights.on_pairs(rows, cols, config.unipartite)
    return rows, cols, e, c, w


def w_hat(realized: RealizedGraph, t, config: EstimatorConfig) -> np.ndarray:
    """Augmented IPW estimate of ``W_a(1)``: ``sum_r T_r w_ar (e_ar - c_ar)/p + w_ar c_ar``."""
    t = check_treatment(t, realized.n_r)
    rows, cols, e, c, w = _pair_arrays(realized, config)
    term = t[cols] * w * (e - c) / config.p + w * c
    return np.bincount(rows, weights=term, minlength=realized.n_a)


def w_hat_decomposed(realized: RealizedGraph, t, config: EstimatorConfig) -> np.ndarray:
    """Same quantity as :func:`w_hat` once anchor edges are known to be present.

    ``sum_{r in V_a} w_ar + sum_{r not in V_a} T_r w_ar e_ar / p``.
    """
    t = check_treatment(t, realized.n_r)
    rows, cols, e, c, w = _pair_arrays(realized, config)
    term = np.where(c == 1, w, t[cols] * w * e / config.p)
    return np.bincount(rows, weights=term, minlength=realized.n_a)


def gamma_hat(y, t, p: float) -> np.ndarray:
    """Direct-effect IPW estimate ``T_a y_a / p - (1 - T_a) y_a / (1 - p)``.

    Only meaningful when analysis and randomization units coincide.
    """
    p = check_probability(p)
    y = np.asarray(y, dtype=float)
    t = np.asarray(t)
    if y.shape != t.shape:
        raise DimensionError("direct-effect estimates need a unipartite graph (len(y) == len(t))")
    t = check_treatment(t, len(y))
    return t * y / p - (1 - t) * y / (1.0 - p)


def mu_tilde(y, t, config: EstimatorConfig) -> float:
    """Test statistic ``mean_a beta_hat_a sum_r w_ar c_ar``; depends on ``t`` only via ``z``."""
    b = beta_hat(y, t, config)
    return math.fsum(b * config.anchor_weight) / config.n_a


@dataclass(frozen=True)
class EstimateResult:
    mu_hat: float
    beta_hat: np.ndarray
    w_hat: np.ndarray
    gamma_hat: np.ndarray | None
    instrument_cov: np.ndarray
    d_A: int
    d_R: int
    unit_bounds: np.ndarray | None = None

    @property
    def per_unit(self) -> np.ndarray:
        out = self.beta_hat * self.w_hat
        return out if self.gamma_hat is None else out + self.gamma_hat

    def to_dict(self) -> dict:
        return {
            "mu_hat": self.mu_hat,
            "per_unit": [
                {
                    "beta_hat": float(b),
                    "w_hat": float(w),
                    "gamma_hat": None if self.gamma_hat is None else float(self.gamma_hat[i]),
                    "instrument_cov": float(self.instrument_cov[i]),
                }
                for i, (b, w) in enumerate(zip(self.beta_hat, self.w_hat))
            ],
            "d_A": self.d_A,
            "d_R": self.d_R,
            "unit_bounds": None if self.unit_bounds is None else self.unit_bounds.tolist(),
        }


def unit_bound(graph: EndogenousGraph, p: float, M: float, band) -> np.ndarray:
    """Per-unit envelope ``M W_h |R_a| / (p^2 (1-p) W_l)`` on ``|beta_hat_a W_hat_a|``."""
    lo, hi = band
    deg, _ = _degrees(graph)
    return M * hi * deg / (p**2 * (1.0 - p) * lo)


def _degrees(graph: EndogenousGraph):
    on = graph.full_treatment_edges.astype(bool)
    if graph.unipartite:
        on &= graph.rows != graph.cols
    deg_a = np.bincount(graph.rows[on], minlength=graph.n_a)
    deg_r = np.bincount(graph.cols[on], minlength=graph.n_r)
    return deg_a, deg_r


def _estimate(graph, y, t, config, unipartite: bool, model: OutcomeModel | None = None):
    check_identification(graph, config)
    t = check_treatment(t, graph.n_r)
    y = check_unit_vector(y, graph.n_a, "y")
    realized = graph.realize(t)
    b = beta_hat(y, t, config)
    w = w_hat(realized, t, config)
    g = gamma_hat(y, t, config.p) if unipartite else None
    per = b * w if g is None else b * w + g
    deg_a, deg_r = _degrees(graph)
    bounds = None
    if model is not None and model.bound_M is not None and model.band is not None:
        bounds = unit_bound(graph, config.p, model.bound_M, model.band)
    return EstimateResult(
        mu_hat=math.fsum(per) / graph.n_a,
        beta_hat=b,
        w_hat=w,
        gamma_hat=g,
        instrument_cov=instrument_covariance(config),
        d_A=int(deg_a.max(initial=0)),
        d_R=int(deg_r.max(initial=0)),
        unit_bounds=bounds,
    )


def mu_hat(graph: EndogenousGraph, y, t, config: EstimatorConfig, model=None) -> EstimateResult:
    """Anchor-instrument TTE estimate ``mean_a beta_hat_a W_hat_a`` (bipartite)."""
    if graph.unipartite:
        raise DimensionError("use mu_hat_uni for unipartite graphs")
    return _estimate(graph, y, t, config, unipartite=False, model=model)


def mu_hat_uni(graph: EndogenousGraph, y, t, config: EstimatorConfig, model=None) -> EstimateResult:
    """Unipartite TTE estimate ``mean_a (beta_hat_a W_hat_a + gamma_hat_a)``."""
    if not graph.unipartite:
        raise DimensionError("mu_hat_uni needs a unipartite graph")
    return _estimate(graph, y, t, config, unipartite=True, model=model)


# ---------------------------------------------------------------------------
# Batched evaluation for Monte Carlo and enumeration
# ---------------------------------------------------------------------------
class BatchEvaluator:
    """Vectorized estimators over many assignments of one validated instance.

    ``validate=False`` is reserved for bias demonstrations that deliberately
    apply Horvitz-Thompson to graphs where the anchor estimator is invalid.
    """

    def __init__(self, graph: EndogenousGraph, model: OutcomeModel, config: EstimatorConfig | None = None,
                 validate: bool = True):
        self.graph = graph
        self.model = model
        self.config = config
        model.check_graph(graph)
        if config is not None and validate:
            check_identification(graph, config)
        self.p = config.p if config is not None else None
        self.rows, self.cols = graph.rows, graph.cols
        self.agg = _row_aggregator(graph.rows, graph.n_a)
        self.w_model = model.weights.for_graph(graph)
        if config is not None:
            c = config.anchor.mask_for(graph).astype(float) if validate else self._soft_mask(config)
            self.c = c
            self.w_cfg = config.weights.for_graph(graph)
            self.U_T = config.instrument_matrix.T.tocsr()
            self.ez = config.p * np.asarray(config.instrument_matrix.sum(axis=1)).ravel()
            self.cov = instrument_covariance(config) if validate else None

    def _soft_mask(self, config):
        pos = self.graph.pair_index(config.anchor.pairs)
        mask = np.zeros(self.graph.n_pairs)
        mask[pos[pos >= 0]] = 1.0
        return mask

    def edges(self, T) -> np.ndarray:
        return self.graph.edge_values(T)

    def outcomes(self, T, E) -> np.ndarray:
        x = np.asarray((T[:, self.cols] * E * self.w_model) @ self.agg)
        Y = self.model.alpha + self.model.beta * x
        if self.graph.unipartite:
            Y = Y + self.model.gamma * T
        return Y

    def components(self, T, Y, E):
        """``beta_hat`` and ``W_hat`` arrays of shape (B, n_a)."""
        z = np.asarray(T @ self.U_T) if T.dtype == float else np.asarray(T.astype(float) @ self.U_T)
        b = Y * (z - self.ez) / self.cov
        term = T[:, self.cols] * self.w_cfg * (E - self.c) / self.p + self.w_cfg * self.c
        w = np.asarray(term @ self.agg)
        return b, w

    def per_unit(self, T, Y=None, E=None) -> np.ndarray:
        T = check_treatment_batch(T, self.graph.n_r).astype(float)
        E = self.edges(T.astype(np.int8)) if E is None else E
        Y = self.outcomes(T, E) if Y is None else Y
        b, w = self.components(T, Y, E)
        out = b * w
        if self.graph.unipartite:
            out = out + T * Y / self.p - (1 - T) * Y / (1.0 - self.p)
        return out

    def mu_hat(self, T, Y=None) -> np.ndarray:
        return self.per_unit(T, Y).mean(axis=1)

    def mu_tilde(self, T, Y) -> np.ndarray:
        T = check_treatment_batch(T, self.graph.n_r).astype(float)
        z = np.asarray(T @ self.U_T)
        return (Y * (z - self.ez) / self.cov * self.config.anchor_weight).mean(axis=1)

    def horvitz_thompson(self, T, p: float, scale: str = "mean") -> np.ndarray:
        T = check_treatment_batch(T, self.graph.n_r)
        E = self.edges(T)
        Y = self.outcomes(T.astype(float), E)
        return ht_batch(self.rows, self.cols, self.graph.n_a, E, T.astype(float), Y, p, scale, self.agg)


# ---------------------------------------------------------------------------
# scikit-learn style wrappers
# ---------------------------------------------------------------------------
class AnchorTTEEstimator(BaseEstimator):
    """Anchor-instrument total treatment effect estimator.

    Parameters
    ----------
    p : float
        Bernoulli treatment probability of the design.
    anchor : list of (a, r) pairs or AnchorSubgraph
        Pairs known to carry an edge under every assignment.
    weights : Weights, optional
        Exposure weights ``w`` of the outcome model (uniform by default).
    instrument : Weights, optional
        Instrument weights ``u``; uniform over anchor pairs by default.

    ``fit(X, y, treatment)`` accepts an :class:`EndogenousGraph`, in which
    case every identification assumption is checked, or the observed
    :class:`RealizedGraph` / dense edge matrix, in which case the r-driven
    assumption is maintained rather than tested and only the observable
    part of the anchor assumption (anchor edges are present) is checked.
    """

    def __init__(self, p=0.5, anchor=None, weights=None, instrument=None):
        self.p = p
        self.anchor = anchor
        self.weights = weights
        self.instrument = instrument

    def _config(self, n_a, n_r, unipartite):
        anchor = self.anchor
        if anchor is None:
            raise ValueError("an anchor subgraph is required")
        if not isinstance(anchor, AnchorSubgraph):
            anchor = AnchorSubgraph(tuple(map(tuple, anchor)), n_a, n_r)
        return EstimatorConfig(
            anchor, self.p, self.weights or Weights.uniform(), self.instrument, unipartite
        )

    def fit(self, X, y, treatment):
        if isinstance(X, EndogenousGraph):
            config = self._config(X.n_a, X.n_r, X.unipartite)
            fn = mu_hat_uni if X.unipartite else mu_hat
            result = fn(X, y, treatment, config)
        else:
            realized = X if isinstance(X, RealizedGraph) else RealizedGraph.from_matrix(X)
            config = self._config(realized.n_a, realized.n_r, realized.unipartite)
            config.validate()
            present = realized.edges[tuple(np.array(config.anchor.pairs).reshape(-1, 2).T)]
            if not np.all(present == 1):
                missing = np.array(config.anchor.pairs)[present != 1]
                raise AssumptionError("anchor", "anchor edge absent from the observed graph", missing[:, 0])
            b = beta_hat(y, treatment, config)
            w = w_hat(realized, treatment, config)
            g = gamma_hat(y, treatment, config.p) if realized.unipartite else None
            per = b * w if g is None else b * w + g
            result = EstimateResult(math.fsum(per) / realized.n_a, b, w, g,
                                    instrument_covariance(config), -1, -1)
        self.config_ = config
        self.result_ = result
        self.estimate_ = result.mu_hat
        self.beta_hat_ = result.beta_hat
        self.w_hat_ = result.w_hat
        self.gamma_hat_ = result.gamma_hat
        return self

    def predict(self, X=None):
        """The fitted TTE estimate (there is nothing unit-level to predict)."""
        check_is_fitted(self, "estimate_")
        return self.estimate_


class HorvitzThompsonTTE(BaseEstimator):
    """Horvitz-Thompson TTE on the realized graph, for bias comparisons."""

    def __init__(self, p=0.5, scale="mean"):
        self.p = p
        self.scale = scale

    def fit(self, X, y, treatment):
        if isinstance(X, EndogenousGraph):
            realized = X.realize(treatment)
        elif isinstance(X, RealizedGraph):
            realized = X
        else:
            realized = RealizedGraph.from_matrix(X)
        self.estimate_ = horvitz_thompson(realized, y, treatment, self.p, self.scale)
        return self

    def predict(self, X=None):
        check_is_fitted(self, "estimate_")
        return self.estimate_
