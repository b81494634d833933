"""Replication engine, scaling and normality studies, and the bias table."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import canonical
from .canonical import Instance
from .design import assignment_matrix, assignment_probabilities
from .estimators import BatchEvaluator, horvitz_thompson
from .generators import degree_capped_instance, random_small_instance
from .outcomes import outcome, true_tte

ESTIMATORS = ("mu_hat", "mu_tilde", "ht")
FAMILIES = ("degree_capped", "random_small", "example1", "example2", "example3", "fixed")
MODES = ("anchor_tte", "ht_bias")
_CHUNK = 128


@dataclass(frozen=True)
class Scenario:
    """A family of instances indexed by size, plus the seed that freezes them.

    ``family`` picks the generator; ``params`` are its keyword arguments.
    ``size`` means ``n_a`` for ``degree_capped`` and ``n_r`` for
    ``random_small``; the canonical examples and ``fixed`` ignore it.
    ``mode="anchor_tte"`` runs the anchor estimator (canonical examples
    switch to their anchored variants); ``"ht_bias"`` studies the
    Horvitz-Thompson estimator on the instance as given.
    """

    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    fixed: Instance | None = field(default=None, compare=False)
    mode: str = "anchor_tte"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown scenario family {self.family!r}")
        if self.family == "fixed" and self.fixed is None:
            raise ValueError("fixed scenarios need an instance")

    @property
    def p(self) -> float:
        if self.fixed is not None and self.fixed.config is not None:
            return self.fixed.config.p
        return float(self.params.get("p", 0.5))

    @property
    def default_estimator(self) -> str:
        return "mu_hat" if self.mode == "anchor_tte" else "ht"

    def instance(self, size: int | None = None) -> Instance:
        params = dict(self.params)
        if self.family == "degree_capped":
            n_a = int(size if size is not None else params.pop("n_a", 200))
            params.pop("n_a", None)
            return degree_capped_instance(n_a, seed=self.seed, **params)
        if self.family == "random_small":
            n_r = int(size if size is not None else params.pop("n_r", 6))
            params.pop("n_r", None)
            n_a = int(params.pop("n_a", n_r))
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, n_r]))
            return random_small_instance(rng, n_a, n_r, **params)
        if self.family == "fixed":
            return self.fixed
        builder = {
            "example1": canonical.example1,
            "example2": canonical.example2,
            "example3": canonical.example3,
        }[self.family]
        params.pop("p", None)
        return builder(**params)

    def anchored_instance(self) -> Instance:
        params = dict(self.params)
        builder = {
            "example1": canonical.anchored_example1,
            "example2": canonical.anchored_example2,
            "example3": canonical.anchored_example3,
        }.get(self.family)
        if builder is None:
            return self.instance()
        return builder(**params)


@dataclass(frozen=True)
class ReplicationSummary:
    n_reps: int
    estimator: str
    size: int
    truth: float
    mean: float
    variance: float
    bias_vs_truth: float
    std_error: float
    ks_distance: float | None
    d_A: int
    d_R: int
    estimates: np.ndarray = field(repr=False)
    standardized_samples: np.ndarray = field(repr=False)

    @property
    def dependency_degree(self) -> int:
        return self.d_A * self.d_R

    def to_dict(self, include_samples: bool = False) -> dict:
        out = {
            "n_reps": self.n_reps,
            "estimator": self.estimator,
            "size": self.size,
            "truth": self.truth,
            "mean": self.mean,
            "variance": self.variance,
            "bias_vs_truth": self.bias_vs_truth,
            "std_error": self.std_error,
            "ks_distance": self.ks_distance,
            "d_A": self.d_A,
            "d_R": self.d_R,
            "dependency_degree": self.dependency_degree,
        }
        if include_samples:
            out["estimates"] = self.estimates.tolist()
        return out


def _degrees(graph) -> tuple[int, int]:
    on = graph.full_treatment_edges.astype(bool)
    if graph.unipartite:
        on &= graph.rows != graph.cols
    d_a = np.bincount(graph.rows[on], minlength=graph.n_a).max(initial=0)
    d_r = np.bincount(graph.cols[on], minlength=graph.n_r).max(initial=0)
    return int(d_a), int(d_r)


def _evaluator(inst: Instance, estimator: str, p: float) -> BatchEvaluator:
    if estimator == "ht":
        return BatchEvaluator(inst.graph, inst.model, inst.config, validate=False)
    if inst.config is None:
        raise ValueError("this scenario has no estimator configuration")
    return BatchEvaluator(inst.graph, inst.model, inst.config)


def draw_assignments(seed, size: int, n_r: int, p: float, n_reps: int) -> np.ndarray:
    """One assignment per replication, each from its own seed substream."""
    children = np.random.SeedSequence([int(seed), int(size), 0x5EED]).spawn(n_reps)
    out = np.empty((n_reps, n_r), dtype=np.int8)
    for i, child in enumerate(children):
        out[i] = np.random.default_rng(child).random(n_r) < p
    return out


def replicate(
    scenario: Scenario, size: int | None, n_reps: int, estimator: str | None = None
) -> ReplicationSummary:
    """Draw ``n_reps`` assignments and summarize the chosen estimator against the truth.

    ``estimator`` defaults to the scenario's mode.  The truth is the total
    treatment effect, except for ``mu_tilde`` whose target is
    ``mean(beta_a sum_r w_ar c_ar)``.
    """
    estimator = estimator or scenario.default_estimator
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}")
    if n_reps < 2:
        raise ValueError("need at least two replications")
    inst = scenario.instance(size) if estimator == "ht" else _estimator_instance(scenario, size)
    p = inst.config.p if inst.config is not None else scenario.p
    ev = _evaluator(inst, estimator, p)
    graph = inst.graph
    T = draw_assignments(scenario.seed, size or 0, graph.n_r, p, n_reps)
    est = np.empty(n_reps)
    for i in range(0, n_reps, _CHUNK):
        Tb = T[i:i + _CHUNK]
        if estimator == "mu_hat":
            est[i:i + _CHUNK] = ev.mu_hat(Tb)
        elif estimator == "mu_tilde":
            Tf = Tb.astype(float)
            est[i:i + _CHUNK] = ev.mu_tilde(Tb, ev.outcomes(Tf, ev.edges(Tb)))
        else:
            est[i:i + _CHUNK] = ev.horvitz_thompson(Tb, p)
    if estimator == "mu_tilde":
        cfg = inst.config
        truth = float(np.mean(inst.model.beta * cfg.anchor_weight))
    else:
        truth = true_tte(graph, inst.model)
    mean = math.fsum(est) / n_reps
    var = float(np.var(est, ddof=1))
    sd = math.sqrt(var)
    if sd > 0:
        standardized = (est - truth) / sd
        ks = float(stats.kstest(standardized, "norm").statistic)
    else:
        standardized = np.zeros(n_reps)
        ks = None
    d_a, d_r = _degrees(graph)
    return ReplicationSummary(
        n_reps=n_reps,
        estimator=estimator,
        size=int(size or graph.n_a),
        truth=truth,
        mean=mean,
        variance=var,
        bias_vs_truth=mean - truth,
        std_error=sd / math.sqrt(n_reps),
        ks_distance=ks,
        d_A=d_a,
        d_R=d_r,
        estimates=est,
        standardized_samples=standardized,
    )


def _estimator_instance(scenario: Scenario, size):
    if scenario.family.startswith("example"):
        return scenario.anchored_instance()
    return scenario.instance(size)


@dataclass(frozen=True)
class ScalingReport:
    sizes: tuple
    variances: tuple
    envelopes: tuple
    slope: float
    intercept: float
    n_reps: int
    d_A: tuple
    d_R: tuple

    def envelope_ratios(self) -> tuple:
        return tuple(v / e for v, e in zip(self.variances, self.envelopes))

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "variances": list(self.variances),
            "envelopes": list(self.envelopes),
            "envelope_ratios": list(self.envelope_ratios()),
            "slope": self.slope,
            "intercept": self.intercept,
            "n_reps": self.n_reps,
            "d_A": list(self.d_A),
            "d_R": list(self.d_R),
        }


def variance_envelope(inst: Instance) -> float:
    """``M^2 W_h^2 d_A^3 d_R / (p^4 (1-p)^2 W_l^2 n_a)``."""
    model, p = inst.model, inst.config.p
    if model.bound_M is None or model.band is None:
        raise ValueError("the envelope needs a declared outcome bound and weight band")
    lo, hi = model.band
    d_a, d_r = _degrees(inst.graph)
    return model.bound_M**2 * hi**2 * d_a**3 * d_r / (p**4 * (1 - p) ** 2 * lo**2 * inst.graph.n_a)


def variance_scaling_study(scenario: Scenario, sizes, n_reps: int) -> ScalingReport:
    """Empirical ``Var(mu_hat)`` across sizes with its log-log slope against ``n_a``."""
    sizes = [int(s) for s in sizes]
    if len(sizes) < 3:
        raise ValueError("a scaling study needs at least three sizes")
    if sorted(sizes) != sizes or len(set(sizes)) != len(sizes):
        raise ValueError("sizes must be strictly increasing")
    variances, envelopes, d_as, d_rs, n_as = [], [], [], [], []
    for size in sizes:
        inst = scenario.instance(size)
        summary = replicate(scenario, size, n_reps, "mu_hat")
        variances.append(summary.variance)
        envelopes.append(variance_envelope(inst))
        d_as.append(summary.d_A)
        d_rs.append(summary.d_R)
        n_as.append(inst.graph.n_a)
    slope, intercept = np.polyfit(np.log(n_as), np.log(variances), 1)
    return ScalingReport(tuple(sizes), tuple(variances), tuple(envelopes), float(slope),
                         float(intercept), n_reps, tuple(d_as), tuple(d_rs))


def normality_diagnostic(scenario: Scenario, size: int, n_reps: int) -> float:
    """Kolmogorov-Smirnov distance of standardized ``mu_hat`` draws from N(0, 1).

    Standardization uses the empirical standard deviation across replications.
    """
    if n_reps < 1000:
        raise ValueError("the normality diagnostic needs at least 1000 replications")
    summary = replicate(scenario, size, n_reps, "mu_hat")
    if summary.ks_distance is None:
        raise ValueError("estimator has zero variance; nothing to standardize")
    return summary.ks_distance


# ---------------------------------------------------------------------------
# Exact bias of the canonical examples
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class BiasRow:
    example: int
    p: float
    tte: float
    ht_expectation: float
    ht_total_expectation: float
    mu_hat_expectation: float | None
    case_table: tuple = ()

    def to_dict(self) -> dict:
        return {
            "example": self.example,
            "p": self.p,
            "tte": self.tte,
            "ht_expectation": self.ht_expectation,
            "ht_total_expectation": self.ht_total_expectation,
            "mu_hat_expectation": self.mu_hat_expectation,
            "case_table": [dict(row) for row in self.case_table],
        }


@dataclass(frozen=True)
class BiasReport:
    rows: tuple

    def row(self, example: int) -> BiasRow:
        return next(r for r in self.rows if r.example == example)

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}


def _exact_ht(inst: Instance, p: float, scale: str):
    T = assignment_matrix(inst.graph.n_r)
    probs = assignment_probabilities(inst.graph.n_r, p)
    values = []
    for t in T:
        realized = inst.graph.realize(t)
        y = outcome(inst.model, realized, t)
        values.append(horvitz_thompson(realized, y, t, p, scale))
    return math.fsum(pr * v for pr, v in zip(probs, values)), T, values


def _exact_mu_hat(inst: Instance) -> float:
    ev = BatchEvaluator(inst.graph, inst.model, inst.config)
    T = assignment_matrix(inst.graph.n_r)
    probs = assignment_probabilities(inst.graph.n_r, inst.config.p)
    return math.fsum(probs * ev.mu_hat(T))


def bias_table(examples=(1, 2, 3), p: float = 0.5, *, y: float = 1.0, y1: float | None = None,
               y2: float | None = None) -> BiasReport:
    """Exact Horvitz-Thompson and anchor-estimator expectations on the canonical examples.

    ``y`` is the outcome of example 1; ``y1`` and ``y2`` default to ``(3, 1)``
    for example 2 and ``(0, 16)`` for example 3.
    """
    rows = []
    for ex in examples:
        if ex == 1:
            inst, anchored = canonical.example1(y), canonical.anchored_example1(y, p)
        elif ex == 2:
            a, b = (3.0 if y1 is None else y1), (1.0 if y2 is None else y2)
            inst, anchored = canonical.example2(a, b), canonical.anchored_example2(a, b, p)
        elif ex == 3:
            a, b = (0.0 if y1 is None else y1), (16.0 if y2 is None else y2)
            inst, anchored = canonical.example3(a, b), canonical.anchored_example3(a, b, 0.0, p)
        else:
            raise ValueError(f"unknown example {ex}")
        ht_mean, T, values = _exact_ht(inst, p, "mean")
        ht_total, _, totals = _exact_ht(inst, p, "total")
        table = ()
        if ex == 3:
            table = tuple(
                (("assignment", "".join(str(int(b)) for b in t)), ("ht", v), ("ht_total", tv))
                for t, v, tv in zip(T, values, totals)
            )
        rows.append(BiasRow(ex, p, true_tte(inst.graph, inst.model), ht_mean, ht_total,
                            _exact_mu_hat(anchored), table))
    return BiasReport(tuple(rows))
