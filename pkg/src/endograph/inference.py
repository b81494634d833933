"""Randomization and t-tests: edge exogeneity, r-driven edges, sharp null."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import stats
from scipy.special import gammaln

from ._validation import DimensionError, check_probability, check_treatment, check_unit_vector
from .estimators import EstimatorConfig, instrument_covariance
from .graph import RealizedGraph

MIN_RESAMPLES = 100
DEFAULT_RESAMPLES = 2000
_CHUNK = 256


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    kind: str
    statistic: float
    p_value: float
    critical_value: float | None
    n_resamples: int
    reject: bool
    alpha: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def upper_critical_value(samples, alpha: float) -> float:
    """Smallest resampled value with at least a ``1 - alpha`` fraction of samples at or below it."""
    s = np.sort(np.asarray(samples, dtype=float))
    k = max(int(math.ceil((1.0 - alpha) * len(s) - 1e-9)), 1)
    return float(s[k - 1])


def _plus_one_p_value(null, observed) -> float:
    return (1.0 + float(np.sum(null >= observed))) / (1.0 + len(null))


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return alpha


# ---------------------------------------------------------------------------
# Binomial-likelihood test of edge exogeneity
# ---------------------------------------------------------------------------
def binomial_log_likelihood(edges: sp.csr_matrix, T: np.ndarray, p: float) -> np.ndarray:
    """``W`` for each row of ``T``: summed log Binomial(k_a, p) pmf of treated-edge counts."""
    T = np.atleast_2d(T).astype(float)
    k = np.asarray(edges.sum(axis=1)).ravel()
    s = np.asarray(edges @ T.T).T  # (B, n_a)
    log_choose = gammaln(k + 1) - gammaln(s + 1) - gammaln(k - s + 1)
    return np.sum(log_choose + s * math.log(p) + (k - s) * math.log1p(-p), axis=1)


def exogeneity_test(
    realized: RealizedGraph,
    t,
    p: float,
    n_resamples: int = DEFAULT_RESAMPLES,
    alpha: float = 0.05,
    seed: int = 0,
    tail: str = "lower",
) -> TestResult:
    """Randomization test of ``H0: every edge ignores treatment``.

    Under the null the observed edges are independent of ``T``, so the null
    distribution of the binomial log-likelihood ``W`` is simulated by
    redrawing ``T`` with the observed edges held fixed.  Treatment-driven
    edge formation makes treated-edge counts atypical and pushes ``W`` down,
    hence ``tail="lower"`` (reject for small ``W``).  ``tail="upper"``
    rejects for large ``W`` and ``"two-sided"`` uses ``|W - mean(W*)|``.
    The test rejects when the +1 p-value is at most ``alpha``, which keeps
    it valid when the statistic has ties.
    """
    p = check_probability(p)
    alpha = _check_alpha(alpha)
    if n_resamples < MIN_RESAMPLES:
        raise ValueError(f"n_resamples must be at least {MIN_RESAMPLES}")
    if tail not in ("lower", "upper", "two-sided"):
        raise ValueError(f"unknown tail {tail!r}")
    t = check_treatment(t, realized.n_r)
    E = sp.csr_matrix(realized.edges.astype(float))
    observed = float(binomial_log_likelihood(E, t, p)[0])
    rng = np.random.default_rng(seed)
    null = np.concatenate([
        binomial_log_likelihood(E, (rng.random((min(_CHUNK, n_resamples - i), realized.n_r)) < p), p)
        for i in range(0, n_resamples, _CHUNK)
    ])
    if tail == "upper":
        stat, ref = observed, null
    elif tail == "lower":
        stat, ref = -observed, -null
    else:
        centre = float(np.mean(null))
        stat, ref = abs(observed - centre), np.abs(null - centre)
    crit = upper_critical_value(ref, alpha)
    p_value = _plus_one_p_value(ref, stat)
    return TestResult(
        kind="exogeneity",
        statistic=observed,
        p_value=p_value,
        critical_value=crit if tail == "upper" else (-crit if tail == "lower" else crit),
        n_resamples=n_resamples,
        reject=p_value <= alpha,
        alpha=alpha,
        details={"tail": tail, "null_mean": float(np.mean(null)), "null_sd": float(np.std(null))},
    )


# ---------------------------------------------------------------------------
# Difference-in-means test for r-driven edges
# ---------------------------------------------------------------------------
def net_edges(realized: RealizedGraph, pre_edges) -> np.ndarray:
    """``E_r = sum_a (e_ar - e^pre_ar)`` per randomization unit; ``pre_edges`` is an (m, 2) pair list."""
    post = np.bincount(realized.cols, weights=realized.values, minlength=realized.n_r)
    pre = np.asarray(pre_edges, dtype=np.int64).reshape(-1, 2)
    if len(pre) and (pre[:, 1].max() >= realized.n_r or pre[:, 0].max() >= realized.n_a):
        raise DimensionError("pre_edges index out of range")
    before = np.bincount(pre[:, 1], minlength=realized.n_r)
    return post - before


def r_driven_ttest(
    realized: RealizedGraph, pre_edges, t, alpha: float = 0.05, alternative: str = "two-sided"
) -> TestResult:
    """Welch t-test of equal mean net edge change for treated and control units."""
    alpha = _check_alpha(alpha)
    t = check_treatment(t, realized.n_r)
    net = net_edges(realized, pre_edges).astype(float)
    treated, control = net[t == 1], net[t == 0]
    if len(treated) < 2 or len(control) < 2:
        raise ValueError("each treatment arm needs at least two randomization units")
    diff = treated.mean() - control.mean()
    v1, v0 = treated.var(ddof=1) / len(treated), control.var(ddof=1) / len(control)
    if v1 + v0 == 0:
        statistic = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        p_value = 1.0 if diff == 0 else 0.0
        df = float(len(net) - 2)
    else:
        res = stats.ttest_ind(treated, control, equal_var=False, alternative=alternative)
        statistic, p_value = float(res.statistic), float(res.pvalue)
        df = float(res.df)
    q = 1 - alpha / 2 if alternative == "two-sided" else 1 - alpha
    return TestResult(
        kind="r_driven_ttest",
        statistic=statistic,
        p_value=p_value,
        critical_value=float(stats.t.ppf(q, df)),
        n_resamples=0,
        reject=bool(p_value < alpha),
        alpha=alpha,
        details={"alternative": alternative, "mean_difference": float(diff), "df": df},
    )


# ---------------------------------------------------------------------------
# Sharp-null randomization test
# ---------------------------------------------------------------------------
def _mu_tilde_coefficients(y, config: EstimatorConfig) -> np.ndarray:
    """Per-unit weight on ``z_a - E z_a`` in the test statistic."""
    return y * config.anchor_weight / instrument_covariance(config) / config.n_a


def mu_tilde_null(y, config: EstimatorConfig, n_resamples: int, seed: int = 0) -> np.ndarray:
    """Draws of the test statistic with ``y`` held fixed and ``T`` redrawn.

    Only anchor-covered coordinates of ``T`` affect the statistic, so only
    those are drawn.
    """
    y = check_unit_vector(y, config.n_a, "y")
    U = config.instrument_matrix.tocsc()
    used = np.flatnonzero(np.diff(U.indptr) > 0)
    U_used = U[:, used].T.tocsr()  # (|used|, n_a)
    ez = config.p * np.asarray(U.sum(axis=1)).ravel()
    coef = _mu_tilde_coefficients(y, config)
    rng = np.random.default_rng(seed)
    out = []
    for i in range(0, n_resamples, _CHUNK):
        b = min(_CHUNK, n_resamples - i)
        Tb = (rng.random((b, len(used))) < config.p).astype(float)
        z = np.asarray(Tb @ U_used)
        out.append((z - ez) @ coef)
    return np.concatenate(out) if out else np.zeros(0)


def sharp_null_test(
    y,
    t,
    config: EstimatorConfig,
    n_resamples: int = DEFAULT_RESAMPLES,
    alpha: float = 0.05,
    seed: int = 0,
) -> TestResult:
    """Randomization test of ``beta_a = 0`` for all units.

    ``c_alpha`` is the upper-``alpha`` quantile of the resampled
    ``|mu_tilde|``.  The test rejects when the +1 p-value is at most
    ``alpha``.  With a continuous null this matches ``|mu_tilde| >= c_alpha``.
    Under ties it stays valid: a statistic that is identically zero never
    rejects.
    """
    alpha = _check_alpha(alpha)
    if n_resamples < 1:
        raise ValueError("n_resamples must be positive")
    config.validate()
    y = check_unit_vector(y, config.n_a, "y")
    t = check_treatment(t, config.n_r)
    z = config.instrument_matrix @ t.astype(float)
    ez = config.p * np.asarray(config.instrument_matrix.sum(axis=1)).ravel()
    observed = float((z - ez) @ _mu_tilde_coefficients(y, config))
    null = np.abs(mu_tilde_null(y, config, n_resamples, seed))
    crit = upper_critical_value(null, alpha)
    p_value = _plus_one_p_value(null, abs(observed))
    return TestResult(
        kind="sharp_null",
        statistic=observed,
        p_value=p_value,
        critical_value=crit,
        n_resamples=n_resamples,
        reject=p_value <= alpha,
        alpha=alpha,
    )
