"""Random instance families.

Every generator draws its structure from a seeded ``numpy`` generator and
freezes it into edge tables, so the potential edge outcomes are fixed before
any treatment is assigned.
"""

from __future__ import annotations

import numpy as np

from .canonical import Instance
from .estimators import EstimatorConfig
from .graph import AnchorSubgraph, EndogenousGraph, PairRule
from .outcomes import OutcomeModel, Weights, declared_bound

# r-driven (E(T_r=0), E(T_r=1)) patterns for non-anchor pairs
_PATTERNS = ((0, 1), (1, 0), (1, 1))


def random_small_instance(
    rng: np.random.Generator,
    n_a: int,
    n_r: int,
    *,
    unipartite: bool = False,
    banded: bool = False,
    with_gamma: bool = False,
    p: float | None = None,
    explicit_instrument: bool = True,
) -> Instance:
    """Random r-driven instance satisfying every identification assumption.

    Each unit gets one to three anchor pairs; every other pair carries an
    r-driven edge with probability one half.  Exposure weights are random
    (positive on anchor pairs, either sign elsewhere) unless ``banded``, in
    which case ``|w_ar| |R_a|`` is drawn inside ``[W_l, W_h] = [0.5, 2]`` and
    the model declares ``M`` and the band.
    """
    if unipartite and n_a != n_r:
        raise ValueError("unipartite instances need n_a == n_r")
    p = float(rng.uniform(0.15, 0.85)) if p is None else p
    rules: dict = {}
    anchor = []
    for a in range(n_a):
        choices = [r for r in range(n_r) if not (unipartite and r == a)]
        k = int(rng.integers(1, min(3, len(choices)) + 1))
        picked = set(rng.choice(choices, size=k, replace=False).tolist())
        for r in choices:
            if r in picked:
                rules[(a, r)] = PairRule.constant(1)
                anchor.append((a, r))
            elif rng.random() < 0.5:
                e0, e1 = _PATTERNS[int(rng.integers(len(_PATTERNS)))]
                rules[(a, r)] = PairRule.r_driven(r, e0, e1) if e0 != e1 else PairRule.constant(1)
    graph = EndogenousGraph(n_a, n_r, rules, unipartite=unipartite, kind="r_driven")
    anchor_set = AnchorSubgraph(tuple(anchor), n_a, n_r)

    rows, cols = graph.rows, graph.cols
    is_anchor = anchor_set.mask_for(graph)
    band = None
    if banded:
        band = (0.5, 2.0)
        on = graph.full_treatment_edges.astype(bool) & (rows != cols if unipartite else True)
        deg = np.bincount(rows[on], minlength=n_a)
        w = rng.uniform(*band, size=len(rows)) / np.maximum(deg[rows], 1)
    else:
        w = rng.uniform(0.5, 2.0, size=len(rows))
        flip = (~is_anchor) & (rng.random(len(rows)) < 0.3)
        w[flip] *= -1
    if unipartite:
        w[rows == cols] = 0.0
    weights = Weights.from_pairs(rows, cols, w)

    instrument = None
    if explicit_instrument:
        arows = np.array([a for a, _ in anchor_set.pairs])
        acols = np.array([r for _, r in anchor_set.pairs])
        instrument = Weights.from_pairs(arows, acols, rng.uniform(0.2, 3.0, size=len(arows)))

    alpha = rng.normal(0.0, 2.0, size=n_a)
    beta = rng.normal(0.0, 1.5, size=n_a)
    gamma = rng.normal(0.0, 1.5, size=n_a) if (unipartite and with_gamma) else None
    model = OutcomeModel(alpha, beta, gamma, weights, band=band)
    if banded:
        model = OutcomeModel(alpha, beta, gamma, weights, declared_bound(graph, model), band)
    config = EstimatorConfig(anchor_set, p, weights, instrument, unipartite)
    return Instance(graph, model, config)


def _capped_neighbours(rng, n_a, n_r, k, cap) -> np.ndarray:
    """(n_a, k) distinct neighbours per unit with at most ``cap`` units per column."""
    if n_r * cap < n_a * k:
        raise ValueError(f"capacity {n_r}*{cap} cannot host {n_a}*{k} edges")
    load = np.zeros(n_r, dtype=np.int64)
    out = np.empty((n_a, k), dtype=np.int64)
    for a in range(n_a):
        avail = np.flatnonzero(load < cap)
        if len(avail) < k:
            raise ValueError("degree cap too tight for the requested neighbours")
        pick = rng.choice(avail, size=k, replace=False)
        load[pick] += 1
        out[a] = pick
    return out


def degree_capped_instance(
    n_a: int,
    *,
    seed: int = 0,
    r_ratio: float = 1.0,
    anchors: int = 2,
    created: int = 1,
    deleted: int = 0,
    d_R: int = 8,
    p: float = 0.5,
    weights: str = "uniform",
    alpha=(0.0, 2.0),
    beta=(0.5, 1.5),
) -> Instance:
    """Bounded-degree bipartite r-driven instance.

    Each analysis unit gets ``anchors`` always-present neighbours,
    ``created`` neighbours whose edge exists iff they are treated, and
    ``deleted`` neighbours whose edge exists iff they are untreated.  No
    randomization unit takes part in more than ``d_R`` such pairs.  Outcome
    intercepts and slopes are uniform on the given ranges.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, n_a]))
    n_r = max(1, int(round(r_ratio * n_a)))
    k = anchors + created + deleted
    nb = _capped_neighbours(rng, n_a, n_r, k, d_R)
    rows = np.repeat(np.arange(n_a), k)
    cols = nb.ravel()
    role = np.tile(np.repeat([0, 1, 2], [anchors, created, deleted]), n_a)
    tables = {0: PairRule.constant(1)}
    rules = {}
    for a, r, kind in zip(rows.tolist(), cols.tolist(), role.tolist()):
        if kind == 0:
            rules[(a, r)] = tables[0]
        elif kind == 1:
            rules[(a, r)] = PairRule.r_driven(r, 0, 1)
        else:
            rules[(a, r)] = PairRule.r_driven(r, 1, 0)
    pre = [(a, r) for a, r, kind in zip(rows.tolist(), cols.tolist(), role.tolist()) if kind != 1]
    graph = EndogenousGraph(n_a, n_r, rules, pre_edges=pre, kind="r_driven")
    anchor = AnchorSubgraph(tuple((a, r) for a, r, kind in zip(rows.tolist(), cols.tolist(), role.tolist()) if kind == 0), n_a, n_r)

    reach = anchors + created
    if weights == "uniform":
        w = Weights.uniform(1.0)
        band = (float(reach), float(reach))
    elif weights == "degree":
        w = Weights.degree_normalized(graph)
        band = (1.0, 1.0)
    else:
        raise ValueError(f"unknown weight scheme {weights!r}")
    a_vals = rng.uniform(*alpha, size=n_a)
    b_vals = rng.uniform(*beta, size=n_a)
    model = OutcomeModel(a_vals, b_vals, None, w, band=band)
    model = OutcomeModel(a_vals, b_vals, None, w, declared_bound(graph, model), band)
    config = EstimatorConfig(anchor, p, w)
    return Instance(graph, model, config)


# ---------------------------------------------------------------------------
# Edge-formation DGPs for the detection tests
# ---------------------------------------------------------------------------
def _random_pairs(rng, n_a, n_r, per_unit):
    rows = np.repeat(np.arange(n_a), per_unit)
    cols = np.concatenate([rng.choice(n_r, size=per_unit, replace=False) for _ in range(n_a)])
    return rows, cols


def exogenous_graph(n_a: int, n_r: int, *, degree: int = 4, churn: float = 0.3, seed: int = 0) -> EndogenousGraph:
    """Constant random edges; pre-experiment edges differ by treatment-free churn."""
    rng = np.random.default_rng(seed)
    rows, cols = _random_pairs(rng, n_a, n_r, degree)
    rules = {(a, r): 1 for a, r in zip(rows.tolist(), cols.tolist())}
    keep = rng.random(len(rows)) >= churn
    pre = list(zip(rows[keep].tolist(), cols[keep].tolist()))
    extra_rows, extra_cols = _random_pairs(rng, n_a, n_r, 1)
    add = rng.random(n_a) < churn * degree / 2
    pre += [(a, r) for a, r in zip(extra_rows[add].tolist(), extra_cols[add].tolist()) if (a, r) not in rules]
    return EndogenousGraph(n_a, n_r, rules, pre_edges=pre, kind="exogenous")


def creation_graph(
    n_a: int, n_r: int, *, degree: int = 4, created_per_r: float = 1.0, churn: float = 0.3, seed: int = 0
) -> EndogenousGraph:
    """Exogenous base edges plus edges that treated randomization units create.

    Randomization unit ``r`` has ``K_r ~ Poisson(created_per_r)`` potential
    new partners whose edge exists iff ``T_r = 1``.
    """
    base = exogenous_graph(n_a, n_r, degree=degree, churn=churn, seed=seed)
    rng = np.random.default_rng([seed, 1])
    rules = dict(base.rules)
    counts = rng.poisson(created_per_r, size=n_r)
    for r, k in enumerate(counts.tolist()):
        for a in rng.choice(n_a, size=min(k, n_a), replace=False).tolist():
            if (a, r) not in rules:
                rules[(a, r)] = PairRule.r_driven(r, 0, 1)
    return EndogenousGraph(n_a, n_r, rules, pre_edges=base.pre_edges, kind="r_driven")


def gatekeeper_graph(n_a: int, *, extra_degree: int = 3, seed: int = 0) -> EndogenousGraph:
    """Replicated gatekeeper structure: ``e_{a, 2a} = 1(T_{2a+1} = 1)``.

    Conditional on the edge existing its treatment is still Bernoulli(p),
    so the binomial-likelihood test has no power here.  ``extra_degree``
    constant edges per unit into a separate pool make the statistic less
    discrete.
    """
    rng = np.random.default_rng(seed)
    n_pool = max(4 * extra_degree, n_a)
    n_r = 2 * n_a + n_pool
    rules = {}
    for a in range(n_a):
        rules[(a, 2 * a)] = PairRule((2 * a + 1,), (0, 1))
        for r in rng.choice(n_pool, size=extra_degree, replace=False).tolist():
            rules[(a, 2 * n_a + r)] = 1
    pre = [k for k, v in rules.items() if isinstance(v, int)]
    return EndogenousGraph(n_a, n_r, rules, pre_edges=pre)
