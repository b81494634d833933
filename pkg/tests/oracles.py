"""Brute-force reference implementations used as test oracles.

Everything here is written with plain loops over dictionaries and
``itertools.product``, without the package's compiled tables, sparse
matrices or batch evaluators.  An instance is described by plain Python
data: an edge function ``edge(a, r, t) -> 0/1`` plus dictionaries of
weights.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass


@dataclass
class PlainInstance:
    n_a: int
    n_r: int
    edge: object  # callable (a, r, t) -> int
    alpha: list
    beta: list
    gamma: list
    w: dict  # (a, r) -> weight
    anchor: set  # {(a, r)}
    u: dict  # (a, r) -> instrument weight (unnormalized)
    p: float
    unipartite: bool = False


def from_package(inst) -> PlainInstance:
    """Translate a package instance into plain data, via the scalar rule path."""
    graph, model, config = inst.graph, inst.model, inst.config
    rules = graph.rules

    def edge(a, r, t):
        rule = rules.get((a, r))
        if rule is None:
            return 0
        code = 0
        for d in rule.depends_on:
            code = 2 * code + int(t[d])
        return rule.table[code]

    w = {}
    for a in range(graph.n_a):
        for r in range(graph.n_r):
            if model.weights.kind == "uniform":
                w[(a, r)] = 0.0 if (graph.unipartite and a == r) else model.weights.value
            else:
                w[(a, r)] = dict(((x, y), v) for x, y, v in model.weights.entries).get((a, r), 0.0)
    anchor = set(config.anchor.pairs) if config is not None else set()
    if config is None or config.instrument is None:
        u = {(a, r): (0.0 if (graph.unipartite and a == r) else 1.0) for (a, r) in anchor}
    else:
        table = {(x, y): v for x, y, v in config.instrument.entries}
        u = {(a, r): table.get((a, r), 0.0) for (a, r) in anchor}
    return PlainInstance(
        graph.n_a, graph.n_r, edge,
        [float(v) for v in model.alpha], [float(v) for v in model.beta], [float(v) for v in model.gamma],
        w, anchor, u, config.p if config is not None else 0.5, graph.unipartite,
    )


def assignments(n_r, p):
    """All assignments with their Bernoulli(p) probabilities."""
    for t in itertools.product((0, 1), repeat=n_r):
        k = sum(t)
        yield t, p**k * (1 - p) ** (n_r - k)


def expectation(fn, n_r, p):
    return math.fsum(prob * fn(t) for t, prob in assignments(n_r, p))


def covariance(f, g, n_r, p):
    ef, eg = expectation(f, n_r, p), expectation(g, n_r, p)
    return expectation(lambda t: (f(t) - ef) * (g(t) - eg), n_r, p)


def outcomes(inst: PlainInstance, t):
    y = []
    for a in range(inst.n_a):
        x = sum(t[r] * inst.edge(a, r, t) * inst.w[(a, r)] for r in range(inst.n_r))
        val = inst.alpha[a] + inst.beta[a] * x
        if inst.unipartite:
            val += inst.gamma[a] * t[a]
        y.append(val)
    return y


def tte(inst: PlainInstance):
    ones, zeros = (1,) * inst.n_r, (0,) * inst.n_r
    y1, y0 = outcomes(inst, ones), outcomes(inst, zeros)
    return math.fsum(a - b for a, b in zip(y1, y0)) / inst.n_a


def horvitz_thompson(n_a, n_r, edge, y, t, p, total=False):
    acc = []
    for a in range(n_a):
        nbrs = [r for r in range(n_r) if edge(a, r, t)]
        if not nbrs:
            acc.append(0.0)
            continue
        treated = all(t[r] == 1 for r in nbrs)
        control = all(t[r] == 0 for r in nbrs)
        acc.append(y[a] * (treated / p ** len(nbrs) - control / (1 - p) ** len(nbrs)))
    s = math.fsum(acc)
    return s if total else s / n_a


def _normalized_u(inst, a):
    raw = {r: inst.u[(a, r)] for (b, r) in inst.anchor if b == a}
    s = sum(raw.values())
    return {r: v / s for r, v in raw.items()}


def beta_hat(inst, y, t, a):
    u = _normalized_u(inst, a)
    z = sum(t[r] * v for r, v in u.items())
    ez = inst.p * sum(u.values())
    cov = inst.p * (1 - inst.p) * sum(inst.w[(a, r)] * v for r, v in u.items())
    return y[a] * (z - ez) / cov


def w_hat(inst, t, a):
    total = 0.0
    for r in range(inst.n_r):
        c = 1 if (a, r) in inst.anchor else 0
        e = inst.edge(a, r, t)
        total += t[r] * inst.w[(a, r)] * (e - c) / inst.p + inst.w[(a, r)] * c
    return total


def gamma_hat(y, t, p, a):
    return t[a] * y[a] / p - (1 - t[a]) * y[a] / (1 - p)


def mu_hat(inst, t):
    y = outcomes(inst, t)
    terms = []
    for a in range(inst.n_a):
        val = beta_hat(inst, y, t, a) * w_hat(inst, t, a)
        if inst.unipartite:
            val += gamma_hat(y, t, inst.p, a)
        terms.append(val)
    return math.fsum(terms) / inst.n_a


def mu_tilde(inst, t):
    y = outcomes(inst, t)
    terms = []
    for a in range(inst.n_a):
        anchored = sum(inst.w[(a, r)] for (b, r) in inst.anchor if b == a)
        terms.append(beta_hat(inst, y, t, a) * anchored)
    return math.fsum(terms) / inst.n_a


def mu_star(inst):
    """``mean(beta_a sum_r w_ar c_ar)``: the target of ``mu_tilde``."""
    return math.fsum(
        inst.beta[a] * sum(inst.w[(a, r)] for (b, r) in inst.anchor if b == a) for a in range(inst.n_a)
    ) / inst.n_a


def full_treatment_weight(inst, a):
    ones = (1,) * inst.n_r
    return sum(inst.w[(a, r)] * inst.edge(a, r, ones) for r in range(inst.n_r))
