"""Endogenous interference graphs.

An :class:`EndogenousGraph` stores, for every candidate pair ``(a, r)``, a
deterministic edge potential-outcome function ``E_ar(T)``.  Each function is
kept as a truth table over the treatments of its declared dependency set
``S_ar``; pairs that are not listed never carry an edge.  Stochastic edge
generators are frozen into tables at construction (see
:mod:`endograph.generators`), so all randomness downstream comes from the
treatment assignment alone.

Tables are indexed by the integer whose binary digits are the treatments of
``depends_on`` in order, first entry most significant.  The JSON bitstring
key ``"01"`` for ``depends_on=[3, 5]`` therefore means ``T_3 = 0, T_5 = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping

import numpy as np

from ._validation import (
    AssumptionError,
    CapExceededError,
    DimensionError,
    check_pairs,
    check_treatment,
    check_treatment_batch,
)

EXOGENOUS = "exogenous"
R_DRIVEN = "r_driven"
SET_DRIVEN = "set_driven"
UNRESTRICTED = "unrestricted"
KINDS = (EXOGENOUS, R_DRIVEN, SET_DRIVEN, UNRESTRICTED)
_KIND_RANK = {k: i for i, k in enumerate(KINDS)}

DEPENDENCY_CAP = 16
ENUMERATION_CAP = 20


@dataclass(frozen=True)
class UnitSets:
    n_a: int
    n_r: int
    unipartite: bool = False

    def __post_init__(self):
        if self.n_a < 1 or self.n_r < 1:
            raise ValueError("need at least one analysis and one randomization unit")
        if self.unipartite and self.n_a != self.n_r:
            raise ValueError("unipartite graphs need n_a == n_r")


@dataclass(frozen=True)
class PairRule:
    """Truth table of one edge potential outcome over ``depends_on``."""

    depends_on: tuple[int, ...]
    table: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "depends_on", tuple(int(d) for d in self.depends_on))
        object.__setattr__(self, "table", tuple(int(v) for v in self.table))
        if len(set(self.depends_on)) != len(self.depends_on):
            raise ValueError("depends_on contains duplicates")
        if len(self.table) != 2 ** len(self.depends_on):
            raise ValueError(
                f"table has {len(self.table)} entries, expected {2 ** len(self.depends_on)}"
            )
        if any(v not in (0, 1) for v in self.table):
            raise ValueError("edge tables must be 0/1 valued")

    @classmethod
    def constant(cls, value: int) -> "PairRule":
        return cls((), (int(value),))

    @classmethod
    def r_driven(cls, r: int, off: int, on: int) -> "PairRule":
        """Edge value ``off`` when ``T_r = 0`` and ``on`` when ``T_r = 1``."""
        return cls((int(r),), (int(off), int(on)))

    @classmethod
    def from_function(cls, depends_on: Iterable[int], fn: Callable[[dict], int]) -> "PairRule":
        """Compile ``fn({r: T_r for r in depends_on}) -> {0, 1}`` into a table."""
        deps = tuple(int(d) for d in depends_on)
        k = len(deps)
        table = []
        for code in range(2**k):
            bits = [(code >> (k - 1 - j)) & 1 for j in range(k)]
            table.append(int(fn(dict(zip(deps, bits)))))
        return cls(deps, tuple(table))

    def evaluate(self, t: np.ndarray) -> int:
        code = 0
        for d in self.depends_on:
            code = (code << 1) | int(t[d])
        return self.table[code]

    @property
    def is_constant_zero(self) -> bool:
        return not any(self.table)


@dataclass(frozen=True)
class DependencyReport:
    """Minimal dependency set per candidate pair and the summary kind."""

    minimal_sets: dict
    kind: str
    s_a_driven: bool
    s_r_driven: bool
    cap_exceeded: tuple = ()

    def covers(self, kind: str) -> bool:
        return _KIND_RANK[self.kind] <= _KIND_RANK[kind]


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    mode: str
    n_pairs: int
    violations: tuple = ()  # ((a, r), assignment bits) witnesses

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "mode": self.mode,
            "n_pairs": self.n_pairs,
            "violations": [
                {"a": a, "r": r, "assignment": "".join(str(b) for b in bits)}
                for (a, r), bits in self.violations
            ],
        }


class EndogenousGraph:
    """Edge potential outcomes ``E_ar(.)`` plus the pre-experiment edges.

    Parameters
    ----------
    n_a, n_r : int
        Numbers of analysis and randomization units.
    rules : mapping
        ``(a, r) -> PairRule`` (or an int, shorthand for a constant edge).
        Unlisted pairs never carry an edge.
    unipartite : bool
        Analysis and randomization units are the same set.  Diagonal pairs
        are added as constant edges when absent and must be constant 1.
    pre_edges : iterable of (a, r), optional
        Edges observed before the experiment; need not equal ``E(0)``.
    kind : str, optional
        Declared rule kind.  Checked against the tables: a graph declared
        ``"r_driven"`` whose tables depend on other units is rejected.
    """

    def __init__(
        self,
        n_a: int,
        n_r: int,
        rules: Mapping,
        *,
        unipartite: bool = False,
        pre_edges: Iterable | None = None,
        kind: str | None = None,
    ):
        self.units = UnitSets(int(n_a), int(n_r), bool(unipartite))
        parsed: dict[tuple[int, int], PairRule] = {}
        for key, rule in rules.items():
            a, r = int(key[0]), int(key[1])
            if not (0 <= a < self.n_a and 0 <= r < self.n_r):
                raise DimensionError(f"pair ({a}, {r}) out of range")
            if not isinstance(rule, PairRule):
                rule = PairRule.constant(int(rule))
            if any(not 0 <= d < self.n_r for d in rule.depends_on):
                raise DimensionError(f"pair ({a}, {r}) depends on an unknown unit")
            if rule.is_constant_zero:
                continue
            parsed[(a, r)] = rule
        if self.unipartite:
            for a in range(self.n_a):
                rule = parsed.setdefault((a, a), PairRule.constant(1))
                if any(v != 1 for v in rule.table):
                    raise AssumptionError(
                        "unipartite_diagonal", "diagonal edges must always exist", [a]
                    )
        self._rules = dict(sorted(parsed.items()))
        pre = check_pairs(pre_edges if pre_edges is not None else [], self.n_a, self.n_r, "pre_edges")
        self.pre_edges = np.unique(pre, axis=0) if len(pre) else pre
        if kind is not None and kind not in KINDS:
            raise ValueError(f"unknown edge-rule kind {kind!r}")
        self.declared_kind = kind
        self._compile()
        if kind is not None and not self.dependency.covers(kind):
            raise AssumptionError(
                kind,
                f"tables are {self.dependency.kind}, inconsistent with declared kind {kind}",
            )

    def _compile(self):
        keys = list(self._rules)
        self.rows = np.array([k[0] for k in keys], dtype=np.int64)
        self.cols = np.array([k[1] for k in keys], dtype=np.int64)
        self._keys = self.rows * self.n_r + self.cols
        by_k: dict[int, list[int]] = {}
        for i, key in enumerate(keys):
            by_k.setdefault(len(self._rules[key].depends_on), []).append(i)
        groups = []
        for k, idx in sorted(by_k.items()):
            rules = [self._rules[keys[i]] for i in idx]
            deps = np.array([r.depends_on for r in rules], dtype=np.int64).reshape(len(idx), k)
            tables = np.array([r.table for r in rules], dtype=np.uint8).reshape(len(idx), 2**k)
            groups.append((np.array(idx, dtype=np.int64), deps, tables))
        self._groups = groups

    # -- basic accessors ------------------------------------------------
    @property
    def n_a(self) -> int:
        return self.units.n_a

    @property
    def n_r(self) -> int:
        return self.units.n_r

    @property
    def unipartite(self) -> bool:
        return self.units.unipartite

    @property
    def rules(self) -> dict:
        return dict(self._rules)

    @property
    def n_pairs(self) -> int:
        return len(self.rows)

    @property
    def pairs(self) -> np.ndarray:
        return np.column_stack([self.rows, self.cols])

    def pair_index(self, pairs) -> np.ndarray:
        """Positions of ``pairs`` among the candidate pairs, ``-1`` if absent."""
        pairs = check_pairs(pairs, self.n_a, self.n_r)
        if len(pairs) == 0 or self.n_pairs == 0:
            return np.full(len(pairs), -1, dtype=np.int64)
        keys = pairs[:, 0] * self.n_r + pairs[:, 1]
        pos = np.minimum(np.searchsorted(self._keys, keys), self.n_pairs - 1)
        return np.where(self._keys[pos] == keys, pos, -1)

    # -- realization ------------------------------------------------------
    def edge_values(self, T) -> np.ndarray:
        """Candidate-pair edge values for a batch of assignments, shape (B, n_pairs)."""
        T = check_treatment_batch(T, self.n_r)
        out = np.zeros((T.shape[0], self.n_pairs), dtype=np.uint8)
        for idx, deps, tables in self._groups:
            k = deps.shape[1]
            if k == 0:
                out[:, idx] = tables[:, 0]
                continue
            code = np.zeros((T.shape[0], len(idx)), dtype=np.int64)
            for j in range(k):
                code = (code << 1) | T[:, deps[:, j]]
            out[:, idx] = tables[np.arange(len(idx))[None, :], code]
        return out

    def realize(self, t) -> "RealizedGraph":
        t = check_treatment(t, self.n_r)
        return RealizedGraph(
            self.n_a, self.n_r, self.rows, self.cols, self.edge_values(t)[0], self.unipartite
        )

    @cached_property
    def full_treatment_edges(self) -> np.ndarray:
        """Candidate-pair edge values at ``T = 1``; defines ``R_a`` and ``A_r``."""
        return self.edge_values(np.ones(self.n_r, dtype=np.int8))[0]

    def degrees_under_full_treatment(self) -> tuple[np.ndarray, np.ndarray]:
        on = self.full_treatment_edges.astype(np.int64)
        deg_a = np.bincount(self.rows, weights=on, minlength=self.n_a).astype(np.int64)
        deg_r = np.bincount(self.cols, weights=on, minlength=self.n_r).astype(np.int64)
        return deg_a, deg_r

    # -- dependency structure ---------------------------------------------
    @cached_property
    def dependency(self) -> DependencyReport:
        return classify_dependency(self)

    @property
    def is_r_driven(self) -> bool:
        return self.dependency.covers(R_DRIVEN)

    def __eq__(self, other):
        if not isinstance(other, EndogenousGraph):
            return NotImplemented
        return (
            self.units == other.units
            and self._rules == other._rules
            and np.array_equal(self.pre_edges, other.pre_edges)
            and self.declared_kind == other.declared_kind
        )

    def __repr__(self):
        return (
            f"EndogenousGraph(n_a={self.n_a}, n_r={self.n_r}, pairs={self.n_pairs}, "
            f"unipartite={self.unipartite}, kind={self.dependency.kind})"
        )

    # -- constructors -----------------------------------------------------
    @classmethod
    def exogenous(cls, edges, *, unipartite=False, pre_edges=None) -> "EndogenousGraph":
        """Constant edges given by a dense 0/1 matrix."""
        edges = np.asarray(edges)
        n_a, n_r = edges.shape
        rules = {(int(a), int(r)): 1 for a, r in zip(*np.nonzero(edges))}
        if pre_edges is None:
            pre_edges = list(rules)
        return cls(n_a, n_r, rules, unipartite=unipartite, pre_edges=pre_edges, kind=EXOGENOUS)

    @classmethod
    def from_r_driven(
        cls, off, on, *, unipartite=False, pre_edges=None, kind=R_DRIVEN
    ) -> "EndogenousGraph":
        """r-driven graph from the dense matrices ``E(T_r = 0)`` and ``E(T_r = 1)``."""
        off = np.asarray(off, dtype=np.int64)
        on = np.asarray(on, dtype=np.int64)
        if off.shape != on.shape:
            raise DimensionError("off/on matrices must share a shape")
        n_a, n_r = off.shape
        rules = {}
        for a, r in zip(*np.nonzero(off | on)):
            e0, e1 = int(off[a, r]), int(on[a, r])
            rules[(int(a), int(r))] = PairRule.constant(1) if e0 == e1 else PairRule.r_driven(r, e0, e1)
        return cls(n_a, n_r, rules, unipartite=unipartite, pre_edges=pre_edges, kind=kind)


@dataclass(frozen=True)
class RealizedGraph:
    """Observed edges ``e_ar = E_ar(T)`` on the candidate pairs of a graph."""

    n_a: int
    n_r: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    unipartite: bool = False

    @classmethod
    def from_matrix(cls, edges, unipartite: bool = False) -> "RealizedGraph":
        edges = np.asarray(edges)
        if edges.ndim != 2:
            raise DimensionError("edge matrix must be 2-d")
        rows, cols = np.nonzero(edges)
        return cls(edges.shape[0], edges.shape[1], rows.astype(np.int64), cols.astype(np.int64),
                   np.ones(len(rows), dtype=np.uint8), unipartite)

    @property
    def edges(self) -> np.ndarray:
        mat = np.zeros((self.n_a, self.n_r), dtype=np.uint8)
        on = self.values.astype(bool)
        mat[self.rows[on], self.cols[on]] = 1
        return mat

    @property
    def neighbor_sets(self) -> list[frozenset]:
        out: list[set] = [set() for _ in range(self.n_a)]
        on = self.values.astype(bool)
        for a, r in zip(self.rows[on], self.cols[on]):
            out[a].add(int(r))
        return [frozenset(s) for s in out]

    def degrees(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.values, minlength=self.n_a).astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, RealizedGraph):
            return NotImplemented
        return self.n_a == other.n_a and self.n_r == other.n_r and np.array_equal(self.edges, other.edges)


@dataclass(frozen=True)
class AnchorSubgraph:
    """A set of pairs claimed to carry an edge under every assignment."""

    pairs: tuple
    n_a: int
    n_r: int
    per_unit: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arr = check_pairs(self.pairs, self.n_a, self.n_r, "anchor")
        uniq = sorted({(int(a), int(r)) for a, r in arr})
        object.__setattr__(self, "pairs", tuple(uniq))
        per: list[set] = [set() for _ in range(self.n_a)]
        for a, r in uniq:
            per[a].add(r)
        object.__setattr__(self, "per_unit", tuple(frozenset(s) for s in per))

    def __contains__(self, pair) -> bool:
        a, r = pair
        return r in self.per_unit[a]

    def __len__(self):
        return len(self.pairs)

    def mask_for(self, graph: EndogenousGraph) -> np.ndarray:
        """Boolean mask over the graph's candidate pairs marking anchor pairs."""
        if (self.n_a, self.n_r) != (graph.n_a, graph.n_r):
            raise DimensionError("anchor and graph dimensions differ")
        pos = graph.pair_index(self.pairs)
        missing = [self.pairs[i] for i in np.nonzero(pos < 0)[0]]
        if missing:
            raise AssumptionError(
                "anchor",
                f"anchor pair {missing[0]} never carries an edge",
                {a for a, _ in missing},
            )
        mask = np.zeros(graph.n_pairs, dtype=bool)
        mask[pos] = True
        return mask


def realize_graph(graph: EndogenousGraph, t) -> RealizedGraph:
    return graph.realize(t)


def _essential_variables(rule: PairRule) -> tuple[int, ...]:
    k = len(rule.depends_on)
    if k == 0:
        return ()
    cube = np.array(rule.table, dtype=np.uint8).reshape((2,) * k)
    out = []
    for j, d in enumerate(rule.depends_on):
        if np.any(np.take(cube, 0, axis=j) != np.take(cube, 1, axis=j)):
            out.append(d)
    return tuple(sorted(out))


def classify_dependency(graph: EndogenousGraph) -> DependencyReport:
    """Minimal dependency set ``S_ar`` of every candidate pair.

    For a Boolean function the minimal set is the set of essential
    variables, found by flipping each declared input.  Pairs declaring more
    than ``DEPENDENCY_CAP`` inputs are not searched; their declared set is
    reported and they are listed in ``cap_exceeded``.
    """
    minimal: dict[tuple[int, int], tuple[int, ...]] = {}
    capped = []
    for (a, r), rule in graph.rules.items():
        if len(rule.depends_on) > DEPENDENCY_CAP:
            minimal[(a, r)] = tuple(sorted(rule.depends_on))
            capped.append((a, r))
        else:
            minimal[(a, r)] = _essential_variables(rule)

    sets = list(minimal.items())
    if all(not s for _, s in sets):
        kind = EXOGENOUS
    elif all(set(s) <= {r} for (_, r), s in sets):
        kind = R_DRIVEN
    elif graph.n_r > 1 and any(len(s) == graph.n_r for _, s in sets):
        kind = UNRESTRICTED
    else:
        kind = SET_DRIVEN

    by_a: dict[int, set] = {}
    by_r: dict[int, set] = {}
    for (a, r), s in sets:
        by_a.setdefault(a, set()).add(s)
        by_r.setdefault(r, set()).add(s)
    s_a = all(len(v) == 1 for v in by_a.values())
    s_r = all(len(v) == 1 for v in by_r.values())
    return DependencyReport(minimal, kind, s_a, s_r, tuple(capped))


def verify_anchor(
    graph: EndogenousGraph,
    anchor: AnchorSubgraph,
    mode: str = "exhaustive",
    *,
    n_samples: int = 1000,
    seed: int = 0,
    cap: int = ENUMERATION_CAP,
) -> VerificationReport:
    """Check that every anchor pair carries an edge under every assignment.

    ``mode`` is ``"exhaustive"`` (every joint value of each pair's inputs,
    equivalent to all ``2**n_r`` assignments), ``"sampled"`` (``n_samples``
    Bernoulli(1/2) assignments) or ``"relaxed"`` (only ``E_ar(1) = 1``).
    Witness assignments set the failing inputs and leave other units at 0.
    """
    if (anchor.n_a, anchor.n_r) != (graph.n_a, graph.n_r):
        raise DimensionError("anchor and graph dimensions differ")
    violations = []
    pos = graph.pair_index(anchor.pairs)
    rules = graph.rules

    def witness(bits_by_unit: dict) -> tuple:
        t = [0] * graph.n_r
        for d, b in bits_by_unit.items():
            t[d] = b
        return tuple(t)

    if mode == "exhaustive":
        if not graph.is_r_driven and graph.n_r > cap:
            raise CapExceededError(f"exhaustive anchor check needs n_r <= {cap}, got {graph.n_r}")
        for (a, r), p in zip(anchor.pairs, pos):
            if p < 0:
                violations.append(((a, r), witness({})))
                continue
            rule = rules[(a, r)]
            k = len(rule.depends_on)
            for code, v in enumerate(rule.table):
                if v != 1:
                    bits = [(code >> (k - 1 - j)) & 1 for j in range(k)]
                    violations.append(((a, r), witness(dict(zip(rule.depends_on, bits)))))
                    break
    elif mode == "relaxed":
        full = graph.full_treatment_edges
        ones = tuple([1] * graph.n_r)
        for (a, r), p in zip(anchor.pairs, pos):
            if p < 0 or full[p] != 1:
                violations.append(((a, r), ones))
    elif mode == "sampled":
        rng = np.random.default_rng(seed)
        T = (rng.random((n_samples, graph.n_r)) < 0.5).astype(np.int8)
        vals = graph.edge_values(T)
        for (a, r), p in zip(anchor.pairs, pos):
            if p < 0:
                violations.append(((a, r), tuple(int(x) for x in T[0])))
                continue
            bad = np.nonzero(vals[:, p] != 1)[0]
            if len(bad):
                violations.append(((a, r), tuple(int(x) for x in T[bad[0]])))
    else:
        raise ValueError(f"unknown verification mode {mode!r}")
    return VerificationReport(not violations, mode, len(anchor.pairs), tuple(violations))
