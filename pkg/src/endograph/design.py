"""Bernoulli treatment design and the exact enumeration oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from ._validation import CapExceededError, check_probability

ENUMERATION_CAP = 20


@dataclass(frozen=True)
class BernoulliDesign:
    """Independent Bernoulli(p) treatment of ``n_r`` randomization units."""

    p: float
    n_r: int
    seed: int | None = 0

    def __post_init__(self):
        object.__setattr__(self, "p", check_probability(self.p))
        if self.n_r < 1:
            raise ValueError("n_r must be positive")

    def draw(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return (rng.random(self.n_r) < self.p).astype(np.int8)

    def draw_batch(self, size: int, rng: np.random.Generator | None = None) -> np.ndarray:
        rng = np.random.default_rng(self.seed) if rng is None else rng
        return (rng.random((size, self.n_r)) < self.p).astype(np.int8)


def draw(design: BernoulliDesign) -> np.ndarray:
    return design.draw()


def substreams(seed, n: int) -> list[np.random.Generator]:
    """Independent per-replication generators derived from one seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _check_cap(n_r: int, cap: int) -> None:
    if n_r < 1:
        raise ValueError("n_r must be positive")
    if n_r > cap:
        raise CapExceededError(f"enumeration over 2**{n_r} assignments exceeds cap 2**{cap}")


def assignment_matrix(n_r: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """All ``2**n_r`` assignments in lexicographic order (unit 0 most significant)."""
    _check_cap(n_r, cap)
    codes = np.arange(2**n_r, dtype=np.int64)
    shifts = np.arange(n_r - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def assignment_probabilities(n_r: int, p: float, cap: int = ENUMERATION_CAP) -> np.ndarray:
    p = check_probability(p)
    n_treated = assignment_matrix(n_r, cap).sum(axis=1)
    return p**n_treated * (1.0 - p) ** (n_r - n_treated)


def enumerate_assignments(
    n_r: int, p: float = 0.5, cap: int = ENUMERATION_CAP
) -> Iterator[tuple[np.ndarray, float]]:
    """Yield every assignment with its probability under Bernoulli(p)."""
    T = assignment_matrix(n_r, cap)
    probs = assignment_probabilities(n_r, p, cap)
    for t, pr in zip(T, probs):
        yield t, float(pr)


def exact_expectation(
    statistic: Callable[[np.ndarray], float], n_r: int, p: float, cap: int = ENUMERATION_CAP
) -> float:
    """``sum_T Pr(T) statistic(T)`` with compensated summation."""
    return math.fsum(pr * float(statistic(t)) for t, pr in enumerate_assignments(n_r, p, cap))


def exact_covariance(
    stat_x: Callable[[np.ndarray], float],
    stat_y: Callable[[np.ndarray], float],
    n_r: int,
    p: float,
    cap: int = ENUMERATION_CAP,
) -> float:
    """Exact covariance of two statistics, centred before multiplying."""
    pairs = [(pr, float(stat_x(t)), float(stat_y(t))) for t, pr in enumerate_assignments(n_r, p, cap)]
    mx = math.fsum(pr * x for pr, x, _ in pairs)
    my = math.fsum(pr * y for pr, _, y in pairs)
    return math.fsum(pr * (x - mx) * (y - my) for pr, x, y in pairs)
