"""Input validation helpers and the exception hierarchy."""

from __future__ import annotations

from typing import Iterable

import numpy as np


class EndographError(Exception):
    """Base class for all package errors."""


class DimensionError(EndographError, ValueError):
    """Array shapes disagree with the graph they are paired with."""


class AssumptionError(EndographError, ValueError):
    """An identification assumption of the anchor estimator does not hold.

    ``assumption`` is a short machine-readable tag (``"r_driven"``,
    ``"anchor"``, ``"support"``, ``"relevance"``, ...) and ``units`` lists the
    offending analysis units, when the failure is unit-specific.
    """

    def __init__(self, assumption: str, message: str, units: Iterable[int] = ()):
        self.assumption = assumption
        self.units = sorted(int(u) for u in units)
        detail = message
        if self.units:
            shown = ", ".join(str(u) for u in self.units[:10])
            more = "" if len(self.units) <= 10 else f", ... ({len(self.units)} total)"
            detail = f"{message} (units: {shown}{more})"
        super().__init__(f"[{assumption}] {detail}")


class CapExceededError(EndographError, ValueError):
    """An exhaustive computation was requested above its size cap."""


class SchemaError(EndographError, ValueError):
    """A configuration or graph file does not match the expected schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def check_probability(p: float) -> float:
    p = float(p)
    if not np.isfinite(p) or not 0.0 < p < 1.0:
        raise ValueError(f"treatment probability must lie strictly inside (0, 1), got {p}")
    return p


def check_treatment(t, n_r: int) -> np.ndarray:
    """Return ``t`` as a 1-d int8 array of length ``n_r`` with entries in {0, 1}."""
    arr = np.asarray(t)
    if arr.ndim != 1 or arr.shape[0] != n_r:
        raise DimensionError(f"treatment vector must have shape ({n_r},), got {arr.shape}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("treatment vector entries must be 0 or 1")
    return arr.astype(np.int8)


def check_treatment_batch(T, n_r: int) -> np.ndarray:
    arr = np.asarray(T)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != n_r:
        raise DimensionError(f"treatment batch must have shape (B, {n_r}), got {arr.shape}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("treatment entries must be 0 or 1")
    return arr.astype(np.int8)


def check_unit_vector(values, n: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise DimensionError(f"{name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def check_pairs(pairs, n_a: int, n_r: int, name: str = "pairs") -> np.ndarray:
    """Validate an iterable of (a, r) index pairs; returns an (m, 2) int64 array."""
    arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DimensionError(f"{name} must be a list of (a, r) pairs")
    if arr[:, 0].min() < 0 or arr[:, 0].max() >= n_a:
        raise DimensionError(f"{name}: analysis index out of range [0, {n_a})")
    if arr[:, 1].min() < 0 or arr[:, 1].max() >= n_r:
        raise DimensionError(f"{name}: randomization index out of range [0, {n_r})")
    return arr
