"""Scalar binary kernels and information measures over explicit joint pmfs.

All quantities are in bits. ``0 log 0`` is taken as 0: zero-mass cells are
skipped, never clamped.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

PMF_TOL = 1e-12


def _check_probability(p: float, name: str = "p") -> float:
    p = float(p)
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise ValueError(f"{name}={p!r} is not a probability in [0, 1]")
    return p


def binary_entropy(p: float) -> float:
    """h(p) = -p log2 p - (1-p) log2 (1-p), exactly 0 at the endpoints."""
    p = _check_probability(p)
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def binary_entropy_inverse(h: float) -> float:
    """Return the p in [0, 0.5] with binary_entropy(p) == h.

    Bisection to machine resolution; h is clipped into [0, 1].
    """
    if math.isnan(h):
        raise ValueError("entropy value is NaN")
    if h <= 0.0:
        return 0.0
    if h >= 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if binary_entropy(mid) < h:
            lo = mid
        else:
            hi = mid
    return hi


def binary_convolution(values: Sequence[float]) -> float:
    """Cascaded crossover a1 * a2 * ... with a * b = a(1-b) + (1-a)b."""
    values = list(values)
    if not values:
        raise ValueError("binary_convolution needs at least one value")
    acc = _check_probability(values[0], "values[0]")
    for i, b in enumerate(values[1:], start=1):
        b = _check_probability(b, f"values[{i}]")
        acc = acc * (1.0 - b) + (1.0 - acc) * b
    return acc


def canonical_crossover(d: float) -> float:
    """Fold a BSC crossover into [0, 0.5]; h and * are symmetric under d -> 1-d."""
    d = _check_probability(d, "crossover")
    if d > 0.5:
        warnings.warn(f"crossover {d} folded to {1.0 - d}", stacklevel=2)
        return 1.0 - d
    return d


@dataclass(frozen=True)
class JointPmf:
    """Dense probability table over a product of finite alphabets.

    ``labels[k]`` names axis ``k`` of ``table``.
    """

    labels: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=np.float64)
        labels = tuple(self.labels)
        if table.ndim != len(labels):
            raise ValueError(f"table has {table.ndim} axes but {len(labels)} labels")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in {labels}")
        if np.any(table < 0) or not np.all(np.isfinite(table)):
            raise ValueError("pmf weights must be finite and non-negative")
        total = float(table.sum())
        if abs(total - 1.0) > PMF_TOL:
            raise ValueError(f"pmf sums to {total!r}, not 1 within {PMF_TOL}")
        table.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "table", table)

    @property
    def alphabet_sizes(self) -> dict[str, int]:
        return dict(zip(self.labels, self.table.shape))

    def axes(self, labels: Iterable[str]) -> tuple[int, ...]:
        out = []
        for name in labels:
            try:
                out.append(self.labels.index(name))
            except ValueError:
                raise KeyError(f"unknown variable {name!r}; have {self.labels}") from None
        return tuple(out)

    def marginal(self, labels: Iterable[str]) -> np.ndarray:
        """Marginal table over ``labels``, axes ordered as given."""
        labels = list(labels)
        keep = self.axes(labels)
        drop = tuple(k for k in range(self.table.ndim) if k not in keep)
        m = self.table.sum(axis=drop) if drop else self.table
        # summed axes disappear; remaining ones keep their original order
        remaining = sorted(keep)
        return np.transpose(m, [remaining.index(k) for k in keep]) if keep else np.asarray(m)


def _table_entropy(t: np.ndarray) -> float:
    w = np.asarray(t, dtype=np.float64).ravel()
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w)))


def entropy(pmf: JointPmf, labels: Iterable[str]) -> float:
    labels = list(labels)
    if not labels:
        return 0.0
    return _table_entropy(pmf.marginal(labels))


def conditional_entropy(pmf: JointPmf, targets: Iterable[str], given: Iterable[str] = ()) -> float:
    """H(targets | given) = H(targets, given) - H(given)."""
    targets, given = list(targets), list(given)
    overlap = set(targets) & set(given)
    if overlap:
        raise ValueError(f"targets and given overlap on {sorted(overlap)}")
    pmf.axes(targets + given)
    return entropy(pmf, targets + given) - entropy(pmf, given)


def mutual_information(pmf: JointPmf, a: Iterable[str], b: Iterable[str], given: Iterable[str] = ()) -> float:
    """I(A; B | C) from four joint entropies."""
    a, b, c = list(a), list(b), list(given)
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ValueError("variable groups must be disjoint")
    return (
        entropy(pmf, a + c)
        + entropy(pmf, b + c)
        - entropy(pmf, a + b + c)
        - entropy(pmf, c)
    )


def multivariate_mi(pmf: JointPmf, labels: Sequence[str]) -> float:
    """McGill interaction information: sum over non-empty T of (-1)^(|T|+1) H(T)."""
    labels = list(labels)
    if len(labels) < 2:
        raise ValueError("multivariate mutual information needs at least two variables")
    pmf.axes(labels)
    total = 0.0
    for r in range(1, len(labels) + 1):
        sign = 1.0 if r % 2 else -1.0
        for subset in itertools.combinations(labels, r):
            total += sign * entropy(pmf, subset)
    return total


def binary_entropy_array(p) -> np.ndarray:
    """Elementwise h(p) for arrays already known to lie in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    inside = (p > 0.0) & (p < 1.0)
    q = p[inside]
    out[inside] = -(q * np.log2(q) + (1.0 - q) * np.log2(1.0 - q))
    return out


def binary_entropy_inverse_array(h) -> np.ndarray:
    """Elementwise inverse of h on [0, 0.5]; inputs clipped into [0, 1]."""
    h = np.clip(np.asarray(h, dtype=np.float64), 0.0, 1.0)
    lo = np.zeros_like(h)
    hi = np.full_like(h, 0.5)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = binary_entropy_array(mid) < h
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    hi = np.where(h <= 0.0, 0.0, hi)
    return np.where(h >= 1.0, 0.5, hi)
