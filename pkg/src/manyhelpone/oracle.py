"""Brute-force ground truth on explicit joint pmfs.

Nothing here calls the closed forms of ``single_letter``; the two paths
share only the scalar kernels and the table entropy routines of ``info``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .info import (
    JointPmf,
    binary_entropy,
    canonical_crossover,
    conditional_entropy,
    mutual_information,
)

ORACLE_MAX_HELPERS = 6


def bsc(eps: float) -> np.ndarray:
    """Transition matrix W[x, y] = Pr[y | x] of a binary symmetric channel."""
    return np.array([[1.0 - eps, eps], [eps, 1.0 - eps]])


@dataclass(frozen=True)
class CascadeSpec:
    """Uniform X1 -> BSC(p_v) -> X_v -> BSC(d_v) -> U_v for each helper v.

    Helpers are labelled 2, 3, ... in order.
    """

    helpers: tuple[tuple[float, float], ...] = ()
    max_helpers: int = ORACLE_MAX_HELPERS

    def __post_init__(self):
        pairs = tuple((float(p), float(d)) for p, d in self.helpers)
        for p, d in pairs:
            for x in (p, d):
                if not 0.0 <= x <= 1.0:
                    raise ValueError(f"crossover {x} outside [0, 1]")
        if len(pairs) > self.max_helpers:
            raise ValueError(f"{len(pairs)} helpers exceed the oracle cap of {self.max_helpers}")
        object.__setattr__(self, "helpers", pairs)

    @property
    def indices(self) -> list[int]:
        return list(range(2, 2 + len(self.helpers)))


def cascade_pmf(spec: CascadeSpec) -> JointPmf:
    """Explicit table over (X1, X2, U2, X3, U3, ...)."""
    table = np.array([0.5, 0.5])
    labels = ["X1"]
    for i, (p, d) in zip(spec.indices, spec.helpers):
        # p(x1, ..., x_i, u_i) = p(x1, ...) W_p[x1, x_i] W_d[x_i, u_i]
        pair = bsc(p)[:, :, None] * bsc(d)[None, :, :]
        shape_x1 = (2,) + (1,) * (table.ndim - 1) + (2, 2)
        table = table[..., None, None] * pair.reshape(shape_x1)
        labels += [f"X{i}", f"U{i}"]
    return JointPmf(tuple(labels), table)


def phi_oracle(spec: CascadeSpec) -> float:
    """H(X1 | U_V) by enumerating the full cascade table."""
    pmf = cascade_pmf(spec)
    return conditional_entropy(pmf, ["X1"], [f"U{i}" for i in spec.indices])


def lower_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain lower convex hull of 2-D points, sorted by x."""
    pts = np.asarray(points, dtype=np.float64)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    hull: list[np.ndarray] = []
    for pt in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point unless the turn is strictly counter-clockwise
            if (x2 - x1) * (pt[1] - y1) - (y2 - y1) * (pt[0] - x1) <= 0.0:
                hull.pop()
            else:
                break
        if hull and hull[-1][0] == pt[0]:
            continue
        hull.append(pt)
    return np.array(hull)


def wz_envelope_oracle(p: float, grid_size: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """Lower convex envelope of {(D, h(p*D) - h(D))} and (p, 0), sampled on a uniform D grid.

    Returns ``(D, rate)`` arrays on ``grid_size`` points spanning [0, p].
    """
    if grid_size < 100:
        raise ValueError("grid_size must be at least 100")
    if not 0.0 < p <= 0.5:
        raise ValueError(f"degenerate or invalid crossover p={p}")
    D = np.linspace(0.0, p, grid_size)
    pd = p * (1.0 - D) + (1.0 - p) * D
    f = np.array([binary_entropy(x) for x in pd]) - np.array([binary_entropy(x) for x in D])
    pts = np.vstack([np.column_stack([D, f]), [[p, 0.0]]])
    hull = lower_hull(pts)
    return D, np.interp(D, hull[:, 0], hull[:, 1])


@dataclass(frozen=True)
class TestChannelBank:
    """BSC test channels U_i | X_i, keyed by helper index i >= 2."""

    __test__ = False

    channels: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        chans = {int(i): canonical_crossover(d) for i, d in self.channels.items()}
        if any(i < 2 for i in chans):
            raise ValueError("helper indices start at 2")
        object.__setattr__(self, "channels", chans)


def source_pmf(crossovers: Sequence[float]) -> JointPmf:
    """p(x_N) for uniform X1 and conditionally independent BSC(p_i) helpers."""
    table = np.array([0.5, 0.5])
    labels = ["X1"]
    for i, p in enumerate(crossovers, start=2):
        shape = (2,) + (1,) * (table.ndim - 1) + (2,)
        table = table[..., None] * bsc(p).reshape(shape)
        labels.append(f"X{i}")
    return JointPmf(tuple(labels), table)


def _is_conditionally_independent(pmf: JointPmf, helpers: list[str], tol: float = 1e-12) -> bool:
    if len(helpers) < 2:
        return True
    joint = pmf.marginal(["X1"] + helpers)
    p1 = joint.sum(axis=tuple(range(1, joint.ndim)))
    prod = p1.reshape((-1,) + (1,) * (joint.ndim - 1))
    for k, name in enumerate(helpers):
        m = pmf.marginal(["X1", name])
        cond = np.divide(m, p1[:, None], out=np.zeros_like(m), where=p1[:, None] > 0)
        shape = [1] * joint.ndim
        shape[0], shape[k + 1] = m.shape
        prod = prod * cond.reshape(shape)
    return bool(np.max(np.abs(prod - joint)) <= tol)


def extend_with_channels(pmf: JointPmf, bank: TestChannelBank) -> JointPmf:
    """p(u_L, x_N) = p(x_N) prod_i p(u_i | x_i); U_i appended after the X axes."""
    table = pmf.table
    labels = list(pmf.labels)
    for i in sorted(bank.channels):
        name = f"X{i}"
        if name not in labels:
            raise ValueError(f"channel for helper {i} but pmf has no {name}")
        ax = labels.index(name)
        if table.shape[ax] != 2:
            raise ValueError(f"{name} is not binary; BSC test channels need binary inputs")
        w = bsc(bank.channels[i])
        shape = [1] * table.ndim + [2]
        shape[ax] = 2
        table = table[..., None] * w.reshape(shape)
        labels.append(f"U{i}")
    return JointPmf(tuple(labels), table)


def corollary3_rates(
    pmf: JointPmf,
    bank: TestChannelBank,
    subset: Iterable[int],
    strict_ci: bool = False,
) -> float:
    """Right-hand side of the conditionally independent inner-bound constraint for S.

    If 1 is in S: H(X1 | U_{S^c}) + sum over i in S \\ {1} of I(X_i; U_i | X1).
    Otherwise: sum over i in S of I(X_i; U_i | X1) (a single helper gives its
    single-rate floor). Everything comes from the extended table.
    """
    S = set(int(i) for i in subset)
    if not S:
        raise ValueError("subset must be non-empty")
    helpers = sorted(int(l[1:]) for l in pmf.labels if l.startswith("X") and l != "X1")
    if "X1" not in pmf.labels:
        raise ValueError("pmf has no primary source X1")
    if set(bank.channels) != set(helpers):
        raise ValueError(f"channel bank covers {sorted(bank.channels)} but pmf helpers are {helpers}")
    unknown = S - set(helpers) - {1}
    if unknown:
        raise ValueError(f"subset refers to unknown sources {sorted(unknown)}")
    if strict_ci and not _is_conditionally_independent(pmf, [f"X{i}" for i in helpers]):
        raise ValueError("helpers are not conditionally independent given X1")
    ext = extend_with_channels(pmf, bank)
    mi = sum(
        mutual_information(ext, [f"X{i}"], [f"U{i}"], ["X1"]) for i in sorted(S - {1})
    )
    if 1 in S:
        given = [f"U{i}" for i in helpers if i not in S]
        return conditional_entropy(ext, ["X1"], given) + mi
    return mi


def joint_entropy_of_sources(crossovers: Sequence[float]) -> float:
    """H(X_N) of the source model by enumeration."""
    pmf = source_pmf(crossovers)
    w = pmf.table.ravel()
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w)))


def sign_change_brackets(g, lo: float, hi: float, n: int = 100_000) -> list[tuple[float, float]]:
    """All adjacent grid pairs on a dense scan of [lo, hi] where g changes sign."""
    xs = np.linspace(lo, hi, n)
    vals = np.array([g(x) for x in xs])
    out = []
    for k in range(n - 1):
        if vals[k] == 0.0 or math.copysign(1.0, vals[k]) != math.copysign(1.0, vals[k + 1]):
            out.append((float(xs[k]), float(xs[k + 1])))
    return out
