"""Closed-form single-letter rates for binary sources under Hamming distortion.

Helpers are BSC(p) copies of a uniform primary bit. Three building blocks:

* the Wyner-Ziv rate with the primary source as decoder side information
  (joint decoding), ``wz_rate``;
* plain rate-distortion of a uniform bit (independent decoding),
  ``independent_rate``;
* the residual uncertainty of the primary source given independently
  decoded helper descriptions, ``phi``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .info import binary_convolution, binary_entropy, binary_entropy_array

BISECT_EDGE = 1e-12
BISECT_WIDTH = 1e-12
PHI_MAX_HELPERS = 20


def _check_crossover(p: float, name: str = "p") -> float:
    p = float(p)
    if not (0.0 <= p <= 0.5) or math.isnan(p):
        raise ValueError(f"{name}={p!r} must lie in [0, 0.5]")
    return p


def _log2_odds(x: float) -> float:
    return math.log2((1.0 - x) / x)


def wz_curve(p: float, D: float) -> float:
    """f(D) = h(p * D) - h(D), the rate of a BSC(D) test channel given side information."""
    return binary_entropy(binary_convolution([p, D])) - binary_entropy(D)


def wz_curve_slope(p: float, D: float) -> float:
    """Analytic df/dD = (1-2p) log2((1-p*D)/(p*D)) - log2((1-D)/D), for 0 < D < 0.5."""
    q = binary_convolution([p, D])
    return (1.0 - 2.0 * p) * _log2_odds(q) - _log2_odds(D)


def _tangency(p: float, D: float) -> float:
    # zero where the line through (D, f(D)) and (p, 0) is tangent to f
    return wz_curve(p, D) + (p - D) * wz_curve_slope(p, D)


@dataclass(frozen=True)
class CriticalDistortion:
    p: float
    value: float
    residual: float
    degenerate: bool = False


@lru_cache(maxsize=4096)
def solve_critical_distortion(p: float) -> CriticalDistortion:
    """Locate D_c, where the joint-decoding rate leaves f for its tangent through (p, 0).

    Bisection on g(D) = f(D) + (p - D) f'(D) over (1e-12, p - 1e-12): g tends
    to -inf as D -> 0 and g(p) = f(p) >= 0, with a single sign change. For
    p = 0.5, f(p) = 0 and g < 0 on the open interval, so D_c = p.
    """
    p = _check_crossover(p)
    if p == 0.0:
        return CriticalDistortion(p, 0.0, 0.0, degenerate=True)
    lo, hi = BISECT_EDGE, p - BISECT_EDGE
    if hi <= lo:
        return CriticalDistortion(p, p, 0.0, degenerate=True)
    if _tangency(p, hi) <= 0.0:
        return CriticalDistortion(p, p, abs(wz_curve(p, p)))
    # for p below ~1e-6 the root sits under the default edge
    while _tangency(p, lo) >= 0.0 and lo > 1e-300:
        lo *= 1e-3
    # run past the 1e-12 width down to float resolution: near tiny roots the
    # slope of g is ~1/D and an absolute width alone leaves a large residual
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if hi - lo <= BISECT_WIDTH and hi - lo <= 1e-15 * hi:
            break
        if _tangency(p, mid) < 0.0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    return CriticalDistortion(p, root, abs(_tangency(p, root)))


def wz_critical_distortion(p: float) -> float:
    return solve_critical_distortion(float(p)).value


def wz_tangent_slope(p: float) -> float:
    """Magnitude of the tangent-line slope, -f'(D_c)."""
    c = solve_critical_distortion(float(p))
    if c.degenerate or c.value >= p:
        return 0.0
    return -wz_curve_slope(p, c.value)


def wz_rate(p: float, D: float) -> float:
    """Joint-decoding rate R'(D) for 0 <= D <= p <= 0.5.

    f(D) up to D_c, then the straight line from (D_c, f(D_c)) down to (p, 0).
    """
    p = _check_crossover(p)
    D = float(D)
    if not (0.0 <= D <= 1.0) or math.isnan(D):
        raise ValueError(f"D={D!r} is not a probability")
    if D > p:
        raise ValueError(f"distortion cap D={D} exceeds the helper crossover p={p}")
    if p == 0.0:
        return 0.0
    c = solve_critical_distortion(p)
    if D <= c.value:
        return wz_curve(p, D)
    return (p - D) * wz_tangent_slope(p)


def independent_rate(d: float) -> float:
    """1 - h(d), the rate of describing a uniform bit at Hamming distortion d."""
    d = _check_crossover(d, "d")
    return 1.0 - binary_entropy(d)


def _effective_crossovers(pairs: Sequence[tuple[float, float]]) -> list[float]:
    out = []
    for k, (p, d) in enumerate(pairs):
        _check_crossover(p, f"p[{k}]")
        _check_crossover(d, f"d[{k}]")
        out.append(binary_convolution([p, d]))
    return out


def phi(pairs: Sequence[tuple[float, float]], max_helpers: int = PHI_MAX_HELPERS) -> float:
    """H(X1 | U_V) for independently decoded helpers with (p_v, d_v) pairs.

    Each U_v reaches X1 through a BSC(p_v * d_v), independently across v.
    The entropy is summed over the 2^|V| agreement patterns of (U_v xor X1):
    a pattern with flip set F has weight prod of q_v on F and 1 - q_v off F,
    and the posterior of X1 given the observed U_V is the ratio of a pattern
    to its complement. Empty V gives H(X1) = 1.
    """
    pairs = list(pairs)
    if len(pairs) > max_helpers:
        raise ValueError(f"phi over {len(pairs)} helpers exceeds the cap of {max_helpers}")
    if not pairs:
        return 1.0
    qs = _effective_crossovers(pairs)
    # weight[m] = prod_{v in m} q_v * prod_{v not in m} (1 - q_v), bitmask m
    weight = np.ones(1)
    for q in qs:
        weight = np.concatenate([weight * (1.0 - q), weight * q])
    complement = weight[::-1]
    # observing u with flip pattern m: Pr[u] = 0.5 (w[m] + w[~m]), posterior w[m] / (w[m] + w[~m])
    total = weight + complement
    mask = (weight > 0) & (complement > 0)
    post = weight[mask] / total[mask]
    h = binary_entropy_array(post)
    # every observation appears twice (m and ~m), each carrying half of Pr[u]
    return float(np.sum(0.5 * total[mask] * h))


def phi_inclusion_exclusion(pairs: Sequence[tuple[float, float]], max_helpers: int = PHI_MAX_HELPERS) -> float:
    """Alternating sum over non-empty T of (-1)^(|T|+1) h(*_{v in T} (p_v * d_v)).

    Equals ``phi`` for at most two helpers and departs from it beyond that.
    """
    pairs = list(pairs)
    if len(pairs) > max_helpers:
        raise ValueError(f"phi over {len(pairs)} helpers exceeds the cap of {max_helpers}")
    if not pairs:
        return 1.0
    qs = _effective_crossovers(pairs)
    cascade = np.zeros(1)
    sign = -np.ones(1)
    for q in qs:
        cascade = np.concatenate([cascade, cascade * (1.0 - q) + (1.0 - cascade) * q])
        sign = np.concatenate([sign, -sign])
    c = cascade[1:]
    inside = (c > 0) & (c < 1)
    h = np.zeros_like(c)
    ci = c[inside]
    h[inside] = -(ci * np.log2(ci) + (1.0 - ci) * np.log2(1.0 - ci))
    return float(np.sum(sign[1:] * h))


class Strategy(str, enum.Enum):
    JOINT = "joint"
    INDEPENDENT = "independent"


@dataclass(frozen=True)
class HelperParams:
    p: float
    D: float
    d: float
    rho: float = 0.0

    def __post_init__(self):
        _check_crossover(self.p, "p")
        _check_crossover(self.d, "d")
        if not (0.0 <= self.rho <= 1.0):
            raise ValueError(f"rho={self.rho} must lie in [0, 1]")
        if not (0.0 <= self.D <= self.p):
            raise ValueError(f"distortion cap D={self.D} must lie in [0, p={self.p}]")


def helper_rate_star(hp: HelperParams, strategy: Strategy | str = Strategy.JOINT) -> tuple[float, Strategy]:
    """Single-rate floor of one helper in the outer bound.

    Below the cap (d < D) only independent decoding reaches distortion d, so
    the floor is 1 - h(d) whatever ``strategy`` says. Otherwise the requested
    branch is returned: independent 1 - h(d) or the time-shared joint rate
    rho (1 - h(D)) + (1 - rho) R'(D).
    """
    strategy = Strategy(strategy)
    if hp.d < hp.D:
        return independent_rate(hp.d), Strategy.INDEPENDENT
    if strategy is Strategy.INDEPENDENT:
        return independent_rate(hp.d), Strategy.INDEPENDENT
    joint = hp.rho * independent_rate(hp.D) + (1.0 - hp.rho) * wz_rate(hp.p, hp.D)
    return joint, Strategy.JOINT


def phi_batch(ps: Sequence[float], ds) -> np.ndarray:
    """``phi`` for many operating points at once.

    ``ds`` has shape (m, k) for the k crossovers ``ps``; returns shape (m,).
    Inputs are assumed validated.
    """
    ps = np.asarray(ps, dtype=np.float64)
    ds = np.atleast_2d(np.asarray(ds, dtype=np.float64))
    m, k = ds.shape
    if k != ps.size:
        raise ValueError(f"{k} distortions per row for {ps.size} crossovers")
    if k == 0:
        return np.ones(m)
    q = ps[None, :] * (1.0 - ds) + (1.0 - ps[None, :]) * ds
    weight = np.ones((m, 1))
    for j in range(k):
        qj = q[:, j : j + 1]
        weight = np.concatenate([weight * (1.0 - qj), weight * qj], axis=1)
    complement = weight[:, ::-1]
    total = weight + complement
    with np.errstate(divide="ignore", invalid="ignore"):
        post = np.where(total > 0, weight / np.where(total > 0, total, 1.0), 0.0)
    h = binary_entropy_array(post)
    return np.sum(0.5 * total * h, axis=1)
