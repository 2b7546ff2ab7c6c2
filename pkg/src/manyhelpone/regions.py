"""Outer, inner and weak-problem rate regions for binary CI helpers.

Sources are numbered 1..N; source 1 is the primary (lossless) source and
helpers are 2..N. Rate tuples are ordered ``(R1, R2, ..., RN)``.

Membership semantics
--------------------
Outer and weak regions are parameter families: a tuple belongs iff some
operating-distortion vector d_L satisfies every constraint. Every bound is
nondecreasing in each d_i while each helper floor 1 - h(d_i) is
decreasing, so the least constraining witness is d_i = h^-1(1 - R_i). That
witness is evaluated exactly; ``contains_on_grid`` repeats the search by
brute force over a d grid.

The inner region is the convex hull of the achievable vertices, closed
upward under component-wise rate increase.
"""

from __future__ import annotations

import enum
import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .info import binary_entropy_array, binary_entropy_inverse_array
from .single_letter import Strategy, independent_rate, phi, phi_batch, wz_rate

DEFAULT_MAX_SOURCES = 8
DEFAULT_GRID_STEP = 1e-3
DEFAULT_MAX_VERTICES = 500_000
BOUNDARY_TOL = 1e-6
DEDUP_TOL = 1e-12


def max_sources() -> int:
    """Source-count cap, overridable through ``MHO_MAX_N``."""
    raw = os.environ.get("MHO_MAX_N")
    if raw is None:
        return DEFAULT_MAX_SOURCES
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"MHO_MAX_N={raw!r} is not an integer") from None
    if value < 2:
        raise ValueError("MHO_MAX_N must be at least 2")
    return value


class Mode(str, enum.Enum):
    STRONG = "strong"
    WEAK = "weak"


class RegionKind(str, enum.Enum):
    OUTER = "outer_param_family"
    INNER = "inner_hull"
    WEAK = "weak_param_family"


@dataclass(frozen=True)
class ProblemSpec:
    """Helper crossovers p_2..p_N and, in strong mode, distortion caps D_2..D_N."""

    crossovers: tuple[float, ...]
    distortion_caps: tuple[float, ...] | None = None
    mode: Mode = Mode.STRONG

    def __post_init__(self):
        mode = Mode(self.mode)
        ps = tuple(float(p) for p in self.crossovers)
        if not ps:
            raise ValueError("at least one helper is required (N >= 2)")
        for k, p in enumerate(ps, start=2):
            if not 0.0 < p <= 0.5:
                raise ValueError(f"p_{k}={p} must lie in (0, 0.5]")
        caps = self.distortion_caps
        if mode is Mode.STRONG:
            if caps is None or len(caps) != len(ps):
                raise ValueError("strong mode needs one distortion cap per helper")
            caps = tuple(float(D) for D in caps)
            for k, (p, D) in enumerate(zip(ps, caps), start=2):
                if not 0.0 <= D <= p:
                    raise ValueError(f"D_{k}={D} must lie in [0, p_{k}={p}]")
        elif caps is not None:
            raise ValueError("weak mode carries no distortion caps")
        object.__setattr__(self, "crossovers", ps)
        object.__setattr__(self, "distortion_caps", caps)
        object.__setattr__(self, "mode", mode)

    @property
    def n_sources(self) -> int:
        return len(self.crossovers) + 1

    @property
    def helpers(self) -> list[int]:
        return list(range(2, self.n_sources + 1))

    def with_caps(self, caps: Sequence[float]) -> "ProblemSpec":
        return ProblemSpec(self.crossovers, tuple(caps), Mode.STRONG)

    def joint_rates(self) -> np.ndarray:
        """R'_i(D_i) for every helper."""
        if self.mode is not Mode.STRONG:
            raise ValueError("joint-decoding rates need distortion caps")
        return np.array([wz_rate(p, D) for p, D in zip(self.crossovers, self.distortion_caps)])


def _check_cap(spec: ProblemSpec) -> None:
    cap = max_sources()
    if spec.n_sources > cap:
        raise ValueError(f"N={spec.n_sources} exceeds the source cap of {cap} (set MHO_MAX_N)")


def _check_step(step: float) -> float:
    step = float(step)
    if not step > 0.0 or math.isnan(step):
        raise ValueError(f"grid step must be positive, got {step}")
    return step


def _as_rates(r, n: int) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1] != n:
        raise ValueError(f"rate tuple has {r.shape[-1]} entries, region has N={n}")
    return r


def _helper_matrix(helper_rates, n_helpers: int) -> np.ndarray:
    h = np.atleast_2d(np.asarray(helper_rates, dtype=np.float64))
    if h.shape[1] != n_helpers:
        raise ValueError(f"expected {n_helpers} helper rates per row, got {h.shape[1]}")
    return h


def d_grid(upper: float, step: float) -> np.ndarray:
    """Uniform grid k * step on [0, upper], with ``upper`` itself appended."""
    step = _check_step(step)
    k = int(math.floor(upper / step + 1e-9))
    g = np.arange(k + 1) * step
    g = g[g < upper - 1e-15]
    return np.append(g, upper)


@dataclass(frozen=True)
class SumRateConstraint:
    """sum_{i in subset} R_i >= bound."""

    subset: frozenset[int]
    bound: float
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.subset:
            raise ValueError("constraint subset must be non-empty")
        if self.bound < -1e-12:
            raise ValueError(f"negative rate bound {self.bound}")

    def satisfied(self, rates: Sequence[float], tol: float = 0.0) -> bool:
        return sum(rates[i - 1] for i in self.subset) >= self.bound - tol


@dataclass(frozen=True)
class AchievableTuple:
    """An explicitly achievable vertex and how it is reached.

    Helpers in ``q_complement`` are decoded independently at ``d_values``;
    the rest are decoded jointly at their caps.
    """

    rates: tuple[float, ...]
    q_complement: frozenset[int]
    d_values: dict[int, float]
    strategies: dict[int, Strategy]


def _primary_subsets(n: int) -> Iterator[frozenset[int]]:
    """Every S of {1..n} that contains 1."""
    helpers = range(2, n + 1)
    for r in range(len(helpers) + 1):
        for extra in itertools.combinations(helpers, r):
            yield frozenset((1, *extra))


class RateRegion:
    kind: RegionKind
    spec: ProblemSpec

    @property
    def n_sources(self) -> int:
        return self.spec.n_sources

    def min_primary_rate(self, helper_rates) -> np.ndarray:
        """Smallest R1 with (R1, R_L) in the region, +inf where R_L is infeasible."""
        raise NotImplementedError

    def contains(self, rates, tol: float = 1e-9):
        """Membership within ``tol``; a bool for one tuple, a bool array for a stack."""
        r = _as_rates(rates, self.n_sources)
        flat = np.atleast_2d(r)
        floor = self.min_primary_rate(flat[:, 1:])
        inside = flat[:, 0] >= floor - tol
        return bool(inside[0]) if r.ndim == 1 else inside


class _ParamFamily(RateRegion):
    """Shared machinery of the outer and weak parameter families."""

    def _helper_floors(self) -> np.ndarray:
        raise NotImplementedError

    def _joint_terms(self) -> np.ndarray:
        raise NotImplementedError

    def witness(self, helper_rates) -> np.ndarray:
        """Operating distortions d_i = h^-1(1 - R_i), the least constraining choice."""
        h = _helper_matrix(helper_rates, self.n_sources - 1)
        return binary_entropy_inverse_array(1.0 - np.clip(h, 0.0, 1.0))

    def _sum_bounds(self, d: np.ndarray) -> dict[frozenset[int], np.ndarray]:
        """RHS of every sum-rate constraint over S containing 1, for each witness row."""
        ps = np.array(self.spec.crossovers)
        joint = self._joint_terms()
        out = {}
        for S in _primary_subsets(self.n_sources):
            comp = [i - 2 for i in self.spec.helpers if i not in S]
            inside = [i - 2 for i in S if i != 1]
            out[S] = phi_batch(ps[comp], d[:, comp]) + joint[inside].sum()
        return out

    def min_primary_rate(self, helper_rates, tol: float = 1e-12) -> np.ndarray:
        h = _helper_matrix(helper_rates, self.n_sources - 1)
        d = self.witness(h)
        best = np.full(h.shape[0], -np.inf)
        for S, bound in self._sum_bounds(d).items():
            others = [i - 2 for i in S if i != 1]
            best = np.maximum(best, bound - h[:, others].sum(axis=1))
        feasible = np.all(h >= self._helper_floors()[None, :] - tol, axis=1)
        return np.where(feasible, np.maximum(best, 0.0), np.inf)

    def constraints(self, d: Sequence[float], rho: Sequence[float] | None = None) -> list[SumRateConstraint]:
        raise NotImplementedError

    def contains_on_grid(self, rates, step: float = 0.01, tol: float = 1e-9) -> bool:
        """Existential membership by brute force over a d grid on [0, 0.5]^(N-1)."""
        r = _as_rates(rates, self.n_sources)
        grid = d_grid(0.5, step)
        for d in itertools.product(grid, repeat=self.n_sources - 1):
            if all(c.satisfied(r, tol) for c in self.constraints(d)):
                return True
        return False


class OuterRegion(_ParamFamily):
    """Strong-problem outer bound.

    For each operating-distortion vector d_L:

    * sum_{i in S} R_i >= phi(p_{S^c}, d_{S^c}) + sum_{i in S \\ {1}} R'_i(D_i) for all S containing 1;
    * R_i >= max(1 - h(d_i), rho_i (1 - h(D_i)) + (1 - rho_i) R'_i(D_i)) for each helper.

    Both helper branches bind at once. Below the cap (d_i < D_i) the
    independent branch is the larger one anyway; from the cap upward the
    joint floor also applies, and rho_i = 0 is the weakest choice, which the
    exact witness uses.
    """

    kind = RegionKind.OUTER

    def __init__(self, spec: ProblemSpec, step: float = DEFAULT_GRID_STEP):
        if spec.mode is not Mode.STRONG:
            raise ValueError("the outer bound is defined for strong-mode specs")
        _check_cap(spec)
        self.spec = spec
        self.step = _check_step(step)
        self._joint = spec.joint_rates()

    def _joint_terms(self) -> np.ndarray:
        return self._joint

    def _helper_floors(self) -> np.ndarray:
        return self._joint

    def constraints(self, d, rho=None) -> list[SumRateConstraint]:
        d = [float(x) for x in d]
        if len(d) != self.n_sources - 1:
            raise ValueError("one operating distortion per helper")
        rho = [0.0] * len(d) if rho is None else [float(x) for x in rho]
        ps = self.spec.crossovers
        caps = self.spec.distortion_caps
        params = {"d": tuple(d), "rho": tuple(rho)}
        out = []
        for S in _primary_subsets(self.n_sources):
            pairs = [(ps[i - 2], d[i - 2]) for i in self.spec.helpers if i not in S]
            bound = phi(pairs) + sum(self._joint[i - 2] for i in S if i != 1)
            out.append(SumRateConstraint(S, bound, params))
        for i in self.spec.helpers:
            k = i - 2
            indep = independent_rate(d[k])
            joint = rho[k] * independent_rate(caps[k]) + (1.0 - rho[k]) * self._joint[k]
            out.append(SumRateConstraint(frozenset({i}), max(indep, joint), params))
        return out


class WeakRegion(_ParamFamily):
    """Admissible region of the weak problem: R1 >= phi(p_L, d_L), R_i >= 1 - h(d_i)."""

    kind = RegionKind.WEAK

    def __init__(self, spec: ProblemSpec):
        if spec.mode is not Mode.WEAK:
            raise ValueError("the weak region needs a weak-mode spec")
        _check_cap(spec)
        self.spec = spec
        self._zeros = np.zeros(spec.n_sources - 1)

    def _joint_terms(self) -> np.ndarray:
        return self._zeros

    def _helper_floors(self) -> np.ndarray:
        return self._zeros

    def _sum_bounds(self, d):
        ps = np.array(self.spec.crossovers)
        return {frozenset({1}): phi_batch(ps, d)}

    def constraints(self, d, rho=None) -> list[SumRateConstraint]:
        d = [float(x) for x in d]
        params = {"d": tuple(d)}
        out = [SumRateConstraint(frozenset({1}), phi(list(zip(self.spec.crossovers, d))), params)]
        for i, di in zip(self.spec.helpers, d):
            out.append(SumRateConstraint(frozenset({i}), independent_rate(di), params))
        return out


def outer_region(spec: ProblemSpec, step: float = DEFAULT_GRID_STEP) -> OuterRegion:
    return OuterRegion(spec, step)


def weak_region(spec: ProblemSpec) -> WeakRegion:
    return WeakRegion(spec)


def inner_vertices(
    spec: ProblemSpec,
    step: float = DEFAULT_GRID_STEP,
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> list[AchievableTuple]:
    """All achievable vertices over every independently decoded set Q^c and d grid.

    R1 = phi(p_{Q^c}, d_{Q^c}); R_i = 1 - h(d_i) on Q^c with d_i on a grid over
    [0, D_i]; R_i = R'_i(D_i) on the jointly decoded rest.
    """
    if spec.mode is not Mode.STRONG:
        raise ValueError("inner vertices are defined for strong-mode specs")
    _check_cap(spec)
    step = _check_step(step)
    helpers = spec.helpers
    ps = np.array(spec.crossovers)
    joint = spec.joint_rates()
    grids = {i: d_grid(spec.distortion_caps[i - 2], step) for i in helpers}

    total = 0
    for r in range(len(helpers) + 1):
        for qc in itertools.combinations(helpers, r):
            total += math.prod(len(grids[i]) for i in qc)
    if total > max_vertices:
        raise ValueError(f"{total} candidate vertices exceed the budget of {max_vertices}; coarsen the grid")

    out: list[AchievableTuple] = []
    seen: set[tuple[int, ...]] = set()
    for r in range(len(helpers) + 1):
        for qc in itertools.combinations(helpers, r):
            cols = [i - 2 for i in qc]
            if qc:
                mesh = np.meshgrid(*[grids[i] for i in qc], indexing="ij")
                dq = np.column_stack([m.ravel() for m in mesh])
            else:
                dq = np.zeros((1, 0))
            r1 = phi_batch(ps[cols], dq)
            rates = np.tile(np.concatenate([[0.0], joint]), (dq.shape[0], 1))
            rates[:, 0] = r1
            rates[:, [c + 1 for c in cols]] = 1.0 - binary_entropy_array(dq)
            strategies = {
                i: Strategy.INDEPENDENT if i in qc else Strategy.JOINT for i in helpers
            }
            for row, drow in zip(rates, dq):
                key = tuple(np.round(row / DEDUP_TOL).astype(np.int64))
                if key in seen:
                    continue
                seen.add(key)
                out.append(
                    AchievableTuple(
                        rates=tuple(float(x) for x in row),
                        q_complement=frozenset(qc),
                        d_values={i: float(x) for i, x in zip(qc, drow)},
                        strategies=dict(strategies),
                    )
                )
    return out


class InnerRegion(RateRegion):
    """Upward-closed convex hull of achievable vertices.

    N = 2: exact lower envelope by monotone chain. N = 3: exact facet list
    from Qhull on the vertices plus their copies with coordinates raised to a
    ceiling. N >= 4: a linear program per query.
    """

    kind = RegionKind.INNER

    def __init__(self, spec: ProblemSpec, vertices: Sequence[AchievableTuple]):
        if not vertices:
            raise ValueError("inner region needs at least one vertex")
        self.spec = spec
        self.vertices = list(vertices)
        self.points = np.array([v.rates for v in self.vertices], dtype=np.float64)
        if self.points.shape[1] != spec.n_sources:
            raise ValueError("vertex dimension does not match the spec")
        self.ceiling = max(1.0, float(self.points.max())) + 0.5
        self._helper_min = self.points[:, 1:].min(axis=0)
        n = spec.n_sources
        if n == 2:
            self._build_envelope()
        elif n == 3:
            self._build_facets()

    def _build_envelope(self, columns: tuple[int, int] = (1, 0)) -> None:
        from .oracle import lower_hull

        pts = self.points[:, list(columns)]
        pts = np.vstack([pts, [[self.ceiling, pts[:, 1].min()]]])
        hull = lower_hull(pts)
        self._env_x, self._env_y = hull[:, 0], hull[:, 1]

    def _build_facets(self) -> None:
        from scipy.spatial import ConvexHull

        n = self.spec.n_sources
        copies = []
        for raise_mask in itertools.product([False, True], repeat=n):
            pts = self.points.copy()
            pts[:, list(raise_mask)] = self.ceiling
            copies.append(pts)
        allpts = np.unique(np.vstack(copies), axis=0)
        hull = ConvexHull(allpts)
        eq = hull.equations
        self._lower = eq[eq[:, 0] < -1e-12]
        # helper-rate feasibility: the projection of an upward-closed hull is
        # the upward closure of the projected vertices
        self._build_envelope(columns=(1, 2))

    def _clip(self, h: np.ndarray) -> np.ndarray:
        return np.minimum(h, self.ceiling)

    def min_primary_rate(self, helper_rates, tol: float = 1e-9) -> np.ndarray:
        h = _helper_matrix(helper_rates, self.n_sources - 1)
        n = self.n_sources
        if n == 2:
            x = self._clip(h[:, 0])
            val = np.interp(x, self._env_x, self._env_y)
            return np.where(x >= self._env_x[0] - tol, val, np.inf)
        if n == 3:
            # bounded memory: probes x facets in chunks of about 2e7 cells
            chunk = max(1, int(2e7 // len(self._lower)))
            return np.concatenate(
                [self._facet_min(h[k : k + chunk], tol) for k in range(0, len(h), chunk)]
            )
        return np.array([self._lp_min(row) for row in h])

    def _facet_min(self, h: np.ndarray, tol: float) -> np.ndarray:
        hc = self._clip(h)
        floor = np.interp(hc[:, 0], self._env_x, self._env_y)
        feasible = (hc[:, 0] >= self._env_x[0] - tol) & (hc[:, 1] >= floor - tol)
        vals = -(hc @ self._lower[:, 1:-1].T + self._lower[:, -1]) / self._lower[:, 0]
        best = vals.max(axis=1)
        return np.where(feasible, np.maximum(best, self.points[:, 0].min()), np.inf)

    def _lp_min(self, helper_row: np.ndarray) -> float:
        from scipy.optimize import linprog

        v = self.points
        res = linprog(
            c=v[:, 0],
            A_ub=v[:, 1:].T,
            b_ub=helper_row + 1e-12,
            A_eq=np.ones((1, len(v))),
            b_eq=[1.0],
            bounds=(0, None),
            method="highs",
        )
        return float(res.fun) if res.status == 0 else math.inf


def inner_region(vertices: Sequence[AchievableTuple], spec: ProblemSpec | None = None) -> InnerRegion:
    if not vertices:
        raise ValueError("inner region needs at least one vertex")
    if spec is None:
        raise ValueError("inner_region needs the generating spec")
    return InnerRegion(spec, vertices)


def build_inner(spec: ProblemSpec, step: float = DEFAULT_GRID_STEP) -> InnerRegion:
    return InnerRegion(spec, inner_vertices(spec, step))


def boundary_slice(
    region: RateRegion,
    helper_rates,
    method: str = "exact",
    tol: float = BOUNDARY_TOL,
) -> list[tuple[tuple[float, ...], float]]:
    """Minimal R1 at each helper-rate point.

    ``method="exact"`` reads the region's closed-form boundary;
    ``method="bisect"`` bisects R1 on ``contains`` down to ``tol``.
    """
    h = _helper_matrix(helper_rates, region.n_sources - 1)
    if np.any(h < 0.0) or np.any(h > 1.0):
        raise ValueError("helper rates must lie in [0, 1]")
    if method == "exact":
        vals = region.min_primary_rate(h)
    elif method == "bisect":
        vals = np.array([_bisect_r1(region, row, tol) for row in h])
    else:
        raise ValueError(f"unknown method {method!r}")
    return [(tuple(float(x) for x in row), float(v)) for row, v in zip(h, vals)]


def _bisect_r1(region: RateRegion, helper_row: np.ndarray, tol: float) -> float:
    hi = 2.0
    if not region.contains(np.concatenate([[hi], helper_row]), tol=0.0):
        return math.inf
    lo = 0.0
    if region.contains(np.concatenate([[lo], helper_row]), tol=0.0):
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if region.contains(np.concatenate([[mid], helper_row]), tol=0.0):
            hi = mid
        else:
            lo = mid
    return hi


def probe_grid(n_helpers: int, step: float, lo: Sequence[float] | None = None, hi: Sequence[float] | None = None) -> np.ndarray:
    """Cartesian grid of helper-rate points, lexicographic in (R2, R3, ...)."""
    step = _check_step(step)
    lo = [0.0] * n_helpers if lo is None else list(lo)
    hi = [1.0] * n_helpers if hi is None else list(hi)
    axes = []
    for a, b in zip(lo, hi):
        k = max(1, int(round((b - a) / step)))
        axes.append(np.linspace(a, b, k + 1))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


@dataclass(frozen=True)
class GapReport:
    max_gap: float
    location: tuple[float, ...]
    gaps: np.ndarray = field(repr=False)
    probes: np.ndarray = field(repr=False)


def region_gap(inner: RateRegion, outer: RateRegion, probes) -> GapReport:
    """Largest excess of the inner boundary over the outer one across ``probes``.

    Probes infeasible for both regions are skipped; a probe infeasible only
    for the inner region yields an infinite gap.
    """
    if inner.n_sources != outer.n_sources:
        raise ValueError("regions have different dimensions")
    h = _helper_matrix(probes, inner.n_sources - 1)
    a = inner.min_primary_rate(h)
    b = outer.min_primary_rate(h)
    both_inf = np.isinf(a) & np.isinf(b)
    with np.errstate(invalid="ignore"):
        gaps = np.where(both_inf, -np.inf, a - b)
    k = int(np.argmax(gaps))
    return GapReport(float(gaps[k]), tuple(float(x) for x in h[k]), gaps, h)


@dataclass(frozen=True)
class SlepianWolfReport:
    primary_corner: float
    sum_rate: float
    constraint_bounds: dict[frozenset[int], float]
    gap: float

    @property
    def coincide(self) -> bool:
        return abs(self.gap) <= 1e-9


def slepian_wolf_reduction(spec: ProblemSpec, probe_step: float = 0.01) -> SlepianWolfReport:
    """Lossless-helper limit D_i = 0: constraint values and the inner/outer gap."""
    if spec.mode is not Mode.STRONG:
        raise ValueError("the reduction applies to strong-mode specs")
    if any(D != 0.0 for D in spec.distortion_caps):
        raise ValueError("all distortion caps must be zero")
    n = spec.n_sources
    ps = spec.crossovers
    joint = spec.joint_rates()
    bounds = {}
    for S in _primary_subsets(n):
        pairs = [(ps[i - 2], 0.0) for i in spec.helpers if i not in S]
        bounds[S] = phi(pairs) + sum(joint[i - 2] for i in S if i != 1)
    outer = OuterRegion(spec)
    inner = InnerRegion(spec, inner_vertices(spec))
    probes = probe_grid(n - 1, probe_step)
    rep = region_gap(inner, outer, probes)
    finite = np.isfinite(rep.gaps)
    gap = float(np.max(np.abs(rep.gaps[finite]))) if finite.any() else 0.0
    return SlepianWolfReport(
        primary_corner=bounds[frozenset({1})],
        sum_rate=bounds[frozenset(range(1, n + 1))],
        constraint_bounds=bounds,
        gap=gap,
    )
