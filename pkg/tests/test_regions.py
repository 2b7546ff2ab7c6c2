import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manyhelpone.info import binary_entropy, binary_convolution
from manyhelpone.oracle import CascadeSpec, phi_oracle
from manyhelpone.regions import (
    InnerRegion,
    Mode,
    OuterRegion,
    ProblemSpec,
    RegionKind,
    SumRateConstraint,
    boundary_slice,
    build_inner,
    d_grid,
    inner_region,
    inner_vertices,
    max_sources,
    outer_region,
    probe_grid,
    region_gap,
    slepian_wolf_reduction,
    weak_region,
)
from manyhelpone.single_letter import phi, wz_rate


def strong(ps, Ds):
    return ProblemSpec(tuple(ps), tuple(Ds))


def weak(ps):
    return ProblemSpec(tuple(ps), mode=Mode.WEAK)


class TestProblemSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            ProblemSpec((0.2,), (0.3,))
        with pytest.raises(ValueError):
            ProblemSpec((0.6,), (0.1,))
        with pytest.raises(ValueError):
            ProblemSpec((0.2,))
        with pytest.raises(ValueError):
            ProblemSpec((0.2,), (0.1,), mode="weak")
        with pytest.raises(ValueError):
            ProblemSpec((), ())

    def test_cap_env(self, monkeypatch):
        assert max_sources() == 8
        monkeypatch.setenv("MHO_MAX_N", "2")
        with pytest.raises(ValueError):
            outer_region(strong([0.2, 0.3], [0.1, 0.1]))
        monkeypatch.setenv("MHO_MAX_N", "x")
        with pytest.raises(ValueError):
            max_sources()

    def test_grid_step(self):
        with pytest.raises(ValueError):
            outer_region(strong([0.2], [0.1]), step=0.0)
        g = d_grid(0.03, 0.01)
        np.testing.assert_allclose(g, [0, 0.01, 0.02, 0.03])
        assert d_grid(0.035, 0.01)[-1] == 0.035


class TestOuterConstraints:
    def test_sum_rate_two_sources(self):
        o = outer_region(strong([0.2], [0.04]))
        cons = {c.subset: c.bound for c in o.constraints([0.1]) if 1 in c.subset}
        assert cons[frozenset({1, 2})] == pytest.approx(1 + wz_rate(0.2, 0.04))
        assert cons[frozenset({1})] == pytest.approx(binary_entropy(binary_convolution([0.2, 0.1])))

    def test_perfect_description(self):
        o = outer_region(strong([0.2], [0.04]))
        cons = {c.subset: c.bound for c in o.constraints([0.0])}
        assert cons[frozenset({1})] == pytest.approx(binary_entropy(0.2))
        assert cons[frozenset({2})] == pytest.approx(1.0)

    def test_triple_sum(self):
        o = outer_region(strong([0.2, 0.3], [0.04, 0.05]))
        cons = {c.subset: c.bound for c in o.constraints([0.1, 0.1])}
        assert cons[frozenset({1, 2, 3})] == pytest.approx(1 + wz_rate(0.2, 0.04) + wz_rate(0.3, 0.05))

    def test_weak_mode_rejected(self):
        with pytest.raises(ValueError):
            OuterRegion(weak([0.2]))

    def test_negative_bound_rejected(self):
        with pytest.raises(ValueError):
            SumRateConstraint(frozenset({1}), -1.0)
        with pytest.raises(ValueError):
            SumRateConstraint(frozenset(), 0.0)


class TestInnerVertices:
    def test_two_source_named_points(self):
        spec = strong([0.2], [0.03])
        rates = {v.rates for v in inner_vertices(spec, 0.01)}
        assert (1.0, pytest.approx(wz_rate(0.2, 0.03))) in [(r[0], r[1]) for r in rates]
        assert any(r[0] == pytest.approx(binary_entropy(0.2)) and r[1] == 1.0 for r in rates)

    def test_three_source_all_joint(self):
        spec = strong([0.2, 0.3], [0.04, 0.05])
        vs = [v for v in inner_vertices(spec, 0.01) if not v.q_complement]
        assert len(vs) == 1
        assert vs[0].rates == pytest.approx((1.0, wz_rate(0.2, 0.04), wz_rate(0.3, 0.05)))

    def test_dedup_and_count(self):
        spec = strong([0.2, 0.3], [0.02, 0.03])
        vs = inner_vertices(spec, 0.01)
        # 1 + 3 + 4 + 12 grid assignments
        assert len(vs) == 20
        keys = {tuple(np.round(np.array(v.rates), 12)) for v in vs}
        assert len(keys) == len(vs)

    def test_budget(self):
        with pytest.raises(ValueError):
            inner_vertices(strong([0.2, 0.3], [0.2, 0.3]), 1e-3, max_vertices=1000)

    def test_empty_hull_rejected(self):
        with pytest.raises(ValueError):
            inner_region([], strong([0.2], [0.1]))


class TestInnerHull:
    def test_single_vertex_is_orthant(self):
        spec = strong([0.2], [0.1])
        v = inner_vertices(spec, 0.5)[:1]
        region = inner_region(v, spec)
        r = np.array(v[0].rates)
        assert region.contains(r)
        assert region.contains(r + 0.1)
        assert not region.contains(r - np.array([1e-3, 0.0]))
        assert not region.contains(r - np.array([0.0, 1e-3]))

    def test_time_sharing_midpoint(self):
        spec = strong([0.2], [0.03])
        inner = build_inner(spec)
        a1 = np.array([1.0, wz_rate(0.2, 0.03)])
        b1 = np.array([binary_entropy(binary_convolution([0.2, 0.03])), 1 - binary_entropy(0.03)])
        assert inner.contains(0.5 * (a1 + b1))

    def test_all_zero_excluded(self):
        inner = build_inner(strong([0.2], [0.1]))
        assert not inner.contains([0.0, 0.0])

    def test_three_source_hull_matches_lp(self):
        spec = strong([0.2, 0.3], [0.04, 0.05])
        inner = InnerRegion(spec, inner_vertices(spec, 0.005))
        rng = np.random.default_rng(7)
        probes = rng.uniform(0.3, 1.3, size=(100, 2))
        hull = inner.min_primary_rate(probes)
        lp = np.array([inner._lp_min(row) for row in probes])
        assert np.array_equal(np.isinf(hull), np.isinf(lp))
        fin = np.isfinite(lp)
        np.testing.assert_allclose(hull[fin], lp[fin], atol=1e-9)

    def test_four_sources_use_lp(self):
        spec = strong([0.1, 0.2, 0.3], [0.02, 0.03, 0.04])
        inner = build_inner(spec, 0.01)
        outer = outer_region(spec, 0.01)
        assert inner.contains([1.0, 1.0, 1.0, 1.0])
        assert not inner.contains([0.1, 0.1, 0.1, 0.1])
        for v in inner.vertices[:50]:
            assert outer.contains(v.rates)

    def test_kinds(self):
        spec = strong([0.2], [0.1])
        assert build_inner(spec).kind is RegionKind.INNER
        assert outer_region(spec).kind is RegionKind.OUTER
        assert weak_region(weak([0.2])).kind is RegionKind.WEAK


class TestMembership:
    def test_large_rates_always_inside(self):
        spec = strong([0.2, 0.3], [0.04, 0.05])
        for region in (build_inner(spec, 0.01), outer_region(spec)):
            assert region.contains([1.0, 1.0, 1.0])

    def test_weak_point_below_curve(self):
        w = weak_region(weak([0.2]))
        d = 0.1
        r2 = 1 - binary_entropy(d)
        assert w.contains([binary_entropy(binary_convolution([0.2, d])), r2], tol=1e-6)
        assert not w.contains([binary_entropy(binary_convolution([0.2, d])) - 1e-3, r2], tol=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            outer_region(strong([0.2], [0.1])).contains([1.0, 1.0, 1.0])

    def test_batch_contains(self):
        o = outer_region(strong([0.2], [0.1]))
        out = o.contains(np.array([[1.0, 1.0], [0.0, 0.0]]))
        assert out.tolist() == [True, False]

    def test_exact_witness_matches_grid_search(self):
        rng = np.random.default_rng(11)
        w = weak_region(weak([0.2, 0.3]))
        o = outer_region(strong([0.2, 0.3], [0.1, 0.2]))
        for region in (w, o):
            for r in rng.uniform(0.0, 1.1, size=(40, 3)):
                exact_in = region.contains(r, tol=0.0)
                # coarse grid can only under-approximate the existential set
                if region.contains_on_grid(r, step=0.01, tol=0.0):
                    assert exact_in
                # deep inside or well outside must agree with the grid search
                margin = r[0] - region.min_primary_rate(r[1:][None, :])[0]
                if margin > 0.02:
                    assert region.contains_on_grid(r, step=0.01, tol=0.0)

    def test_single_rate_constraints_suffice_above_one(self):
        # with R1 >= H(X1) every sum-rate bound is implied by the single-rate floors
        spec = strong([0.2, 0.3], [0.04, 0.05])
        o = outer_region(spec)
        rng = np.random.default_rng(5)
        floors = o._helper_floors()
        for r in rng.uniform(0.0, 1.2, size=(2000, 3)):
            r[0] = 1.0 + r[0] * 0.1
            single = bool(np.all(r[1:] >= floors - 1e-12))
            assert o.contains(r, tol=1e-12) == single


class TestBoundarySlice:
    def test_weak_corners(self):
        w = weak_region(weak([0.2]))
        (_, at_one), (_, at_zero) = boundary_slice(w, [[1.0], [0.0]])
        assert at_one == pytest.approx(binary_entropy(0.2), abs=1e-12)
        assert at_zero == pytest.approx(1.0, abs=1e-12)

    def test_inner_vertex_lookup(self):
        spec = strong([0.2], [0.03])
        inner = build_inner(spec)
        [(_, r1)] = boundary_slice(inner, [[wz_rate(0.2, 0.03)]])
        assert r1 == pytest.approx(1.0, abs=1e-9)

    def test_bisection_agrees(self):
        spec = strong([0.2, 0.3], [0.04, 0.05])
        probes = probe_grid(2, 0.25)
        for region in (outer_region(spec), build_inner(spec, 0.01)):
            exact = boundary_slice(region, probes)
            bis = boundary_slice(region, probes, method="bisect")
            for (_, a), (_, b) in zip(exact, bis):
                if np.isinf(a):
                    assert np.isinf(b)
                else:
                    assert abs(a - b) <= 2e-6

    def test_rejects_rates_outside_unit(self):
        with pytest.raises(ValueError):
            boundary_slice(weak_region(weak([0.2])), [[1.5]])
        with pytest.raises(ValueError):
            boundary_slice(weak_region(weak([0.2])), [[0.5]], method="newton")

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.05, 0.5), st.floats(0.0, 1.0))
    def test_nonincreasing_in_helper_rate(self, p, t):
        spec = strong([p], [t * p])
        probes = probe_grid(1, 0.01)
        for region in (outer_region(spec), build_inner(spec, 0.005)):
            vals = region.min_primary_rate(probes)
            fin = np.isfinite(vals)
            assert np.all(np.diff(vals[fin]) <= 1e-12)

    def test_nonincreasing_three_sources(self):
        spec = strong([0.2, 0.3], [0.04, 0.05])
        probes = probe_grid(2, 0.05)
        for region in (outer_region(spec), build_inner(spec, 0.005), weak_region(weak([0.2, 0.3]))):
            vals = region.min_primary_rate(probes).reshape(21, 21)
            with np.errstate(invalid="ignore"):
                d0 = np.diff(vals, axis=0)
                d1 = np.diff(vals, axis=1)
            assert np.all(d0[np.isfinite(d0)] <= 1e-12)
            assert np.all(d1[np.isfinite(d1)] <= 1e-12)


class TestGapAndReductions:
    def test_identical_regions(self):
        o = outer_region(strong([0.2], [0.1]))
        rep = region_gap(o, o, probe_grid(1, 0.01))
        assert abs(rep.max_gap) <= 1e-9

    def test_gap_dimension_mismatch(self):
        with pytest.raises(ValueError):
            region_gap(outer_region(strong([0.2], [0.1])), outer_region(strong([0.2, 0.3], [0.1, 0.1])), [[0.5]])

    def test_slepian_wolf_two_sources(self):
        rep = slepian_wolf_reduction(strong([0.2], [0.0]))
        assert rep.primary_corner == pytest.approx(binary_entropy(0.2))
        assert rep.sum_rate == pytest.approx(1 + binary_entropy(0.2))
        assert rep.coincide

    def test_slepian_wolf_primary_corner_three_sources(self):
        rep = slepian_wolf_reduction(strong([0.2, 0.3], [0.0, 0.0]), probe_step=0.05)
        assert rep.primary_corner == pytest.approx(phi_oracle(CascadeSpec(((0.2, 0.0), (0.3, 0.0)))), abs=1e-12)

    def test_slepian_wolf_needs_zero_caps(self):
        with pytest.raises(ValueError):
            slepian_wolf_reduction(strong([0.2], [0.1]))

    def test_weak_curve_is_wyner(self):
        w = weak_region(weak([0.2]))
        for d in np.linspace(0, 0.5, 11):
            [(_, r1)] = boundary_slice(w, [[1 - binary_entropy(d)]])
            assert r1 == pytest.approx(phi_oracle(CascadeSpec(((0.2, d),))), abs=1e-9)

    def test_weak_requires_weak_mode(self):
        with pytest.raises(ValueError):
            weak_region(strong([0.2], [0.1]))
