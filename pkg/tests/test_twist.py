"""Tests for the kicked twist map: orbits, curves, crossing counts."""

import math

import numpy as np
import pytest

from barlab._kernels import HAS_NUMBA, count_segment_crossings
from barlab.errors import DegenerateInput, ParameterOutOfRange
from barlab.twist import (
    CurveGrowth,
    OrbitCensus,
    Polyline,
    TwistMapSpec,
    count_intersections,
    count_periodic_points,
    discrete_action,
    horizontal_circle,
    iterate_curve,
    length_growth_rate,
    lipschitz_bound,
    map_apply,
    map_apply_many,
    orbit_census,
    orbit_phase_points,
    periodic_orbits,
    pk_monotonicity_report,
    tangent_matrix,
    vertical_circle,
    write_orbits_csv,
)

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# independent oracles (no reuse of package internals)
# ---------------------------------------------------------------------------


def phase_roots_oracle(K: float, k: int, grid: int = 240) -> int:
    """Count period-k phase points by dense-grid 2D Newton root finding.

    Solves phi^k(p) = p + (m, 0) on the cylinder lift for each winding
    class m in 0..k-1 with finite-difference Jacobians, then deduplicates
    the converged phase points.  Entirely independent of the variational
    solver under test.
    """
    pad = 1.0 + K / TWO_PI

    def phik(P, reps):
        P = P.copy()
        for _ in range(reps):
            y1 = P[:, 1] - (K / TWO_PI) * np.sin(TWO_PI * P[:, 0])
            P = np.stack([P[:, 0] + y1, y1], axis=1)
        return P

    found = set()
    for m in range(k):
        xs = np.linspace(0.0, 1.0, grid, endpoint=False)
        ys = np.linspace(m / k - pad, m / k + pad, grid)
        X, Y = np.meshgrid(xs, ys)
        P = np.stack([X.ravel(), Y.ravel()], axis=1)
        target = np.array([m, 0.0])
        h = 1e-6
        for _ in range(40):
            F = phik(P, k) - P - target
            Fx = (phik(P + [h, 0.0], k) - (P + [h, 0.0]) - target - F) / h
            Fy = (phik(P + [0.0, h], k) - (P + [0.0, h]) - target - F) / h
            det = Fx[:, 0] * Fy[:, 1] - Fy[:, 0] * Fx[:, 1]
            bad = np.abs(det) < 1e-14
            det[bad] = 1.0
            dx = (F[:, 0] * Fy[:, 1] - F[:, 1] * Fy[:, 0]) / det
            dy = (Fx[:, 0] * F[:, 1] - Fx[:, 1] * F[:, 0]) / det
            step = np.stack([dx, dy], axis=1)
            step[bad] = np.nan
            np.clip(step, -0.5, 0.5, out=step)
            P = P - step
        ok = np.isfinite(P).all(axis=1)
        F = phik(P[ok], k) - P[ok] - target
        good = P[ok][np.abs(F).max(axis=1) <= 1e-9]
        for x, y in good:
            found.add((round(float(np.mod(x, 1.0)), 5) % 1.0, round(float(y), 5)))
    return len(found)


def vertical_line_crossings_oracle(poly: Polyline, c: float) -> int:
    """Crossings of a polyline with the torus line x = c via floor counting.

    Each lift segment is linear, so it crosses x = c (mod 1) exactly
    |floor(x1 - c) - floor(x0 - c)| times.  Works straight off the vertex
    data, independent of the crossing kernel.
    """
    v = poly.vertices
    closing = v[0] + np.asarray(poly.closure, dtype=float)
    ext = np.vstack([v, closing])
    a = np.floor(ext[:-1, 0] - c)
    b = np.floor(ext[1:, 0] - c)
    return int(np.abs(b - a).sum())


def action_oracle(K: float, xs, m: int) -> float:
    xs = np.asarray(xs, dtype=float)
    xn = np.concatenate([xs[1:], [xs[0] + m]])
    steps = 0.5 * (xn - xs) ** 2
    pot = (K / (4.0 * math.pi**2)) * np.cos(TWO_PI * xs)
    return float(np.sum(steps + pot))


# ---------------------------------------------------------------------------
# map basics
# ---------------------------------------------------------------------------


class TestMapApply:
    def test_integrable_shear(self):
        out = map_apply(TwistMapSpec(K=0.0), (0.3, 0.25))
        assert np.allclose(out, [0.55, 0.25], atol=1e-15)

    def test_origin_fixed_for_any_kick(self):
        for K in (0.0, 1.0, 2.0, 8.0, 11.5):
            out = map_apply(TwistMapSpec(K=K), (0.0, 0.0))
            assert np.allclose(out, [0.0, 0.0], atol=1e-15)

    def test_tangent_determinant_is_one(self):
        rng = np.random.default_rng(3)
        for K in (0.5, 2.0, 8.0):
            spec = TwistMapSpec(K=K)
            for x in rng.uniform(0, 1, 25):
                assert abs(np.linalg.det(tangent_matrix(spec, x)) - 1.0) <= 1e-12

    def test_composed_tangent_determinant_k100(self):
        # the composed tangent has entries of order Lip^100, so its raw 2x2
        # determinant is pure cancellation noise; multiplicativity gives the
        # numerically meaningful statement of area preservation
        spec = TwistMapSpec(K=8.0)
        p = np.array([0.135, 0.246])
        det = 1.0
        for _ in range(100):
            det *= np.linalg.det(tangent_matrix(spec, p[0]))
            p = map_apply(spec, p)
        assert abs(det - 1.0) <= 1e-10

    def test_discrete_euler_lagrange_matches_map(self):
        # the map must be the stationarity condition of the step function
        spec = TwistMapSpec(K=2.0)
        rng = np.random.default_rng(11)
        for _ in range(20):
            p0 = rng.uniform(-1, 1, 2)
            p1 = map_apply(spec, p0)
            p2 = map_apply(spec, p1)
            x0, x1, x2 = p0[0], p1[0], p2[0]
            resid = (x1 - x0) - (x2 - x1) - (spec.K / TWO_PI) * math.sin(TWO_PI * x1)
            assert abs(resid) <= 1e-12

    def test_vectorised_matches_scalar(self):
        spec = TwistMapSpec(K=3.3)
        rng = np.random.default_rng(5)
        pts = rng.uniform(-2, 2, size=(40, 2))
        batch = map_apply_many(spec, pts)
        for p, q in zip(pts, batch):
            assert np.allclose(map_apply(spec, p), q, atol=1e-15)

    def test_bad_phase_space_rejected(self):
        with pytest.raises(ParameterOutOfRange):
            TwistMapSpec(K=1.0, phase_space="sphere")


# ---------------------------------------------------------------------------
# periodic orbits
# ---------------------------------------------------------------------------


class TestPeriodicOrbits:
    def test_k2_fixed_points(self):
        recs = periodic_orbits(TwistMapSpec(K=2.0), 1, m_range=(0,))
        assert len(recs) == 2
        xs = sorted(r.points[0] for r in recs)
        assert abs(xs[0] - 0.0) <= 1e-9 and abs(xs[1] - 0.5) <= 1e-9
        by_x = {round(r.points[0], 6): r for r in recs}
        assert by_x[0.0].hyperbolic is False  # elliptic center
        assert by_x[0.5].hyperbolic is True  # saddle
        assert by_x[0.0].residue == pytest.approx(0.5, abs=1e-9)
        assert by_x[0.5].residue == pytest.approx(-0.5, abs=1e-9)
        # one maximum and one saddle of the one-variable action
        assert {r.morse_index for r in recs} == {0, 1}
        assert all(r.nondegenerate for r in recs)

    def test_census_k2_fixed_points(self):
        recs = periodic_orbits(TwistMapSpec(K=2.0), 1, m_range=(0,))
        census = orbit_census(recs)
        assert (census.total_orbits, census.hyperbolic, census.elliptic,
                census.degenerate) == (2, 1, 1, 0)
        assert census.points_total == 2
        assert census.hyperbolic_points == 1
        assert census.exceeds_homology() is False

    def test_census_empty(self):
        census = orbit_census([])
        assert (census.total_orbits, census.hyperbolic, census.elliptic,
                census.degenerate) == (0, 0, 0, 0)

    def test_census_mixed_periods_rejected(self):
        r1 = periodic_orbits(TwistMapSpec(K=2.0), 1, m_range=(0,))
        r2 = periodic_orbits(TwistMapSpec(K=2.0), 2, m_range=(0,))
        with pytest.raises(DegenerateInput):
            orbit_census(r1 + r2)

    def test_integrable_case_is_degenerate(self):
        recs = periodic_orbits(TwistMapSpec(K=0.0), 1, m_range=(0,))
        assert recs, "degenerate family must still be represented"
        assert all(not r.nondegenerate for r in recs)
        census = orbit_census(recs)
        assert census.degenerate == len(recs)
        assert census.points_total == 0  # degenerate families carry no count

    def test_k8_k3_census_exceeds_homology(self):
        census = count_periodic_points(TwistMapSpec(K=8.0), 3)
        assert census.hyperbolic_points > 2
        assert census.exceeds_homology() is True

    def test_orbit_invariants_small_periods(self):
        spec = TwistMapSpec(K=8.0)
        for k in (2, 3, 4, 5):
            recs = periodic_orbits(spec, k, m_range=range(k),
                                   seeding="symbolic_jumps")
            assert recs
            for r in recs:
                assert r.grad_norm <= 1e-10
                assert 0 <= r.morse_index <= k
                # orbit closes in phase space (float amplification along
                # hyperbolic orbits stays below the bound at these periods)
                pts = orbit_phase_points(spec, r.points, r.m)
                p = pts[0].copy()
                for _ in range(k):
                    p = map_apply(spec, p)
                assert abs(p[0] - pts[0][0] - r.m) <= 1e-8
                assert abs(p[1] - pts[0][1]) <= 1e-8
                # action agrees with an independent recomputation
                assert r.action == pytest.approx(
                    action_oracle(8.0, r.points, r.m), abs=1e-10
                )
                # stability classification is consistent
                M = np.eye(2)
                for x, _ in pts:
                    M = tangent_matrix(spec, x) @ M
                trace = float(np.trace(M))
                assert r.hyperbolic == (abs(trace) > 2.0)
                assert r.residue == pytest.approx((2.0 - trace) / 4.0, abs=1e-9)
                if r.hyperbolic:
                    assert not (0.0 <= r.residue <= 1.0)

    def test_dedup_collapses_rotations_and_translations(self):
        spec = TwistMapSpec(K=8.0)
        recs = periodic_orbits(spec, 3, m_range=(1,), seeding="symbolic_jumps")
        base = next(r for r in recs if r.primitive_period == 3)
        xs = np.array(base.points)
        rotated = np.concatenate([xs[1:], [xs[0] + base.m]]) + 2.0
        merged = periodic_orbits(
            spec, 3, m_range=(1,), seeding="symbolic_jumps"
        )
        # feeding the rotated/translated copy as an extra random start must
        # not create a new record: counts are already stable under reruns
        again = periodic_orbits(spec, 3, m_range=(1,),
                                seeding="symbolic_jumps", random_count=64,
                                seed=123)
        assert len(again) >= len(merged)
        canon = {tuple(round(v, 7) for v in r.points) for r in merged}
        for r in again:
            if tuple(round(v, 7) for v in r.points) in canon:
                canon.discard(tuple(round(v, 7) for v in r.points))
        # every jump-seeded orbit reappears identically in the larger run
        assert not canon
        assert rotated.shape == xs.shape

    def test_deterministic_across_runs(self):
        spec = TwistMapSpec(K=8.0)
        a = periodic_orbits(spec, 4, m_range=range(4), seeding="symbolic_jumps")
        b = periodic_orbits(spec, 4, m_range=range(4), seeding="symbolic_jumps")
        assert [r.points for r in a] == [r.points for r in b]

    def test_matches_dense_grid_roots_small_k(self):
        # the phase-space root count is an entirely different algorithm;
        # random multistart supplements the symbolic seeds because a few
        # orbits live far from the half-integer lattice
        for K in (2.0, 8.0):
            for k in (1, 2):
                recs = periodic_orbits(
                    TwistMapSpec(K=K), k, m_range=range(k),
                    seeding="symbolic_jumps", random_count=800, seed=7,
                )
                assert orbit_census(recs).points_total == phase_roots_oracle(K, k)

    def test_invalid_period_and_seeding(self):
        with pytest.raises(ParameterOutOfRange):
            periodic_orbits(TwistMapSpec(K=2.0), 0)
        with pytest.raises(ParameterOutOfRange):
            periodic_orbits(TwistMapSpec(K=2.0), 2, seeding="fancy")

    def test_pk_growth_rate_large_kick(self):
        # point counts should grow like (K/2)^k; the band is generous
        # because seeding is heuristic at moderate kick strength
        spec = TwistMapSpec(K=8.0)
        target = math.log2(8.0 / 2.0)
        for k in range(2, 9):
            census = count_periodic_points(spec, k)
            rate = math.log2(census.points_total) / k
            assert target * 0.7 <= rate <= target * 1.3, (k, rate)

    def test_pk_monotonicity_reported_honestly(self):
        report = pk_monotonicity_report(2, K_values=(4.0, 6.0, 8.0, 10.0))
        assert report["p_values"] == [
            count_periodic_points(TwistMapSpec(K=K), 2, seeding="symbolic").points_total
            for K in (4.0, 6.0, 8.0, 10.0)
        ]
        # violations, if any, must exactly list the decreasing steps
        p = report["p_values"]
        expected = [
            {"K_from": a, "K_to": b, "p_from": p[i], "p_to": p[i + 1]}
            for i, (a, b) in enumerate(zip((4.0, 6.0, 8.0), (6.0, 8.0, 10.0)))
            if p[i + 1] < p[i]
        ]
        assert report["violations"] == expected
        assert report["nondecreasing"] == (not expected)


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------


class TestCurves:
    def test_polyline_validation(self):
        with pytest.raises(DegenerateInput):
            Polyline(np.zeros((1, 2)))
        with pytest.raises(DegenerateInput):
            Polyline(np.zeros((4, 3)))
        line = vertical_circle(0.25, 16)
        assert line.closure == (0, 1)
        assert line.length == pytest.approx(1.0, abs=1e-12)
        assert line.length_consistent()

    def test_integrable_curve_lengths_exact(self):
        g = iterate_curve(TwistMapSpec(K=0.0), vertical_circle(0.25, 64), 6)
        expected = [math.sqrt(1.0 + k * k) for k in range(7)]
        assert np.allclose(g.lengths, expected, atol=1e-9)
        assert all(g.resolved_steps)
        assert not g.budget_exhausted

    def test_integrable_growth_rate_is_zero(self):
        g = iterate_curve(TwistMapSpec(K=0.0), vertical_circle(0.25, 64), 12)
        h, p = length_growth_rate(g)
        # polynomial-aware fit: linear length growth lands in the log2 k term
        assert abs(h) <= 0.05
        assert p == pytest.approx(1.0, abs=0.25)

    def test_chaotic_growth_rate_near_folklore_value(self):
        g = iterate_curve(
            TwistMapSpec(K=8.0), vertical_circle(0.25, 64), 12,
            tol=0.05, vertex_budget=400_000,
        )
        assert len(g.resolved_lengths()) >= 6  # enough resolved iterates
        h, _ = length_growth_rate(g)
        target = math.log2(8.0 / 2.0)
        assert target * 0.7 <= h <= target * 1.3
        # the refinement budget is finite and the flag says so honestly
        assert g.budget_exhausted
        assert not all(g.resolved_steps)

    def test_budget_flag_partial_results(self):
        g = iterate_curve(
            TwistMapSpec(K=8.0), vertical_circle(0.25, 32), 6,
            tol=0.01, vertex_budget=500,
        )
        assert g.budget_exhausted
        assert len(g.lengths) == 7  # partial results for every iterate
        assert g.resolved_steps and not all(g.resolved_steps)

    def test_per_step_lipschitz_bounds(self):
        for K in (2.0, 8.0):
            g = iterate_curve(TwistMapSpec(K=K), vertical_circle(0.3, 64), 5,
                              tol=0.02)
            for i, lip in enumerate(g.lipschitz_steps[: len(g.lengths) - 1]):
                if not g.resolved_steps[i]:
                    break
                ratio = g.lengths[i + 1] / g.lengths[i]
                assert ratio <= lip * 1.05
                assert ratio >= 1.0 / (lip * 1.05)
            assert max(g.lipschitz_steps) <= g.lipschitz_global + 1e-9

    def test_global_lipschitz_closed_form(self):
        # at K=0 the shear has norm golden-ratio-ish: ((3+sqrt(5))/2)^(1/2)
        expected = math.sqrt((3.0 + math.sqrt(5.0)) / 2.0)
        assert lipschitz_bound(TwistMapSpec(K=0.0)) == pytest.approx(
            expected, abs=1e-9
        )

    def test_closure_evolves_by_shear(self):
        g = iterate_curve(TwistMapSpec(K=2.0), vertical_circle(0.25, 64), 3,
                          tol=0.05)
        assert g.final.closure == (3, 1)


# ---------------------------------------------------------------------------
# crossing counts
# ---------------------------------------------------------------------------


class TestIntersections:
    def test_kernel_unit_cases(self):
        a = np.array([[0.2, 0.2, 0.8, 0.8]])
        b = np.array([[0.2, 0.8, 0.8, 0.2]])
        assert count_segment_crossings(a, b) == 1
        parallel = np.array([[0.2, 0.3, 0.8, 0.9]])
        assert count_segment_crossings(a, parallel) == 0
        backends = ("numba", "numpy") if HAS_NUMBA else ("numpy",)
        for backend in backends:
            assert count_segment_crossings(a, b, force_backend=backend) == 1

    def test_vertical_and_horizontal_circle(self):
        assert count_intersections(vertical_circle(0.25), horizontal_circle(0.1)) == 1

    def test_two_distinct_vertical_circles(self):
        assert count_intersections(vertical_circle(0.25), vertical_circle(0.75)) == 0

    def test_image_crossings_match_sign_change_oracle(self):
        spec = TwistMapSpec(K=2.0)
        circle = vertical_circle(0.25, 256)
        one = iterate_curve(spec, circle, 1, tol=0.01).final
        two = iterate_curve(spec, circle, 2, tol=0.01).final
        # one application tilts the circle into the (1,1) class: one crossing
        n1 = count_intersections(one, circle)
        assert n1 == vertical_line_crossings_oracle(one, 0.25) == 1
        # two applications reach the (2,1) class: even count, at least two
        n2 = count_intersections(two, circle)
        assert n2 == vertical_line_crossings_oracle(two, 0.25)
        assert n2 >= 2 and n2 % 2 == 0

    def test_crossings_symmetric_for_generic_curves(self):
        spec = TwistMapSpec(K=2.0)
        circle = vertical_circle(0.25, 256)
        img = iterate_curve(spec, circle, 2, tol=0.01).final
        assert count_intersections(img, circle) == count_intersections(circle, img)

    def test_long_diagonal_wraps(self):
        # a (1,3) line crosses a horizontal circle three times
        diag = Polyline(np.array([[0.05, 0.0], [0.55, 1.5]]), closure=(1, 3))
        assert count_intersections(diag, horizontal_circle(0.26)) == 3


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


class TestOrbitExport:
    def test_csv_layout(self, tmp_path):
        recs = periodic_orbits(TwistMapSpec(K=2.0), 1, m_range=(0,))
        out = tmp_path / "orbits.csv"
        write_orbits_csv(recs, out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == (
            "k[steps],m[winding],action[action],index[count],"
            "residue[1],hyperbolic[bool],x0[torus]"
        )
        assert lines[1] == "1,0,0.0506605918212,1,0.5,0,0"
        assert lines[2] == "1,0,-0.0506605918212,0,-0.5,1,0.5"
