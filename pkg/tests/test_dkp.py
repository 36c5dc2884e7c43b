import math

import numpy as np
import pytest

from cuspforge import (
    BoxTooSmall,
    count_map,
    eval_map,
    image_curves,
    make_family,
    solve_dkp,
)
from cuspforge.maps import coord_deltas

from gridscan import grid_count

WIDE_BOX = ((-10.0, 10.0), (-10.0, 10.0))


def image_distance(jcs, target):
    t = np.asarray(target, float)
    best = math.inf
    for poly in jcs.curves:
        v = poly.vertices
        a, b = v[:-1], v[1:]
        ab = b - a
        denom = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
        s = np.clip(((t - a) * ab).sum(-1) / denom, 0.0, 1.0)
        proj = a + s[:, None] * ab
        best = min(best, float(np.min(np.linalg.norm(t - proj, axis=1))))
    return best


class TestReferenceSolves:
    def test_four_solutions_inside_the_image_curve(self, exact_family):
        target = eval_map(exact_family, (0.6, 1.0))
        sols = solve_dkp(exact_family, target)
        assert len(sols) == 4
        deltas = coord_deltas(
            exact_family,
            np.array([[s.phi, s.y] for s in sols.solutions]),
            np.array([0.6, 1.0]))
        assert np.min(np.linalg.norm(deltas, axis=1)) < 1e-9
        assert grid_count(exact_family, target) == 4

    def test_quarto_four_symmetric_solutions(self):
        fam = make_family("quarto_unfolded", a=0.0, b=0.0)
        sols = solve_dkp(fam, (1.0, 1.0), box=WIDE_BOX)
        found = sorted((round(s.phi, 9), round(s.y, 9)) for s in sols.solutions)
        assert found == [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]

    def test_quarto_axis_preimages_are_symmetric_pair(self):
        # (2.25, 0) sits on the fold image: y = 0 is a double root, so the
        # y coordinate is only sqrt-of-tolerance accurate and gets flagged.
        fam = make_family("quarto_unfolded", a=0.0, b=0.0)
        sols = solve_dkp(fam, (2.25, 0.0), box=WIDE_BOX)
        assert sorted(round(s.phi, 9) for s in sols.solutions) == [-1.5, 1.5]
        assert all(abs(s.y) < 1e-4 for s in sols.solutions)
        assert sols.multiplicity_flags == [True, True]

    def test_complex_square_origin_multiple_root(self):
        fam = make_family("complex_square_unfolded", a=0.0, b=0.0)
        sols = solve_dkp(fam, (0.0, 0.0), box=WIDE_BOX)
        assert len(sols) == 1
        assert math.hypot(*sols.solutions[0]) < 1e-5
        assert sols.multiplicity_flags == [True]

    def test_six_solutions_inside_the_deltoid(self, offset_family, offset_trace):
        jcs = image_curves(offset_family, offset_trace)
        oval = [c for c in jcs.curves if c.closed][0]
        cusp_images = oval.vertices[oval.cusp_indices]
        centroid = cusp_images.mean(axis=0)
        sols = solve_dkp(offset_family, tuple(centroid))
        assert len(sols) == 6
        assert grid_count(offset_family, tuple(centroid)) == 6


class TestSolutionQuality:
    def test_round_trip_residuals(self, offset_family):
        rng = np.random.default_rng(40)
        for _ in range(10):
            target = (rng.uniform(0, 200), rng.uniform(0, 200))
            sols = solve_dkp(offset_family, target)
            scale = 1.0 + max(abs(target[0]), abs(target[1]))
            for s, r in zip(sols.solutions, sols.residuals):
                u, v = eval_map(offset_family, s)
                assert max(abs(u - target[0]), abs(v - target[1])) < 1e-9 * scale
                assert r < 1e-9 * scale

    def test_solutions_pairwise_separated(self, exact_family):
        rng = np.random.default_rng(41)
        for _ in range(10):
            target = (rng.uniform(0, 200), rng.uniform(0, 200))
            sols = solve_dkp(exact_family, target)
            pts = np.array([[s.phi, s.y] for s in sols.solutions])
            for i in range(len(pts)):
                deltas = coord_deltas(exact_family, np.delete(pts, i, axis=0), pts[i])
                if len(deltas):
                    assert np.min(np.max(np.abs(deltas), axis=1)) > 1e-5

    def test_escaping_solution_raises_box_too_small(self):
        fam = make_family("quarto_unfolded", a=0.0, b=0.0)
        with pytest.raises(BoxTooSmall) as err:
            solve_dkp(fam, (4.0, 4.0), box=((-0.5, 0.5), (-0.5, 0.5)))
        assert err.value.escaped

    def test_target_must_be_finite(self, exact_family):
        with pytest.raises(ValueError):
            solve_dkp(exact_family, (math.inf, 1.0))


class TestOracleAgreement:
    @pytest.mark.parametrize("name", ["exact", "offset", "square", "quarto"])
    def test_counts_match_grid_scan(self, name, request, exact_trace, offset_trace,
                                    square_trace, quarto_trace):
        family = request.getfixturevalue(f"{name}_family")
        trace = {"exact": exact_trace, "offset": offset_trace,
                 "square": square_trace, "quarto": quarto_trace}[name]
        jcs = image_curves(family, trace)
        if family.periodic:
            window, box = ((0.0, 230.0), (0.0, 230.0)), None
        else:
            window, box = ((-15.0, 15.0), (-15.0, 15.0)), WIDE_BOX
        rng = np.random.default_rng(hash(name) % 2**32)
        checked = 0
        while checked < 10:
            target = (rng.uniform(*window[0]), rng.uniform(*window[1]))
            if image_distance(jcs, target) < 1e-3:
                continue
            try:
                n_solver = len(solve_dkp(family, target, box=box))
            except BoxTooSmall:
                continue
            n_oracle = grid_count(family, target, box=box)
            assert n_solver == n_oracle, f"target {target}"
            assert n_solver % 2 == 0
            checked += 1

    @staticmethod
    def _counts_across_curve(family, jcs, curve_index, fraction, offset):
        curve = jcs.curves[curve_index].vertices
        k = int(fraction * (len(curve) - 2))
        a, b = curve[k], curve[k + 1]
        tangent = (b - a) / np.linalg.norm(b - a)
        normal = np.array([-tangent[1], tangent[0]])
        mid = 0.5 * (a + b)
        return [len(solve_dkp(family, tuple(mid + side * offset * normal)))
                for side in (1.0, -1.0)]

    def test_count_changes_by_two_across_the_offset_image_curve(
            self, offset_family, offset_trace):
        jcs = image_curves(offset_family, offset_trace)
        oval_index = next(i for i, c in enumerate(jcs.curves) if c.closed)
        counts = self._counts_across_curve(offset_family, jcs, oval_index,
                                           0.15, 0.5)
        assert abs(counts[0] - counts[1]) == 2

    def test_inline_image_curve_is_doubly_covered(self, exact_family, exact_trace):
        # The d = 0 manipulator is invariant under (phi, y) -> (-phi, -y), so
        # each image arc carries two fold pairs and a crossing kills four
        # solutions at once (two double solutions above each image point).
        jcs = image_curves(exact_family, exact_trace)
        longest = int(np.argmax([len(c) for c in jcs.curves]))
        counts = self._counts_across_curve(exact_family, jcs, longest, 0.33, 0.5)
        assert sorted(counts) == [0, 4]


class TestCountMap:
    def test_cells_match_individual_solves(self, exact_family):
        bounds = ((0.0, 200.0), (0.0, 200.0))
        cm = count_map(exact_family, bounds, 8, seed_grid=48)
        us, vs = cm.cell_centers()
        rng = np.random.default_rng(50)
        for _ in range(6):
            i, j = rng.integers(0, 8, 2)
            assert cm.counts[i, j] == len(
                solve_dkp(exact_family, (us[i], vs[j]), seed_grid=48))

    def test_counts_in_expected_range(self, exact_family):
        cm = count_map(exact_family, ((0.0, 200.0), (0.0, 200.0)), 8, seed_grid=48)
        assert set(np.unique(cm.counts)).issubset({-1, 0, 1, 2, 3, 4, 5, 6})

    def test_resolution_validation(self, exact_family):
        with pytest.raises(ValueError):
            count_map(exact_family, ((0.0, 1.0), (0.0, 1.0)), 4)
