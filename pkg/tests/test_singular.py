import math
from dataclasses import dataclass

import numpy as np
import pytest

from cuspforge import (
    PointKind,
    PreconditionViolated,
    classify_point,
    detection_system,
    discriminant,
    find_special_points,
    make_family,
    quadratic_expansion,
)
from cuspforge.maps import wrap_delta

from conftest import NORMAL_BOX, PAPER_BOX
from gridscan import complex_square_cusp_locations, quarto_cusp_location


def periodic_dist(p, q):
    return math.hypot(wrap_delta(p[0] - q[0]), p[1] - q[1])


@dataclass(frozen=True)
class SwappedOutputs:
    """Same map with (u, v) exchanged, which negates the determinant."""

    base: object

    @property
    def periodic(self):
        return self.base.periodic

    @property
    def input_names(self):
        return self.base.input_names

    kind = "swapped"

    def default_box(self):
        return self.base.default_box()

    def evaluate(self, x, y):
        u, v = self.base.evaluate(x, y)
        return v, u

    def jacobian(self, x, y):
        return np.asarray(self.base.jacobian(x, y))[..., ::-1, :]

    def hessian(self, x, y):
        return np.asarray(self.base.hessian(x, y))[..., ::-1, :, :]

    def jdet(self, x, y):
        return -np.asarray(self.base.jdet(x, y))

    def jdet_grad(self, x, y):
        gx, gy = self.base.jdet_grad(x, y)
        return -np.asarray(gx), -np.asarray(gy)

    def jdet_hess(self, x, y):
        jpp, jpy, jyy = self.base.jdet_hess(x, y)
        return -np.asarray(jpp), -np.asarray(jpy), -np.asarray(jyy)


class TestDetectionSystem:
    def test_vanishes_at_inline_corank2_points(self, exact_family):
        for phi in (0.0, math.pi):
            r = detection_system(exact_family, (phi, 0.0))
            assert max(abs(v) for v in r) < 1e-12

    def test_quarto_hand_computed_value(self):
        fam = make_family("quarto_unfolded", a=0.0, b=0.0)
        r = detection_system(fam, (1.0, 0.0))
        assert r == (0.0, -2.0, 0.0)


class TestInlineManipulator:
    def test_exactly_two_special_points(self, exact_specials):
        assert len(exact_specials) == 2
        locs = [p.location for p in exact_specials]
        assert periodic_dist(locs[0], (0.0, 0.0)) < 1e-9
        assert periodic_dist(locs[1], (math.pi, 0.0)) < 1e-9

    def test_kinds_and_discriminants(self, exact_specials):
        node, isolated = exact_specials
        assert node.kind == PointKind.CORANK2_HYPERBOLIC
        assert abs(node.delta - 13489.0) < 1e-6
        assert isolated.kind == PointKind.CORANK2_ELLIPTIC
        assert abs(isolated.delta - (-12911.0)) < 1e-6

    def test_residuals_below_tolerance(self, exact_specials, offset_specials):
        for p in list(exact_specials) + list(offset_specials):
            assert p.residual < 1e-10

    def test_quadratic_expansion_at_node(self, exact_family):
        exp = quadratic_expansion(exact_family, (0.0, 0.0))
        assert np.allclose(exp.jdet, (11.0, -17.0, -300.0), rtol=1e-12)
        assert np.allclose(exp.outputs[0], (1.0, 12.0, 18.0), rtol=1e-12)
        assert np.allclose(exp.outputs[1], (1.0, -10.0, 35.0), rtol=1e-12)
        assert discriminant(exp) == 13489.0

    def test_quadratic_expansion_at_isolated_point(self, exact_family):
        exp = quadratic_expansion(exact_family, (math.pi, 0.0))
        assert np.allclose(exp.jdet, (-11.0, 17.0, -300.0), atol=1e-9)
        assert np.allclose(exp.outputs[0], (1.0, -12.0, -18.0), atol=1e-9)
        assert np.allclose(exp.outputs[1], (1.0, 10.0, -35.0), atol=1e-9)

    def test_quadratic_expansion_rejects_rank_one_points(self, offset_family,
                                                         offset_specials):
        cusp = offset_specials[0].location
        with pytest.raises(PreconditionViolated):
            quadratic_expansion(offset_family, cusp)

    def test_image_values(self, exact_specials):
        node, isolated = exact_specials
        assert abs(node.image.u - 9.0) < 1e-9 and abs(node.image.v - 4.0) < 1e-9
        assert abs(isolated.image.u - 81.0) < 1e-6
        assert abs(isolated.image.v - 144.0) < 1e-6


class TestOffsetManipulator:
    PAPER_CUSPS = [(-0.0023, 2.9069), (2.6492, -2.2190),
                   (-2.7368, -1.2968), (3.0855, 2.6935)]

    def test_four_cusps_at_reference_coordinates(self, offset_specials):
        assert len(offset_specials) == 4
        assert all(p.kind == PointKind.CUSP for p in offset_specials)
        for ref in self.PAPER_CUSPS:
            best = min(periodic_dist(p.location, ref) for p in offset_specials)
            assert best < 1e-3

    def test_classification_stable_under_grid_doubling(self, offset_family,
                                                       offset_specials):
        halved = find_special_points(offset_family, PAPER_BOX, grid=32)
        assert len(halved) == len(offset_specials)
        for a, b in zip(halved, offset_specials):
            assert a.kind == b.kind
            assert periodic_dist(a.location, b.location) < 1e-8


class TestNormalForms:
    def test_complex_square_cusps_on_circle(self, square_family):
        points = find_special_points(square_family, NORMAL_BOX)
        assert len(points) == 3
        assert all(p.kind == PointKind.CUSP for p in points)
        for p in points:
            assert abs(math.hypot(*p.location) - 2.0) < 1e-8
        expected = complex_square_cusp_locations(1.0, -1.0)
        found = sorted((p.location.phi, p.location.y) for p in points)
        assert np.allclose(found, expected, atol=1e-8)

    def test_quarto_single_cusp_on_hyperbola(self, quarto_family):
        points = find_special_points(quarto_family, NORMAL_BOX)
        assert len(points) == 1
        assert points[0].kind == PointKind.CUSP
        x, y = points[0].location
        assert abs(x * y - 1.0) < 1e-8
        assert np.allclose((x, y), quarto_cusp_location(1.0, 1.0), atol=1e-8)

    def test_quarto_cusp_classified_directly(self, quarto_family):
        assert classify_point(quarto_family, (1.0, 1.0)).kind == PointKind.CUSP

    def test_degenerate_unfoldings_are_corank2(self):
        square0 = make_family("complex_square_unfolded", a=0.0, b=0.0)
        point = classify_point(square0, (0.0, 0.0))
        assert point.kind == PointKind.CORANK2_ELLIPTIC and point.delta < 0
        quarto0 = make_family("quarto_unfolded", a=0.0, b=0.0)
        point = classify_point(quarto0, (0.0, 0.0))
        assert point.kind == PointKind.CORANK2_HYPERBOLIC and point.delta > 0

    @pytest.mark.parametrize("seed", range(5))
    def test_random_complex_square_cusp_circle(self, seed):
        rng = np.random.default_rng(100 + seed)
        a, b = rng.uniform(-2.0, 2.0, 2)
        while abs(a - b) < 0.1:
            a, b = rng.uniform(-2.0, 2.0, 2)
        fam = make_family("complex_square_unfolded", a=a, b=b)
        points = find_special_points(fam, ((-9.0, 9.0), (-9.0, 9.0)))
        assert len(points) == 3
        center, radius = (-a - b, 0.0), abs(a - b)
        for p in points:
            assert p.kind == PointKind.CUSP
            dist = math.hypot(p.location.phi - center[0], p.location.y - center[1])
            assert abs(dist - radius) < 1e-8

    @pytest.mark.parametrize("seed", range(5))
    def test_random_quarto_cusp_hyperbola(self, seed):
        rng = np.random.default_rng(200 + seed)
        a, b = rng.uniform(-2.0, 2.0, 2)
        while abs(a * b) < 0.05:
            a, b = rng.uniform(-2.0, 2.0, 2)
        fam = make_family("quarto_unfolded", a=a, b=b)
        points = find_special_points(fam, ((-9.0, 9.0), (-9.0, 9.0)))
        assert len(points) == 1
        p = points[0]
        assert p.kind == PointKind.CUSP
        assert abs(p.location.phi * p.location.y - a * b) < 1e-8


class TestClassifyEdgeCases:
    def test_rejects_points_off_the_singular_set(self, exact_family):
        with pytest.raises(PreconditionViolated):
            classify_point(exact_family, (0.5, 0.5))

    def test_plain_fold_is_fold_only(self, exact_family):
        # A point on {J = 0} away from the special points: solve the
        # quadratic in y at phi = 0.8.
        phi = 0.8
        s, c = math.sin(phi), math.cos(phi)
        kbb, kab, kprod = 11.0, -17.0, 300.0
        disc = (kab * s) ** 2 + 4.0 * kbb * c * kprod * s * s
        y = (-kab * s + math.sqrt(disc)) / (2.0 * kbb * c)
        assert abs(float(exact_family.jdet(phi, y))) < 1e-9
        point = classify_point(exact_family, (phi, y))
        assert point.kind == PointKind.FOLD_ONLY

    def test_classification_invariant_under_determinant_negation(
            self, exact_family, offset_family, square_family):
        for fam, box in ((exact_family, PAPER_BOX), (offset_family, PAPER_BOX),
                         (square_family, NORMAL_BOX)):
            original = find_special_points(fam, box)
            flipped = find_special_points(SwappedOutputs(fam), box)
            assert [p.kind for p in original] == [p.kind for p in flipped]
            for a, b in zip(original, flipped):
                assert periodic_dist(a.location, b.location) < 1e-8
                if not math.isnan(a.delta):
                    assert abs(a.delta - b.delta) < 1e-6 * max(1.0, abs(a.delta))

    def test_box_validation(self, exact_family):
        with pytest.raises(ValueError):
            find_special_points(exact_family, ((0.0, 0.0), (-1.0, 1.0)))
        with pytest.raises(ValueError):
            find_special_points(exact_family, PAPER_BOX, grid=8)
