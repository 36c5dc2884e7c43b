"""Catalog of planar map families with closed-form first and second derivatives.

Each family is a smooth map from workspace coordinates (phi, y) -- or (x, y)
for the normal forms -- to joint coordinates (u, v).  All evaluation methods
accept scalars or broadcastable numpy arrays and return float64 arrays of the
broadcast shape, so solvers can run vectorized over seed grids.

The determinant of every family's Jacobian carries a common factor 4 from the
squared-length / quadratic formulas; ``jdet`` and friends return the
determinant divided by 4 (``DET_NORMALIZATION``).  Only zero sets and sign
patterns of the determinant matter downstream, and the constant is the same
at every point of a family, so signs are globally consistent.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi
PHI_WINDOW = (-0.5 * math.pi, 1.5 * math.pi)

#: Every family's raw Jacobian determinant equals DET_NORMALIZATION * jdet().
DET_NORMALIZATION = 4.0


class WorkspacePoint(NamedTuple):
    """Workspace coordinates: platform angle (rad) and height, or (x, y)."""

    phi: float
    y: float


class JointPoint(NamedTuple):
    """Joint coordinates: squared leg lengths for manipulators, (u, v) else."""

    u: float
    v: float


@dataclass(frozen=True)
class Jet2:
    """Value, Jacobian and symmetric second-derivative tensor at a point.

    ``jac[i, j]`` is d(output i)/d(input j); ``hess[i, j, k]`` is the second
    partial of output i with respect to inputs j and k (symmetric in j, k).
    Input order is (phi, y) resp. (x, y).
    """

    value: JointPoint
    jac: np.ndarray
    hess: np.ndarray


def canonical_phi(phi):
    """Reduce an angle into the reporting window [-pi/2, 3*pi/2)."""
    return np.mod(np.asarray(phi, dtype=float) + 0.5 * math.pi, TWO_PI) - 0.5 * math.pi


def wrap_delta(dphi):
    """Wrap an angle difference into [-pi, pi)."""
    return np.mod(np.asarray(dphi, dtype=float) + math.pi, TWO_PI) - math.pi


def _reduce_angle(phi):
    # fmod is exact, so evaluation is exactly periodic at the float level
    # (the correction to [0, 2*pi) keeps one representative per residue).
    r = np.fmod(np.asarray(phi, dtype=float), TWO_PI)
    return np.where(r < 0.0, r + TWO_PI, r)


def _pack22(a00, a01, a10, a11):
    a00, a01, a10, a11 = np.broadcast_arrays(a00, a01, a10, a11)
    row0 = np.stack([a00, a01], axis=-1)
    row1 = np.stack([a10, a11], axis=-1)
    return np.stack([row0, row1], axis=-2).astype(float)


def _pack222(h0, h1):
    return np.stack([h0, h1], axis=-3)


def _sym22(aa, ab, bb):
    return _pack22(aa, ab, ab, bb)


@dataclass(frozen=True)
class Rpr2PrExact:
    """Planar 2RPR-PR manipulator with the moving joint on the anchor line.

    Base anchors sit at (a1, 0) and (-a2, 0); the platform anchors sit on the
    platform axis at signed offsets +b1 and -b2 from the joint, which slides
    on the vertical axis at height y while the platform turns by phi.  The
    outputs are the squared leg lengths.
    """

    a1: float
    a2: float
    b1: float
    b2: float

    kind = "rpr2pr_exact"
    periodic = True
    input_names = ("phi", "y")
    output_names = ("l1_sq", "l2_sq")

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def reach(self):
        return self.a1 + self.a2 + self.b1 + self.b2

    def default_box(self):
        return (PHI_WINDOW, (-self.reach, self.reach))

    def evaluate(self, phi, y):
        s, c = np.sin(_reduce_angle(phi)), np.cos(_reduce_angle(phi))
        y = np.asarray(y, dtype=float)
        u = y * y + 2.0 * self.b1 * y * s + self.a1**2 + self.b1**2 - 2.0 * self.a1 * self.b1 * c
        v = y * y - 2.0 * self.b2 * y * s + self.a2**2 + self.b2**2 - 2.0 * self.a2 * self.b2 * c
        return u, v

    def jacobian(self, phi, y):
        s, c = np.sin(_reduce_angle(phi)), np.cos(_reduce_angle(phi))
        y = np.asarray(y, dtype=float)
        return _pack22(
            2.0 * (self.b1 * y * c + self.a1 * self.b1 * s),
            2.0 * (y + self.b1 * s),
            2.0 * (-self.b2 * y * c + self.a2 * self.b2 * s),
            2.0 * (y - self.b2 * s),
        )

    def hessian(self, phi, y):
        s, c = np.sin(_reduce_angle(phi)), np.cos(_reduce_angle(phi))
        y = np.asarray(y, dtype=float)
        two = np.full(np.broadcast_shapes(s.shape, y.shape), 2.0)
        h0 = _sym22(-2.0 * self.b1 * y * s + 2.0 * self.a1 * self.b1 * c, 2.0 * self.b1 * c, two)
        h1 = _sym22(2.0 * self.b2 * y * s + 2.0 * self.a2 * self.b2 * c, -2.0 * self.b2 * c, two)
        return _pack222(h0, h1)

    def jdet(self, phi, y):
        s, c = np.sin(_reduce_angle(phi)), np.cos(_reduce_angle(phi))
        y = np.asarray(y, dtype=float)
        kbb = self.b1 + self.b2
        kab = self.a1 * self.b1 - self.a2 * self.b2
        ka = self.a1 + self.a2
        return kbb * c * y * y + kab * s * y - ka * self.b1 * self.b2 * s * s

    def jdet_grad(self, phi, y):
        s, c = np.sin(_reduce_angle(phi)), np.cos(_reduce_angle(phi))
        y = np.asarray(y, dtype=float)
        kbb = self.b1 + self.b2
        kab = self.a1 * self.b1 - self.a2 * self.b2
        ka = self.a1 + self.a2
        jphi = -kbb * s * y * y + kab * c * y - 2.0 * ka * self.b1 * self.b2 * s * c
        jy = 2.0 * kbb * c * y + kab * s
        return jphi, jy

    def jdet_hess(self, phi, y):
        s, c = np.sin(_reduce_angle(phi)), np.cos(_reduce_angle(phi))
        y = np.asarray(y, dtype=float)
        kbb = self.b1 + self.b2
        kab = self.a1 * self.b1 - self.a2 * self.b2
        ka = self.a1 + self.a2
        jpp = -kbb * c * y * y - kab * s * y - 2.0 * ka * self.b1 * self.b2 * (c * c - s * s)
        jpy = -2.0 * kbb * s * y + kab * c
        jyy = 2.0 * kbb * c * np.ones_like(y)
        return jpp, jpy, jyy


@dataclass(frozen=True)
class Rpr2PrOffset:
    """2RPR-PR manipulator whose moving joint is offset from the anchor line.

    Same geometry as :class:`Rpr2PrExact` except that the line through the
    platform anchors is displaced by d from the joint (measured along the
    platform normal).  d = 0 recovers the in-line manipulator exactly.
    """

    a1: float
    a2: float
    b1: float
    b2: float
    d: float

    kind = "rpr2pr_offset"
    periodic = True
    input_names = ("phi", "y")
    output_names = ("l1_sq", "l2_sq")

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.d >= 0.0:
            raise ValueError("d must be non-negative")

    @property
    def reach(self):
        return self.a1 + self.a2 + self.b1 + self.b2 + self.d

    def default_box(self):
        return (PHI_WINDOW, (-self.reach, self.reach))

    def _axes(self, phi):
        s, c = np.sin(_reduce_angle(phi)), np.cos(_reduce_angle(phi))
        p1 = self.b1 * s - self.d * c
        cap1 = self.b1 * c + self.d * s
        p2 = self.b2 * s + self.d * c
        cap2 = self.b2 * c - self.d * s
        return s, c, p1, cap1, p2, cap2

    def evaluate(self, phi, y):
        _, _, p1, cap1, p2, cap2 = self._axes(phi)
        y = np.asarray(y, dtype=float)
        k1 = self.a1**2 + self.b1**2 + self.d**2
        k2 = self.a2**2 + self.b2**2 + self.d**2
        u = y * y + 2.0 * y * p1 + k1 - 2.0 * self.a1 * cap1
        v = y * y - 2.0 * y * p2 + k2 - 2.0 * self.a2 * cap2
        return u, v

    def jacobian(self, phi, y):
        _, _, p1, cap1, p2, cap2 = self._axes(phi)
        y = np.asarray(y, dtype=float)
        return _pack22(
            2.0 * (y * cap1 + self.a1 * p1),
            2.0 * (y + p1),
            2.0 * (-y * cap2 + self.a2 * p2),
            2.0 * (y - p2),
        )

    def hessian(self, phi, y):
        _, _, p1, cap1, p2, cap2 = self._axes(phi)
        y = np.asarray(y, dtype=float)
        two = np.full(np.broadcast_shapes(p1.shape, y.shape), 2.0)
        h0 = _sym22(-2.0 * y * p1 + 2.0 * self.a1 * cap1, 2.0 * cap1, two)
        h1 = _sym22(2.0 * y * p2 + 2.0 * self.a2 * cap2, -2.0 * cap2, two)
        return _pack222(h0, h1)

    def jdet(self, phi, y):
        s, c, _, _, _, _ = self._axes(phi)
        y = np.asarray(y, dtype=float)
        kbb = self.b1 + self.b2
        kab = self.a1 * self.b1 - self.a2 * self.b2
        ka = self.a1 + self.a2
        d = self.d
        lin = kab * s - ka * d * c - kbb * d
        const = self.b1 * self.b2 * s * s + (self.b1 - self.b2) * d * s * c - d * d * c * c
        return kbb * c * y * y + lin * y - ka * const

    def jdet_grad(self, phi, y):
        s, c, _, _, _, _ = self._axes(phi)
        y = np.asarray(y, dtype=float)
        kbb = self.b1 + self.b2
        kab = self.a1 * self.b1 - self.a2 * self.b2
        ka = self.a1 + self.a2
        d = self.d
        c2s2 = c * c - s * s
        jphi = (-kbb * s * y * y + (kab * c + ka * d * s) * y
                - ka * (2.0 * self.b1 * self.b2 * s * c + (self.b1 - self.b2) * d * c2s2
                        + 2.0 * d * d * s * c))
        jy = 2.0 * kbb * c * y + kab * s - ka * d * c - kbb * d
        return jphi, jy

    def jdet_hess(self, phi, y):
        s, c, _, _, _, _ = self._axes(phi)
        y = np.asarray(y, dtype=float)
        kbb = self.b1 + self.b2
        kab = self.a1 * self.b1 - self.a2 * self.b2
        ka = self.a1 + self.a2
        d = self.d
        c2s2 = c * c - s * s
        jpp = (-kbb * c * y * y + (-kab * s + ka * d * c) * y
               - ka * (2.0 * self.b1 * self.b2 * c2s2 - 4.0 * (self.b1 - self.b2) * d * s * c
                       + 2.0 * d * d * c2s2))
        jpy = -2.0 * kbb * s * y + kab * c + ka * d * s
        jyy = 2.0 * kbb * c * np.ones_like(y)
        return jpp, jpy, jyy


@dataclass(frozen=True)
class ComplexSquareUnfolded:
    """Two-parameter unfolding of the complex square map z -> z*z.

    (x, y) -> (x^2 - y^2 + 4ax, 2xy + 4by).  At a = b = 0 the only singular
    point is the origin; for a != b the singular set is the circle of radius
    |a - b| centered at (-a - b, 0), carrying three cusps.
    """

    a: float
    b: float

    kind = "complex_square_unfolded"
    periodic = False
    input_names = ("x", "y")
    output_names = ("u", "v")

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("unfolding coefficients must be finite")

    def default_box(self):
        r = 3.0 * max(1.0, abs(self.a), abs(self.b))
        return ((-2.0 * r, 2.0 * r), (-2.0 * r, 2.0 * r))

    def evaluate(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return x * x - y * y + 4.0 * self.a * x, 2.0 * x * y + 4.0 * self.b * y

    def jacobian(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return _pack22(2.0 * x + 4.0 * self.a, -2.0 * y, 2.0 * y, 2.0 * x + 4.0 * self.b)

    def hessian(self, x, y):
        shape = np.broadcast_shapes(np.shape(x), np.shape(y))
        two = np.full(shape, 2.0)
        zero = np.zeros(shape)
        return _pack222(_sym22(two, zero, -two), _sym22(zero, two, zero))

    def jdet(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        w = x + self.a + self.b
        return w * w + y * y - (self.a - self.b) ** 2

    def jdet_grad(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return 2.0 * (x + self.a + self.b), 2.0 * y

    def jdet_hess(self, x, y):
        shape = np.broadcast_shapes(np.shape(x), np.shape(y))
        return np.full(shape, 2.0), np.zeros(shape), np.full(shape, 2.0)


@dataclass(frozen=True)
class QuartoUnfolded:
    """Two-parameter unfolding of the coordinate-squaring (quarto) map.

    (x, y) -> (x^2 + 2ay, y^2 + 2bx).  At a = b = 0 the singular set is the
    two axes; for ab != 0 it is the hyperbola xy = ab, carrying one cusp.
    """

    a: float
    b: float

    kind = "quarto_unfolded"
    periodic = False
    input_names = ("x", "y")
    output_names = ("u", "v")

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("unfolding coefficients must be finite")

    def default_box(self):
        r = 3.0 * max(1.0, abs(self.a), abs(self.b))
        return ((-2.0 * r, 2.0 * r), (-2.0 * r, 2.0 * r))

    def evaluate(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return x * x + 2.0 * self.a * y, y * y + 2.0 * self.b * x

    def jacobian(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape, y.shape)
        return _pack22(2.0 * x, np.full(shape, 2.0 * self.a), np.full(shape, 2.0 * self.b), 2.0 * y)

    def hessian(self, x, y):
        shape = np.broadcast_shapes(np.shape(x), np.shape(y))
        two = np.full(shape, 2.0)
        zero = np.zeros(shape)
        return _pack222(_sym22(two, zero, zero), _sym22(zero, zero, two))

    def jdet(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return x * y - self.a * self.b

    def jdet_grad(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return y * np.ones_like(x), x * np.ones_like(y)

    def jdet_hess(self, x, y):
        shape = np.broadcast_shapes(np.shape(x), np.shape(y))
        return np.zeros(shape), np.ones(shape), np.zeros(shape)


MapFamily = Rpr2PrExact | Rpr2PrOffset | ComplexSquareUnfolded | QuartoUnfolded

FAMILY_KINDS = {
    "rpr2pr_exact": Rpr2PrExact,
    "rpr2pr_offset": Rpr2PrOffset,
    "complex_square_unfolded": ComplexSquareUnfolded,
    "quarto_unfolded": QuartoUnfolded,
}


def make_family(kind: str, **params) -> MapFamily:
    """Construct a family by kind name; raises ValueError on unknown kinds."""
    try:
        cls = FAMILY_KINDS[kind]
    except KeyError:
        known = ", ".join(sorted(FAMILY_KINDS))
        raise ValueError(f"unknown family kind {kind!r} (known: {known})") from None
    return cls(**params)


def eval_map(family: MapFamily, q) -> JointPoint:
    """Evaluate the map at a workspace point."""
    u, v = family.evaluate(q[0], q[1])
    return JointPoint(float(u), float(v))


def eval_jet(family: MapFamily, q) -> Jet2:
    """Evaluate value, analytic Jacobian and Hessian tensor at a point."""
    u, v = family.evaluate(q[0], q[1])
    jac = family.jacobian(q[0], q[1])
    hess = family.hessian(q[0], q[1])
    return Jet2(JointPoint(float(u), float(v)), np.asarray(jac, float), np.asarray(hess, float))


def jacobian_det(family: MapFamily, q) -> float:
    """Normalized Jacobian determinant (raw determinant / DET_NORMALIZATION)."""
    return float(family.jdet(q[0], q[1]))


def jacobian_det_gradient(family: MapFamily, q) -> tuple[float, float]:
    """Exact gradient (d/dphi, d/dy) of the normalized determinant."""
    jphi, jy = family.jdet_grad(q[0], q[1])
    return float(jphi), float(jy)


def coord_deltas(family: MapFamily, pts, ref):
    """Coordinate differences pts - ref with the angle wrapped mod 2*pi.

    ``pts`` is (n, 2); ``ref`` broadcasts against it.
    """
    delta = np.asarray(pts, dtype=float) - np.asarray(ref, dtype=float)
    if family.periodic:
        delta = delta.copy()
        delta[..., 0] = wrap_delta(delta[..., 0])
    return delta


def point_distance(family: MapFamily, p, q, ord=2):
    """Distance between workspace points in the family's periodic metric."""
    delta = coord_deltas(family, np.asarray(p, float)[None, :], np.asarray(q, float))
    return float(np.linalg.norm(delta[0], ord=ord))


class FamilyScales(NamedTuple):
    """Magnitude scales sampled over a reference grid, for thresholding."""

    jac_entry: float
    jdet: float


@functools.lru_cache(maxsize=64)
def _scales_cached(family: MapFamily, box_key, n: int) -> FamilyScales:
    (x0, x1), (y0, y1) = box_key
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    jac = family.jacobian(gx, gy)
    jdet = family.jdet(gx, gy)
    return FamilyScales(
        jac_entry=max(float(np.median(np.abs(jac))), 1e-12),
        jdet=max(float(np.median(np.abs(jdet))), 1e-12),
    )


def reference_scales(family: MapFamily, box=None, n: int = 33) -> FamilyScales:
    """Median |Jacobian entry| and |determinant| over a grid on ``box``."""
    if box is None:
        box = family.default_box()
    box_key = ((float(box[0][0]), float(box[0][1])), (float(box[1][0]), float(box[1][1])))
    return _scales_cached(family, box_key, n)
