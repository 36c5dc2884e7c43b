"""Location and classification of special points of the singularity set.

Special points are the solutions of the overdetermined detection system

    J = 0,   Jac . (-J_y, J_phi)^T = (0, 0)

whose three residual components vanish exactly at cusps and at corank-2
points.  The vector (-J_y, J_phi) is the tangent of the fold curve {J = 0},
so the extra equations say that this tangent lies in the kernel of the
Jacobian (or that the fold curve itself is singular).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import PreconditionViolated
from .maps import (
    JointPoint,
    MapFamily,
    WorkspacePoint,
    canonical_phi,
    coord_deltas,
    eval_map,
    reference_scales,
)

log = logging.getLogger(__name__)

RANK_RATIO_THRESHOLD = 1e-7      # sigma2 / sigma1 below this -> rank <= 1
RANK_ZERO_FACTOR = 1e-7          # sigma1 below this * jac scale -> rank 0
DELTA_DEGENERATE_FACTOR = 1e-8   # |Delta| below this * coeff scale^2 -> degenerate
CUSP_TEST_STEP = 1e-4
CUSP_TEST_REL_THRESHOLD = 1e-6
FULL_CIRCLE = 2.0 * math.pi - 1e-9


class PointKind(enum.Enum):
    CUSP = "cusp"
    CORANK2_ELLIPTIC = "corank2_elliptic"
    CORANK2_HYPERBOLIC = "corank2_hyperbolic"
    FOLD_ONLY = "fold_only"
    DEGENERATE = "degenerate"


DISPLAY_NAMES = {
    PointKind.CUSP: "Cusp",
    PointKind.CORANK2_ELLIPTIC: "Corank2Elliptic",
    PointKind.CORANK2_HYPERBOLIC: "Corank2Hyperbolic",
    PointKind.FOLD_ONLY: "FoldOnly",
    PointKind.DEGENERATE: "Degenerate",
}


class DetectionResidual(NamedTuple):
    """Residual of the detection system: determinant and kernel alignment."""

    j: float
    k1: float
    k2: float


@dataclass(frozen=True)
class SpecialPoint:
    """A located singularity with classification and diagnostics.

    ``delta`` is the discriminant of the quadratic part of the determinant,
    meaningful only for the corank-2 kinds (NaN otherwise).  ``residual`` is
    the max-norm of the detection system at the reported location.
    """

    location: WorkspacePoint
    image: JointPoint
    kind: PointKind
    delta: float
    residual: float


@dataclass(frozen=True)
class QuadraticExpansion:
    """Second-order Taylor data at a corank-2 point, in centered coordinates.

    Coefficient triples are (c_yy, c_yphi, c_phiphi) for the form
    c_yy*y^2 + c_yphi*y*phi + c_phiphi*phi^2.  ``outputs`` holds the forms of
    the two map components shifted by their value at the point.
    """

    jdet: tuple[float, float, float]
    outputs: tuple[tuple[float, float, float], tuple[float, float, float]]


def _detection_batch(family: MapFamily, pts):
    """Residual 3-vectors and their analytic Jacobians at (n, 2) points."""
    phi = pts[..., 0]
    y = pts[..., 1]
    j = family.jdet(phi, y)
    jphi, jy = family.jdet_grad(phi, y)
    jpp, jpy, jyy = family.jdet_hess(phi, y)
    jac = family.jacobian(phi, y)
    hess = family.hessian(phi, y)

    t = np.stack([-jy, jphi], axis=-1)
    k = np.einsum("...ij,...j->...i", jac, t)
    r = np.concatenate([j[..., None], k], axis=-1)

    # d k / d x = hess . t + jac . R . (hess of J), with R the quarter turn.
    dt = np.empty(pts.shape[:-1] + (2, 2))
    dt[..., 0, 0] = -jpy
    dt[..., 0, 1] = -jyy
    dt[..., 1, 0] = jpp
    dt[..., 1, 1] = jpy
    dk = np.einsum("...ijl,...j->...il", hess, t) + np.einsum("...ij,...jl->...il", jac, dt)

    a = np.empty(pts.shape[:-1] + (3, 2))
    a[..., 0, 0] = jphi
    a[..., 0, 1] = jy
    a[..., 1:, :] = dk
    return r, a


def detection_system(family: MapFamily, q) -> DetectionResidual:
    """Evaluate the cusp/higher-order detection system at one point."""
    r, _ = _detection_batch(family, np.asarray([q[0], q[1]], dtype=float))
    return DetectionResidual(float(r[0]), float(r[1]), float(r[2]))


def _gauss_newton(family: MapFamily, seeds, tol, max_iter=80, step_cap=None):
    """Damped Gauss-Newton on the 3-equation detection system, vectorized."""
    q = np.array(seeds, dtype=float)
    if step_cap is None:
        step_cap = 1.0
    active = np.ones(len(q), dtype=bool)
    for _ in range(max_iter):
        r, a = _detection_batch(family, q[active])
        m = np.einsum("nij,nil->njl", a, a)
        g = np.einsum("nij,ni->nj", a, r)
        det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        dq = np.empty_like(g)
        dq[:, 0] = -(m[:, 1, 1] * g[:, 0] - m[:, 0, 1] * g[:, 1]) / det
        dq[:, 1] = -(-m[:, 1, 0] * g[:, 0] + m[:, 0, 0] * g[:, 1]) / det
        norms = np.linalg.norm(dq, axis=1)
        over = norms > step_cap
        if np.any(over):
            dq[over] *= (step_cap / norms[over])[:, None]
        q[active] += dq
        still = (norms > 1e-15) & np.all(np.isfinite(q[active]), axis=1)
        idx = np.flatnonzero(active)
        active[idx[~still]] = False
        if not np.any(active):
            break
    r, _ = _detection_batch(family, q)
    res = np.max(np.abs(r), axis=-1)
    return q, res


def _polish_corank2(family: MapFamily, q, jac_scale):
    """Newton on grad J = 0; corank-2 points are regular zeros of the gradient."""
    q = np.array(q, dtype=float)
    for _ in range(40):
        gphi, gy = family.jdet_grad(q[0], q[1])
        jpp, jpy, jyy = family.jdet_hess(q[0], q[1])
        det = jpp * jyy - jpy * jpy
        if abs(det) < 1e-300:
            break
        dq = np.array([(jyy * gphi - jpy * gy) / det, (-jpy * gphi + jpp * gy) / det])
        q -= dq
        if np.linalg.norm(dq) < 1e-15:
            break
    return q


def _svd2(jac):
    u, sing, vt = np.linalg.svd(jac)
    return u, sing, vt


def _project_onto_curve(family: MapFamily, q, jtol):
    """Pull a nearby point back onto {J = 0} along the determinant gradient."""
    q = np.array(q, dtype=float)
    for _ in range(12):
        j = float(family.jdet(q[0], q[1]))
        if abs(j) <= jtol:
            return q
        gphi, gy = family.jdet_grad(q[0], q[1])
        g2 = gphi * gphi + gy * gy
        if g2 < 1e-300:
            return q
        q -= j / g2 * np.array([gphi, gy])
    return q


def _cusp_nondegenerate(family: MapFamily, q, jac, scales):
    """Whitney test: the kernel-alignment function k = Jac . (-J_y, J_phi)
    must change at first order along the fold curve through the point.

    Along the curve, k stays inside the 1-d image of the rank-1 Jacobian, so
    the alignment is measured on the unit image direction (the orthogonal
    component vanishes identically and carries no signal).
    """
    gphi, gy = (float(v) for v in family.jdet_grad(q[0], q[1]))
    gnorm = math.hypot(gphi, gy)
    if gnorm < 1e-12 * max(1.0, scales.jdet):
        return False
    tangent = np.array([-gy, gphi]) / gnorm
    u, sing, _ = _svd2(jac)
    image_dir = u[:, 0]
    h = CUSP_TEST_STEP
    jtol = 1e-12 * max(1.0, scales.jdet)

    def alignment(p):
        r, _ = _detection_batch(family, p)
        return float(image_dir @ r[1:])

    plus = _project_onto_curve(family, q + h * tangent, jtol)
    minus = _project_onto_curve(family, q - h * tangent, jtol)
    derivative = (alignment(plus) - alignment(minus)) / (2.0 * h)
    local_scale = max(float(sing[0]) * gnorm, 1e-12)
    return abs(derivative) > CUSP_TEST_REL_THRESHOLD * local_scale


def quadratic_expansion(family: MapFamily, q) -> QuadraticExpansion:
    """Order-2 Taylor coefficients of the determinant and the map outputs
    at a corank-2 point, in displacement coordinates centered at the point."""
    q = np.asarray([q[0], q[1]], dtype=float)
    jac = np.asarray(family.jacobian(q[0], q[1]), float)
    scales = reference_scales(family)
    sing = np.linalg.svd(jac, compute_uv=False)
    if sing[0] > 1e-5 * scales.jac_entry:
        raise PreconditionViolated(
            f"quadratic expansion requires a corank-2 point; |Jac| = {sing[0]:.3e}")
    jpp, jpy, jyy = (float(v) for v in family.jdet_hess(q[0], q[1]))
    hess = np.asarray(family.hessian(q[0], q[1]), float)
    outputs = tuple(
        (hess[i, 1, 1] / 2.0, hess[i, 0, 1], hess[i, 0, 0] / 2.0) for i in range(2)
    )
    return QuadraticExpansion(jdet=(jyy / 2.0, jpy, jpp / 2.0), outputs=outputs)


def discriminant(expansion: QuadraticExpansion) -> float:
    cyy, cyphi, cphiphi = expansion.jdet
    return cyphi * cyphi - 4.0 * cyy * cphiphi


def classify_point(family: MapFamily, q, tol: float = 1e-8) -> SpecialPoint:
    """Classify a point of the singularity set.

    The point must satisfy J = 0 within tolerance (PreconditionViolated
    otherwise).  Rank-1 points are cusps when the Whitney nondegeneracy test
    passes and the full detection residual is small; rank-1 points with a
    large kernel-alignment residual are plain folds.  Rank-0 points are
    classified by the sign of the discriminant of the determinant's
    quadratic part.
    """
    q = np.asarray([q[0], q[1]], dtype=float)
    scales = reference_scales(family)
    r, _ = _detection_batch(family, q)
    j_res = abs(float(r[0]))
    k_res = float(np.max(np.abs(r[1:])))
    jtol = tol * max(1.0, scales.jdet)
    if j_res > jtol:
        raise PreconditionViolated(
            f"point is not on the singularity set: |J| = {j_res:.3e} > {jtol:.3e}")

    residual = float(np.max(np.abs(r)))
    jac = np.asarray(family.jacobian(q[0], q[1]), float)
    sing = np.linalg.svd(jac, compute_uv=False)
    location = WorkspacePoint(
        float(canonical_phi(q[0])) if family.periodic else float(q[0]), float(q[1]))
    image = eval_map(family, q)

    if sing[0] < RANK_ZERO_FACTOR * scales.jac_entry:
        expansion = quadratic_expansion(family, q)
        delta = discriminant(expansion)
        coeff_scale = max(abs(c) for c in expansion.jdet)
        if abs(delta) < DELTA_DEGENERATE_FACTOR * coeff_scale**2:
            kind = PointKind.DEGENERATE
        elif delta > 0.0:
            kind = PointKind.CORANK2_HYPERBOLIC
        else:
            kind = PointKind.CORANK2_ELLIPTIC
        return SpecialPoint(location, image, kind, float(delta), residual)

    ktol = tol * max(1.0, scales.jac_entry * scales.jdet)
    ratio = sing[1] / max(sing[0], 1e-300)
    if k_res > ktol or ratio >= RANK_RATIO_THRESHOLD:
        return SpecialPoint(location, image, PointKind.FOLD_ONLY, float("nan"), residual)
    if _cusp_nondegenerate(family, q, jac, scales):
        kind = PointKind.CUSP
    else:
        kind = PointKind.DEGENERATE
    return SpecialPoint(location, image, kind, float("nan"), residual)


def find_special_points(
    family: MapFamily,
    box=None,
    grid: int = 64,
    tol: float = 1e-10,
) -> list[SpecialPoint]:
    """Find all special points in a workspace box by multistart Gauss-Newton.

    Seeds are the nodes of a ``grid`` x ``grid`` lattice over the box; every
    converged candidate with detection residual below ``tol`` is kept,
    deduplicated at radius 1e-6 times the box diagonal (angle compared
    modulo 2*pi for the periodic families), and classified.
    """
    if box is None:
        box = family.default_box()
    (x0, x1), (y0, y1) = box
    if not (x1 > x0 and y1 > y0):
        raise ValueError("box must be non-degenerate")
    if grid < 16:
        raise ValueError("grid must be at least 16 per axis")

    xs = np.linspace(x0, x1, grid)
    ys = np.linspace(y0, y1, grid)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    seeds = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    diag = math.hypot(x1 - x0, y1 - y0)

    converged, residuals = _gauss_newton(family, seeds, tol, step_cap=diag / 8.0)
    ok = residuals < tol
    diverged = ~np.all(np.isfinite(converged), axis=1)
    n_stagnant = int(np.sum(~ok & ~diverged))
    if np.any(diverged):
        log.debug("NonConvergence on %d of %d seeds", int(np.sum(diverged)),
                  len(seeds))
    if n_stagnant:
        log.debug("ToleranceNotMet on %d of %d seeds", n_stagnant, len(seeds))
    ok &= ~diverged
    candidates = converged[ok]
    if candidates.size == 0:
        return []

    # Keep only candidates inside the search box (angle folded for periodic
    # families so a wrap-around hit still counts as inside).
    if family.periodic:
        candidates[:, 0] = canonical_phi(candidates[:, 0])
        inside = (candidates[:, 1] >= y0 - 1e-9) & (candidates[:, 1] <= y1 + 1e-9)
        if (x1 - x0) < FULL_CIRCLE:
            inside &= (candidates[:, 0] >= x0 - 1e-9) & (candidates[:, 0] <= x1 + 1e-9)
    else:
        inside = np.all(
            (candidates >= [x0 - 1e-9, y0 - 1e-9]) & (candidates <= [x1 + 1e-9, y1 + 1e-9]),
            axis=1)
    candidates = candidates[inside]
    if candidates.size == 0:
        return []

    order = np.lexsort((candidates[:, 1], candidates[:, 0]))
    candidates = candidates[order]
    radius = 1e-6 * diag
    kept: list[np.ndarray] = []
    for cand in candidates:
        if kept:
            deltas = coord_deltas(family, np.array(kept), cand)
            if float(np.min(np.linalg.norm(deltas, axis=1))) < radius:
                continue
        kept.append(cand)

    scales = reference_scales(family, box)
    points = []
    for q in kept:
        jac = np.asarray(family.jacobian(q[0], q[1]), float)
        sing = np.linalg.svd(jac, compute_uv=False)
        if sing[0] < 1e-3 * scales.jac_entry:
            q = _polish_corank2(family, q, scales.jac_entry)
        points.append(classify_point(family, q, tol=max(tol * 100.0, 1e-9)))
    points.sort(key=lambda p: (p.location.phi, p.location.y))

    # Polishing corank-2 candidates can merge duplicates; dedup once more.
    final: list[SpecialPoint] = []
    for pt in points:
        loc = np.array([pt.location.phi, pt.location.y])
        dup = False
        for prev in final:
            ref = np.array([prev.location.phi, prev.location.y])
            if float(np.linalg.norm(coord_deltas(family, loc[None, :], ref)[0])) < radius:
                dup = True
                break
        if not dup:
            final.append(pt)
    return final
