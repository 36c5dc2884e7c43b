"""Direct kinematic problem: all real workspace solutions for a joint target.

The solver is dense multistart Newton: every node of a seed lattice over the
workspace box is iterated on f(q) = target with the analytic Jacobian, then
converged seeds are deduplicated (angle modulo 2*pi for the periodic
families).  Iterations continue well past the acceptance tolerance so that
seeds attracted to a multiple root collapse into a single tight cluster
instead of a loose ring.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoxTooSmall
from .maps import (
    JointPoint,
    MapFamily,
    WorkspacePoint,
    canonical_phi,
    coord_deltas,
    reference_scales,
)

log = logging.getLogger(__name__)

DEDUP_RADIUS = 1e-5
SINGULAR_FLAG_FACTOR = 1e-6


@dataclass(frozen=True)
class DkpSolutionSet:
    """All isolated real solutions of f(q) = target found in the box."""

    target: JointPoint
    solutions: list[WorkspacePoint]
    residuals: list[float]
    multiplicity_flags: list[bool]

    def __len__(self):
        return len(self.solutions)


@dataclass(frozen=True)
class CountMap:
    """Per-cell solution counts over a joint-space rectangle.

    ``counts[i, j]`` is the count at the center of cell (i, j); -1 marks a
    cell whose solve failed.
    """

    bounds: tuple[tuple[float, float], tuple[float, float]]
    resolution: tuple[int, int]
    counts: np.ndarray = field(repr=False)

    def cell_centers(self):
        (u0, u1), (v0, v1) = self.bounds
        nu, nv = self.resolution
        us = u0 + (np.arange(nu) + 0.5) * (u1 - u0) / nu
        vs = v0 + (np.arange(nv) + 0.5) * (v1 - v0) / nv
        return us, vs


def _newton_batch(family: MapFamily, seeds, target, *, max_iter=60, step_cap=2.0):
    """Vectorized Newton on f(q) = target from all seeds simultaneously."""
    q = np.array(seeds, dtype=float)
    tu, tv = float(target[0]), float(target[1])
    active = np.ones(len(q), dtype=bool)
    target_scale = 1.0 + max(abs(tu), abs(tv))
    for _ in range(max_iter):
        qa = q[active]
        if qa.size == 0:
            break
        u, v = family.evaluate(qa[:, 0], qa[:, 1])
        r0 = u - tu
        r1 = v - tv
        jac = family.jacobian(qa[:, 0], qa[:, 1])
        det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
        det = np.where(np.abs(det) < 1e-300, np.where(det < 0, -1e-300, 1e-300), det)
        d0 = -(jac[:, 1, 1] * r0 - jac[:, 0, 1] * r1) / det
        d1 = -(-jac[:, 1, 0] * r0 + jac[:, 0, 0] * r1) / det
        norms = np.hypot(d0, d1)
        over = norms > step_cap
        if np.any(over):
            scale = step_cap / norms[over]
            d0[over] *= scale
            d1[over] *= scale
        qa[:, 0] += d0
        qa[:, 1] += d1
        q[active] = qa
        resid = np.maximum(np.abs(r0), np.abs(r1))
        still = (norms > 1e-14) & (resid > 1e-14 * target_scale)
        still &= np.all(np.isfinite(qa), axis=1)
        idx = np.flatnonzero(active)
        active[idx[~still]] = False
        if not np.any(active):
            break
    u, v = family.evaluate(q[:, 0], q[:, 1])
    resid = np.maximum(np.abs(u - tu), np.abs(v - tv))
    return q, resid


def solve_dkp(
    family: MapFamily,
    target,
    *,
    box=None,
    seed_grid: int = 64,
    tol: float = 1e-9,
) -> DkpSolutionSet:
    """Find all real workspace solutions of f(q) = target inside the box.

    The box defaults to the family's canonical workspace box (angle window
    [-pi/2, 3*pi/2) and |y| up to the reach bound for the manipulators).
    Raises :class:`BoxTooSmall` when a converged solution lies outside the
    box, reporting the escaping points.
    """
    target = JointPoint(float(target[0]), float(target[1]))
    if not (math.isfinite(target.u) and math.isfinite(target.v)):
        raise ValueError("target must be finite")
    if box is None:
        box = family.default_box()
    (x0, x1), (y0, y1) = box

    xs = x0 + (np.arange(seed_grid) + 0.5) * (x1 - x0) / seed_grid
    ys = y0 + (np.arange(seed_grid) + 0.5) * (y1 - y0) / seed_grid
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    seeds = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    cap = 0.5 * math.hypot(x1 - x0, y1 - y0)

    q, resid = _newton_batch(family, seeds, target, step_cap=cap)
    target_scale = 1.0 + max(abs(target.u), abs(target.v))
    ok = resid < tol * target_scale
    q = q[ok]
    resid = resid[ok]
    if q.size == 0:
        return DkpSolutionSet(target, [], [], [])

    if family.periodic:
        q[:, 0] = canonical_phi(q[:, 0])
        margin = 1e-9 * max(1.0, abs(y1 - y0))
        escaped = (q[:, 1] < y0 - margin) | (q[:, 1] > y1 + margin)
        full_circle = (x1 - x0) >= 2.0 * math.pi - 1e-9
        if not full_circle:
            escaped |= (q[:, 0] < x0 - margin) | (q[:, 0] > x1 + margin)
    else:
        margin = 1e-9 * max(1.0, abs(x1 - x0), abs(y1 - y0))
        escaped = ((q[:, 0] < x0 - margin) | (q[:, 0] > x1 + margin)
                   | (q[:, 1] < y0 - margin) | (q[:, 1] > y1 + margin))
    if np.any(escaped):
        pts = sorted({(round(p[0], 9), round(p[1], 9)) for p in q[escaped]})
        raise BoxTooSmall(
            f"{len(pts)} solution(s) of target {tuple(target)} escaped the box",
            escaped=[WorkspacePoint(*p) for p in pts])

    # Converged seeds pile up machine-close on each solution; collapse them
    # on a half-radius lattice first (keeping the best residual per cell),
    # then run the exact periodic-metric dedup on the few representatives.
    by_resid = np.argsort(resid, kind="stable")
    q = q[by_resid]
    resid = resid[by_resid]
    lattice = np.round(q / (0.5 * DEDUP_RADIUS)).astype(np.int64)
    _, first = np.unique(lattice, axis=0, return_index=True)
    q = q[np.sort(first)]
    resid = resid[np.sort(first)]
    order = np.lexsort((resid, q[:, 1], q[:, 0]))
    q = q[order]
    resid = resid[order]
    kept: list[int] = []
    for i in range(len(q)):
        dup = False
        for j in kept:
            delta = coord_deltas(family, q[i][None, :], q[j])[0]
            if float(np.max(np.abs(delta))) < DEDUP_RADIUS:
                dup = True
                break
        if not dup:
            kept.append(i)

    scales = reference_scales(family, box)
    solutions, residuals, flags = [], [], []
    for i in kept:
        phi, y = float(q[i, 0]), float(q[i, 1])
        jdet = abs(float(family.jdet(phi, y)))
        flags.append(jdet < SINGULAR_FLAG_FACTOR * max(1.0, scales.jdet))
        solutions.append(WorkspacePoint(phi, y))
        residuals.append(float(resid[i]))
    return DkpSolutionSet(target, solutions, residuals, flags)


def count_map(
    family: MapFamily,
    bounds,
    resolution,
    *,
    box=None,
    seed_grid: int = 64,
    tol: float = 1e-9,
) -> CountMap:
    """Solution counts at the cell centers of a joint-space grid.

    Failed cells (escaping solutions, non-finite targets) are recorded as -1
    rather than aborting the sweep.
    """
    if isinstance(resolution, int):
        resolution = (resolution, resolution)
    nu, nv = resolution
    if nu < 8 or nv < 8:
        raise ValueError("resolution must be at least 8 per axis")
    (u0, u1), (v0, v1) = bounds
    counts = np.zeros((nu, nv), dtype=int)
    us = u0 + (np.arange(nu) + 0.5) * (u1 - u0) / nu
    vs = v0 + (np.arange(nv) + 0.5) * (v1 - v0) / nv
    for i, u in enumerate(us):
        for j, v in enumerate(vs):
            try:
                counts[i, j] = len(
                    solve_dkp(family, (u, v), box=box, seed_grid=seed_grid, tol=tol))
            except BoxTooSmall as exc:
                log.debug("cell (%d, %d): %s", i, j, exc)
                counts[i, j] = -1
    return CountMap(((float(u0), float(u1)), (float(v0), float(v1))), (nu, nv), counts)
