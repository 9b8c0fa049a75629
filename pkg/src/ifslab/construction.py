"""Planar contraction family with a verified cover and its attractor.

The family consists of one contracting similarity T fixing the origin
(scale kappa, rotation angle near 180 degrees, so every Jacobian has a
complex eigenvalue pair) together with translated conjugates S_y of T
anchored at equally spaced points on the circle |y| = (3/4) * delta.  The
module verifies two facts numerically instead of assuming them:

* cover: the images of V = B(0, delta) under T and the S_y jointly cover
  the closure of V (this is what makes the family's action minimal on its
  attractor), and
* absorption: a ball U = B(0, u_factor * delta) is mapped into itself by
  every member, so iterating the set operator A -> union of images from U
  converges to the unique compact invariant set with nonempty interior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import (
    ConstructionError,
    ConvergenceError,
    DimensionError,
    ValidationError,
)
from .geometry import Disk, Domain, GridSet
from .maps import AffineSimilarity, SystemSpec, has_closed_form_inverse

_COVER_PAD = 1.0625  # grid box half-width over V, as a multiple of delta
_MAX_ANCHORS = 256


@dataclass(frozen=True)
class ConstructionParams:
    """Parameters of the contraction family.

    kappa in (3/4, 1) keeps every member a contraction with complex
    rotation; delta scales the covered ball V; u_factor sizes the absorbing
    ball U = B(0, u_factor * delta).
    """

    kappa: float
    theta_deg: float = 179.0
    delta: float = 1.0
    u_factor: float = 16.0

    def __post_init__(self):
        if not 0.75 < self.kappa < 1.0:
            raise ValidationError(f"kappa must lie in (3/4, 1), got {self.kappa}")
        if not self.delta > 0:
            raise ValidationError("delta must be positive")
        if not self.u_factor > 1:
            raise ValidationError("u_factor must exceed 1")


@dataclass(frozen=True)
class ConstructionResult:
    """The verified family: T plus k-1 anchored conjugates."""

    params: ConstructionParams
    system: SystemSpec
    anchors: tuple[tuple[float, float], ...]
    absorbing_ball: Disk
    cover_verified: bool
    uncovered_fraction: float
    resolution: int

    @property
    def k(self) -> int:
        """Total number of generators (T included)."""
        return len(self.anchors) + 1


def _anchor_points(params: ConstructionParams, count: int):
    r = 0.75 * params.delta
    ang = 2.0 * np.pi * np.arange(count) / count
    return tuple((r * float(np.cos(a)), r * float(np.sin(a))) for a in ang)


def _family(params: ConstructionParams, anchors) -> SystemSpec:
    base = AffineSimilarity(params.kappa, params.theta_deg, (0.0, 0.0))
    gens = (base,) + tuple(
        AffineSimilarity(params.kappa, params.theta_deg, y) for y in anchors
    )
    return SystemSpec(gens)


def _uncovered_fraction(params: ConstructionParams, anchors, resolution: int) -> float:
    """Fraction of closure(V) cells missed by the union of member images.

    Images of the ball V under similarities are again balls, so coverage is
    an exact distance test against each image ball at cell centers.
    """
    delta = params.delta
    half = _COVER_PAD * delta
    dom = Domain.planar((-half, half, -half, half), resolution)
    xs, ys = dom.axis_centers()
    sq = (xs**2)[:, None] + (ys**2)[None, :]
    target = sq <= delta * delta
    px = np.broadcast_to(xs[:, None], target.shape)[target]
    py = np.broadcast_to(ys[None, :], target.shape)[target]
    total = px.size

    image_r = params.kappa * delta
    th = np.deg2rad(params.theta_deg)
    rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    centers = [(0.0, 0.0)]
    eye = np.eye(2)
    for y in anchors:
        c = (eye - params.kappa * rot) @ np.array(y)  # S_y(0) = y - T(y)
        centers.append((float(c[0]), float(c[1])))

    alive = np.arange(total)
    r2 = image_r * image_r
    for cx, cy in centers:
        if alive.size == 0:
            break
        d2 = (px[alive] - cx) ** 2 + (py[alive] - cy) ** 2
        alive = alive[d2 >= r2]
    return alive.size / total


def build_construction(
    params: ConstructionParams,
    resolution: int = 1024,
    max_anchors: int = _MAX_ANCHORS,
) -> ConstructionResult:
    """Find the smallest anchor count whose images cover closure(V).

    Anchors are equally spaced on |y| = (3/4) delta; the count is doubled
    until the rasterized cover check passes and then bisected down.  If no
    count up to ``max_anchors`` covers, raises :class:`ConstructionError`
    carrying the uncovered fraction at the largest count tried.
    """
    tried: dict[int, float] = {}

    def uncovered(count: int) -> float:
        if count not in tried:
            tried[count] = _uncovered_fraction(params, _anchor_points(params, count), resolution)
        return tried[count]

    passing = None
    count = 1
    while count <= max_anchors:
        if uncovered(count) == 0.0:
            passing = count
            break
        count *= 2
    if passing is None:
        worst = uncovered(min(count // 2, max_anchors))
        raise ConstructionError(
            f"no anchor count up to {max_anchors} covers closure(V); "
            f"uncovered fraction {worst:.4f}",
            uncovered_fraction=worst,
        )
    lo = passing // 2 + 1
    hi = passing
    while lo < hi:
        mid = (lo + hi) // 2
        if uncovered(mid) == 0.0:
            hi = mid
        else:
            lo = mid + 1
    best = hi
    anchors = _anchor_points(params, best)
    return ConstructionResult(
        params=params,
        system=_family(params, anchors),
        anchors=anchors,
        absorbing_ball=Disk((0.0, 0.0), params.u_factor * params.delta),
        cover_verified=True,
        uncovered_fraction=0.0,
        resolution=resolution,
    )


# ---------------------------------------------------------------------------
# Absorption and the set operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AbsorbingCheck:
    absorbed: bool
    escape_distance: float


def check_absorbing(sys: SystemSpec, u: Disk, resolution: int = 1024) -> AbsorbingCheck:
    """Whether every member maps U into U, with the worst escape distance.

    The escape distance is the largest amount by which an image of a U-cell
    center leaves U (0 when the union of images stays inside).
    """
    if sys.kind != "planar":
        raise DimensionError("absorbing-ball checks apply to planar systems")
    dom = _ball_domain(u, resolution)
    cells = geometry.rasterize_disk(dom, u)
    pts = cells.included_points()
    cx, cy = u.center
    worst = 0.0
    for m in sys.maps():
        img = m.eval(pts)
        d = np.sqrt((img[:, 0] - cx) ** 2 + (img[:, 1] - cy) ** 2)
        worst = max(worst, float(d.max()) - u.radius)
    worst = max(worst, 0.0)
    return AbsorbingCheck(absorbed=worst == 0.0, escape_distance=worst)


def _ball_domain(u: Disk, resolution: int) -> Domain:
    cx, cy = u.center
    half = u.radius * (1.0 + 8.0 / resolution)
    return Domain.planar((cx - half, cx + half, cy - half, cy + half), resolution)


def hutchinson_step(sys: SystemSpec, a: GridSet) -> GridSet:
    """One application of the set operator A -> union of member images.

    Members with closed-form inverses are rasterized exactly by the
    cell-center rule (a cell is in the image iff its center pulls back into
    A).  Other members are contractions here, so pushing every included
    cell center forward marks the image to within one cell.
    """
    out = np.zeros(a.domain.shape, dtype=bool)
    centers = a.domain.cell_centers()
    fwd_pts = None
    for m in sys.maps():
        if has_closed_form_inverse(m):
            pre = m.inverse().eval(centers)
            out |= a.lookup(pre)
        else:
            if fwd_pts is None:
                fwd_pts = a.included_points()
            img = m.eval(fwd_pts)
            idx, valid = a.domain.point_cells(img)
            flat = out.ravel()
            flat[idx[valid]] = True
            out = flat.reshape(a.domain.shape)
    return GridSet(a.domain, out)


@dataclass(frozen=True)
class AttractorResult:
    attractor: GridSet
    iterations: int
    final_hausdorff: float


def attractor(
    sys: SystemSpec,
    u: Disk,
    tol: float,
    max_iter: int = 200,
    resolution: int = 1024,
    verify_absorbing: bool = True,
) -> AttractorResult:
    """Iterate the set operator from U until successive iterates stabilize.

    Stops when the Hausdorff distance between successive iterates reaches
    ``tol`` (a length; grid distances are quantized to cell multiples, so
    the comparison is <=); raises :class:`ConvergenceError` with the last
    distance if ``max_iter`` is hit first.
    """
    if verify_absorbing:
        chk = check_absorbing(sys, u, resolution)
        if not chk.absorbed:
            raise ValidationError(
                f"ball is not absorbing (escape distance {chk.escape_distance:.4g})"
            )
    dom = _ball_domain(u, resolution)
    current = geometry.rasterize_disk(dom, u)
    last = np.inf
    for it in range(1, max_iter + 1):
        stepped = hutchinson_step(sys, current)
        last = geometry.hausdorff_distance(stepped, current)
        current = stepped
        if last <= tol:
            return AttractorResult(current, it, last)
    raise ConvergenceError(
        f"attractor iteration did not stabilize in {max_iter} steps "
        f"(last distance {last:.4g})",
        last_distance=last,
    )


def construction_report(
    result: ConstructionResult,
    absorbing: AbsorbingCheck,
    attr: AttractorResult,
) -> dict:
    return {
        "kappa": result.params.kappa,
        "theta": result.params.theta_deg,
        "delta": result.params.delta,
        "k": result.k,
        "cover_verified": result.cover_verified,
        "absorbing_verified": absorbing.absorbed,
        "iterations": attr.iterations,
        "final_hausdorff": attr.final_hausdorff,
    }
