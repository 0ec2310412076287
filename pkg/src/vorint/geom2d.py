"""Planar Voronoi tessellations built from the dual Delaunay triangulation.

The triangulation comes from Qhull (via :mod:`scipy.spatial`); everything
downstream of it (circumcentres, cell areas, boundedness, circumscribed
radii, clipping) is computed here, vectorised over the whole point set so
that tessellations of several thousand nuclei stay cheap enough for
replication studies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

from .errors import DegenerateInput

__all__ = [
    "Point2",
    "Window",
    "UNIT_WINDOW",
    "VoronoiCell",
    "Tessellation",
    "build_tessellation",
    "clip_cell",
    "cell_within",
    "clip_polygon_halfplane",
    "polygon_area",
    "clipped_cell_areas",
]

VERTEX_DEDUP_TOL = 1e-12
# points closer than this fraction of the set's extent cannot be separated reliably in doubles
MIN_SEPARATION = 1e-9


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Window:
    """Axis-aligned square ``[cx-h, cx+h] x [cy-h, cy+h]``."""

    center: tuple[float, float] = (0.0, 0.0)
    half_extent: float = 0.5

    def __post_init__(self):
        h = float(self.half_extent)
        if not np.isfinite(h) or h <= 0:
            raise ValueError(f"half_extent must be positive, got {self.half_extent!r}")
        c = tuple(float(v) for v in self.center)
        if len(c) != 2 or not all(np.isfinite(c)):
            raise ValueError(f"invalid window center {self.center!r}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_extent", h)

    @property
    def side(self) -> float:
        return 2.0 * self.half_extent

    @property
    def area(self) -> float:
        return self.side**2

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - self.half_extent

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + self.half_extent

    def corners(self) -> np.ndarray:
        """Corners in counter-clockwise order starting bottom-left."""
        (x0, y0), (x1, y1) = self.lower, self.upper
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])

    def contains(self, pts, tol: float = 0.0) -> np.ndarray:
        """Closed-set membership test, vectorised over an ``(n, 2)`` array."""
        pts = np.asarray(pts, dtype=float)
        d = np.abs(pts - np.asarray(self.center))
        return np.all(d <= self.half_extent + tol, axis=-1)

    def stretched(self, epsilon: float) -> "Window":
        return Window(self.center, self.half_extent + epsilon)

    def to_dict(self) -> dict:
        return {"center": list(self.center), "half_extent": self.half_extent}


UNIT_WINDOW = Window((0.0, 0.0), 0.5)


@dataclass(frozen=True, eq=False)
class VoronoiCell:
    """One Voronoi cell.

    ``vertices`` are counter-clockwise and empty for unbounded cells, whose
    ``area`` and ``circ_radius`` are ``inf``.  ``neighbors`` holds the
    coordinates of the Delaunay neighbours; the cell is the intersection of
    the half-planes bounded by the bisectors to these points.
    """

    nucleus: np.ndarray
    vertices: np.ndarray
    bounded: bool
    area: float
    circ_radius: float
    neighbors: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "nucleus": self.nucleus.tolist(),
            "vertices": self.vertices.tolist(),
            "area": self.area if self.bounded else None,
            "bounded": self.bounded,
        }


def polygon_area(poly) -> float:
    """Shoelace area of a polygon given as an ``(k, 2)`` vertex array (signed, CCW positive)."""
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _dedup_ring(poly: np.ndarray, tol: float = VERTEX_DEDUP_TOL) -> np.ndarray:
    if len(poly) < 2:
        return poly
    keep = np.linalg.norm(poly - np.roll(poly, 1, axis=0), axis=1) > tol
    if not keep.any():
        return poly[:1]
    return poly[keep]


def clip_polygon_halfplane(poly: np.ndarray, normal, offset: float) -> np.ndarray:
    """Sutherland-Hodgman step: keep the part of ``poly`` where ``normal . y <= offset``."""
    if len(poly) == 0:
        return poly
    normal = np.asarray(normal, dtype=float)
    s = poly @ normal - offset
    inside = s <= 0.0
    if inside.all():
        return poly
    if not inside.any():
        return poly[:0]
    out = []
    k = len(poly)
    for i in range(k):
        j = (i + 1) % k
        if inside[i]:
            out.append(poly[i])
        if inside[i] != inside[j]:
            t = s[i] / (s[i] - s[j])
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.asarray(out)


def _circumcenters(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    ba = b - a
    ca = c - a
    bb = np.einsum("ij,ij->i", ba, ba)
    cc = np.einsum("ij,ij->i", ca, ca)
    d = 2.0 * (ba[:, 0] * ca[:, 1] - ba[:, 1] * ca[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        ux = (ca[:, 1] * bb - ba[:, 1] * cc) / d
        uy = (ba[:, 0] * cc - ca[:, 0] * bb) / d
    return a + np.column_stack([ux, uy])


def _signed_area(p, q, r) -> np.ndarray:
    return 0.5 * ((q[:, 0] - p[:, 0]) * (r[:, 1] - p[:, 1]) - (q[:, 1] - p[:, 1]) * (r[:, 0] - p[:, 0]))


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 and pts.size == 2:
        pts = pts.reshape(1, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateInput(f"expected an (n, 2) array of points, got shape {pts.shape}")
    if len(pts) == 0:
        raise DegenerateInput("cannot tessellate an empty point set")
    if not np.isfinite(pts).all():
        raise DegenerateInput("point coordinates must be finite")
    return pts


class Tessellation:
    """Voronoi tessellation of a finite point set.

    Per-nucleus quantities are exposed as arrays (``areas``, ``bounded``,
    ``circ_radii``); :class:`VoronoiCell` objects are assembled lazily by
    :meth:`cell` / :attr:`cells` for callers that need explicit polygons.
    """

    def __init__(self, points: np.ndarray, simplices: np.ndarray | None):
        self.points = points
        n = len(points)
        if simplices is None or len(simplices) == 0:
            self.simplices = np.empty((0, 3), dtype=np.intp)
            self.circumcenters = np.empty((0, 2))
            self.bounded = np.zeros(n, dtype=bool)
            self.areas = np.full(n, np.inf)
            self.circ_radii = np.full(n, np.inf)
            return

        simplices = np.asarray(simplices, dtype=np.intp)
        a, b, c = (points[simplices[:, k]] for k in range(3))
        sa = _signed_area(a, b, c)
        # qhull may emit zero-area slivers along collinear hull edges; they would hide hull vertices.
        # "flat" means the orientation determinant is within its rounding-error bound.
        left = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
        right = (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        flat = np.abs(left - right) <= 1e-14 * (np.abs(left) + np.abs(right))
        if flat.any():
            simplices = simplices[~flat]
            a, b, c = (points[simplices[:, k]] for k in range(3))
            sa = sa[~flat]
        # force counter-clockwise orientation
        flip = sa < 0
        if flip.any():
            simplices = simplices.copy()
            simplices[flip, 1], simplices[flip, 2] = simplices[flip, 2], simplices[flip, 1].copy()
            a, b, c = (points[simplices[:, k]] for k in range(3))
        self.simplices = simplices
        o = _circumcenters(a, b, c)
        self.circumcenters = o

        mab, mbc, mca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
        contrib = np.concatenate(
            [
                _signed_area(a, mab, o) + _signed_area(a, o, mca),
                _signed_area(b, mbc, o) + _signed_area(b, o, mab),
                _signed_area(c, mca, o) + _signed_area(c, o, mbc),
            ]
        )
        owner = simplices.T.ravel()
        areas = np.bincount(owner, weights=contrib, minlength=n)

        dist = np.linalg.norm(points[owner] - np.concatenate([o, o, o]), axis=1)
        radii = np.zeros(n)
        np.maximum.at(radii, owner, dist)

        bounded = np.ones(n, dtype=bool)
        bounded[np.bincount(owner, minlength=n) == 0] = False
        bounded[self._hull_vertices()] = False
        self.bounded = bounded
        self.areas = np.where(bounded, areas, np.inf)
        self.circ_radii = np.where(bounded, radii, np.inf)

    def _edge_keys(self) -> tuple[np.ndarray, np.ndarray]:
        s = self.simplices
        edges = np.concatenate([s[:, [0, 1]], s[:, [1, 2]], s[:, [2, 0]]])
        lo, hi = edges.min(axis=1), edges.max(axis=1)
        return lo, hi

    def _hull_vertices(self) -> np.ndarray:
        """Vertices on boundary edges of the triangulation (includes collinear hull points)."""
        n = len(self.points)
        lo, hi = self._edge_keys()
        key = lo.astype(np.int64) * n + hi
        uniq, counts = np.unique(key, return_counts=True)
        once = uniq[counts == 1]
        return np.unique(np.concatenate([once // n, once % n]))

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def _incidence(self) -> tuple[np.ndarray, np.ndarray]:
        owner = self.simplices.T.ravel()
        tri_ids = np.tile(np.arange(len(self.simplices)), 3)
        order = np.argsort(owner, kind="stable")
        indptr = np.searchsorted(owner[order], np.arange(len(self.points) + 1))
        return indptr, tri_ids[order]

    @cached_property
    def _neighbors(self) -> list[np.ndarray]:
        n = len(self.points)
        if len(self.simplices) == 0:
            return [np.delete(np.arange(n), i) for i in range(n)]
        lo, hi = self._edge_keys()
        key = np.unique(lo.astype(np.int64) * n + hi)
        a, b = key // n, key % n
        src = np.concatenate([a, b])
        dst = np.concatenate([b, a])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.searchsorted(src, np.arange(n + 1))
        return [dst[indptr[i] : indptr[i + 1]] for i in range(n)]

    def neighbor_indices(self, i: int) -> np.ndarray:
        return self._neighbors[i]

    def cell_vertices(self, i: int) -> np.ndarray:
        """Counter-clockwise vertices of cell ``i`` (empty when unbounded)."""
        if not self.bounded[i]:
            return np.empty((0, 2))
        indptr, tris = self._incidence
        verts = self.circumcenters[tris[indptr[i] : indptr[i + 1]]]
        rel = verts - self.points[i]
        verts = verts[np.argsort(np.arctan2(rel[:, 1], rel[:, 0]), kind="stable")]
        return _dedup_ring(verts)

    def cell(self, i: int) -> VoronoiCell:
        verts = self.cell_vertices(i)
        nucleus = self.points[i].copy()
        nb = self.points[self.neighbor_indices(i)].copy()
        for arr in (nucleus, verts, nb):
            arr.setflags(write=False)
        return VoronoiCell(
            nucleus=nucleus,
            vertices=verts,
            bounded=bool(self.bounded[i]),
            area=float(self.areas[i]),
            circ_radius=float(self.circ_radii[i]),
            neighbors=nb,
        )

    @cached_property
    def cells(self) -> list[VoronoiCell]:
        return [self.cell(i) for i in range(len(self.points))]

    def within_mask(self, w: Window) -> np.ndarray:
        """Boolean mask of cells that are bounded and lie inside ``w`` (boundary inclusive)."""
        n = len(self.points)
        if len(self.simplices) == 0:
            return np.zeros(n, dtype=bool)
        outside = ~w.contains(self.circumcenters)
        owner = self.simplices.T.ravel()
        bad = np.bincount(owner, weights=np.tile(outside, 3).astype(float), minlength=n)
        return self.bounded & (bad == 0)

    def to_json(self, indices: Iterable[int] | None = None) -> str:
        idx = range(len(self.points)) if indices is None else indices
        return json.dumps({"cells": [self.cell(i).to_dict() for i in idx]})


def _is_collinear(pts: np.ndarray) -> bool:
    if len(pts) < 3:
        return True
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    return sv[1] <= 1e-12 * max(sv[0], 1e-300)


def build_tessellation(points) -> Tessellation:
    """Tessellate ``points`` (any ``(n, 2)`` array-like).

    Duplicates, and points closer than ``MIN_SEPARATION`` times the extent
    of the set, are rejected.  One or two points, or a collinear set, yield
    a tessellation whose cells are all unbounded.
    """
    pts = _as_points(points)
    if len(pts) > 1:
        extent = float(np.ptp(pts, axis=0).max())
        close = cKDTree(pts).query_pairs(MIN_SEPARATION * extent, output_type="ndarray")
        if len(close):
            i, j = close[0]
            raise DegenerateInput(f"points {i} and {j} coincide or nearly coincide")
    if _is_collinear(pts):
        return Tessellation(pts, None)
    try:
        tri = Delaunay(pts)
    except QhullError as exc:
        raise DegenerateInput(f"triangulation failed: {exc}") from exc
    if len(tri.coplanar):
        raise DegenerateInput(
            f"{len(tri.coplanar)} point(s) too close to others to be triangulated"
        )
    return Tessellation(pts, tri.simplices)


def clip_cell(cell: VoronoiCell, w: Window) -> tuple[np.ndarray, float]:
    """Return the polygon ``cell`` intersected with ``w`` and its area.

    Works for bounded and unbounded cells alike by intersecting the window
    with the bisector half-planes of the cell's neighbours.
    """
    poly = w.corners()
    p = cell.nucleus
    for q in cell.neighbors:
        d = q - p
        poly = clip_polygon_halfplane(poly, d, float(d @ (0.5 * (p + q))))
        if len(poly) == 0:
            return np.empty((0, 2)), 0.0
    poly = _dedup_ring(poly)
    return poly, max(polygon_area(poly), 0.0)


def cell_within(cell: VoronoiCell, w: Window) -> bool:
    if not cell.bounded:
        return False
    return bool(w.contains(cell.vertices).all())


def clipped_cell_areas(points, w: Window) -> np.ndarray:
    """Areas ``|C(x) ∩ w|`` for every point of a set lying inside ``w``.

    Mirroring the points across the four sides of the square leaves the cell
    of every original point equal to its clipped cell (the side is the
    bisector to its own mirror image, and mirrored points are never closer
    than their originals to anything inside the window).  The cells of the
    augmented set are all bounded, so the vectorised area path applies.
    """
    pts = _as_points(points)
    n = len(pts)
    (x0, y0), (x1, y1) = w.lower, w.upper
    mirrors = [
        np.column_stack([2 * x0 - pts[:, 0], pts[:, 1]]),
        np.column_stack([2 * x1 - pts[:, 0], pts[:, 1]]),
        np.column_stack([pts[:, 0], 2 * y0 - pts[:, 1]]),
        np.column_stack([pts[:, 0], 2 * y1 - pts[:, 1]]),
    ]
    aug = np.concatenate([pts, *mirrors])
    try:
        tess = build_tessellation(aug)
    except DegenerateInput:
        # a nucleus on the window boundary coincides with its mirror image
        tess = build_tessellation(pts)
        return np.array([clip_cell(tess.cell(i), w)[1] for i in range(n)])
    if not tess.bounded[:n].all():
        tess = build_tessellation(pts)
        return np.array([clip_cell(tess.cell(i), w)[1] for i in range(n)])
    return tess.areas[:n].copy()
