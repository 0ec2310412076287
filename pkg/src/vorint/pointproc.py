"""Poisson sampling on squares and the stretched-window construction.

Nuclei are drawn in the target window ``W`` and, to keep their Voronoi
cells bounded, in a surrounding strip ``W' \\ W`` of width ``epsilon``.  A
configuration is rejected whenever some nucleus inside ``W`` still has an
unbounded cell, i.e. lies on the convex hull of all nuclei.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import InvalidConfidence, RejectionExhausted
from .geom2d import UNIT_WINDOW, Window, build_tessellation
from .rng import Rng

__all__ = [
    "Strip",
    "SpppParams",
    "PointConfig",
    "sample_poisson_count",
    "sample_uniform_in",
    "bound_reject_prob",
    "log_bound_reject_prob",
    "epsilon_branch_start",
    "solve_epsilon",
    "strip_count",
    "strip_area",
    "sample_sppp",
    "accept_config",
    "hull_mask",
]

Mode = Literal["fixed", "poisson"]


@dataclass(frozen=True)
class Strip:
    """The frame ``outer \\ inner`` between two concentric squares."""

    inner: Window
    outer: Window

    def __post_init__(self):
        if self.inner.center != self.outer.center or self.outer.half_extent <= self.inner.half_extent:
            raise ValueError("strip needs concentric windows with outer strictly larger")

    @property
    def area(self) -> float:
        return self.outer.area - self.inner.area


def sample_poisson_count(rng: Rng, lam: float) -> int:
    """Exact Poisson draw (numpy uses inversion for small and PTRS for large means)."""
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0:
        raise ValueError(f"Poisson mean must be finite and non-negative, got {lam}")
    if lam == 0.0:
        return 0
    return int(rng.poisson(lam))


def _uniform_window(rng: Rng, w: Window, count: int) -> np.ndarray:
    return rng.uniform(w.lower, w.upper, size=(count, 2))


def _uniform_strip(rng: Rng, s: Strip, count: int) -> np.ndarray:
    # frame split into bottom/top slabs (full width) and left/right slabs (inner height)
    (X0, Y0), (X1, Y1) = s.outer.lower, s.outer.upper
    (x0, y0), (x1, y1) = s.inner.lower, s.inner.upper
    lo = np.array([[X0, Y0], [X0, y1], [X0, y0], [x1, y0]])
    hi = np.array([[X1, y0], [X1, Y1], [x0, y1], [X1, y1]])
    areas = np.prod(hi - lo, axis=1)
    out = np.empty((count, 2))
    filled = 0
    while filled < count:
        k = count - filled
        which = rng.choice(4, size=k, p=areas / areas.sum())
        u = rng.random((k, 2))
        pts = lo[which] + u * (hi[which] - lo[which])
        # half-open draws can land on the inner boundary, which belongs to W
        pts = pts[~s.inner.contains(pts)]
        out[filled : filled + len(pts)] = pts
        filled += len(pts)
    return out


def sample_uniform_in(rng: Rng, region: Window | Strip, count: int) -> np.ndarray:
    """``count`` i.i.d. uniform points in a window or a strip, as an ``(count, 2)`` array."""
    if count < 0:
        raise ValueError("count must be non-negative")
    if isinstance(region, Strip):
        return _uniform_strip(rng, region, count)
    return _uniform_window(rng, region, count)


def log_bound_reject_prob(n: float, epsilon: float) -> float:
    return math.log(4 * math.pi) + 2 * math.log(n) + 2 * math.log(epsilon) - math.pi * n * epsilon**2


def bound_reject_prob(n: float, epsilon: float) -> float:
    """Upper bound ``4 pi n^2 eps^2 exp(-pi n eps^2)`` on the rejection probability."""
    if n <= 0 or epsilon < 0:
        raise ValueError("need n > 0 and epsilon >= 0")
    if epsilon == 0:
        return 0.0
    return math.exp(log_bound_reject_prob(n, epsilon))


def epsilon_branch_start(n: float) -> float:
    """Maximiser of the bound; it decreases monotonically beyond this margin."""
    return math.sqrt(1.0 / (math.pi * n))


def solve_epsilon(n: float, delta: float, tol: float = 1e-10) -> float:
    """Smallest margin on the decreasing branch whose rejection bound is at most ``delta``.

    Raises :class:`InvalidConfidence` (carrying the branch start as
    ``.epsilon``) when the bound is already below ``delta`` at the branch
    start, since every margin on the branch then qualifies.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    lo = epsilon_branch_start(n)
    target = math.log(delta)
    start = log_bound_reject_prob(n, lo)
    if start <= target:
        raise InvalidConfidence(
            f"bound {math.exp(start):.6g} at branch start eps={lo:.6g} is already <= {delta}", epsilon=lo
        )
    hi = 2 * lo
    while log_bound_reject_prob(n, hi) > target:
        lo, hi = hi, 2 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if log_bound_reject_prob(n, mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def strip_area(epsilon: float, half_extent: float = 0.5) -> float:
    """Area of the strip of width ``epsilon`` around a square of the given half extent."""
    return 8.0 * half_extent * epsilon + 4.0 * epsilon**2


def strip_count(n: float, epsilon: float, half_extent: float = 0.5) -> int:
    """``floor(n * |W' \\ W|)``, i.e. ``floor(n (4 eps + 4 eps^2))`` on the unit window."""
    if epsilon == 0:
        return 0
    # guard against 439.99999999 style round-off when the product is an integer
    return int(math.floor(n * strip_area(epsilon, half_extent) * (1 + 1e-12)))


@dataclass(frozen=True)
class SpppParams:
    """Parameters of a stretched-window Poisson sample.

    ``intensity_n`` is in points per unit area and ``epsilon`` in window
    units.  Use :meth:`create` to derive ``epsilon`` from a confidence level.
    """

    intensity_n: float
    epsilon: float
    confidence_delta: float = 1e-3
    max_retries: int = 100
    mode: Mode = "fixed"
    strict: bool = False

    def __post_init__(self):
        if not self.intensity_n > 0:
            raise ValueError("intensity_n must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.confidence_delta < 1:
            raise ValueError("confidence_delta must lie in (0, 1)")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.mode not in ("fixed", "poisson"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def create(
        cls,
        intensity_n: float,
        delta: float = 1e-3,
        window: Window = UNIT_WINDOW,
        **kwargs,
    ) -> "SpppParams":
        """Solve the margin for ``window``: the bound is stated for a unit-area window,
        so the problem is rescaled to it and the margin scaled back."""
        side = window.side
        n_unit = intensity_n * window.area
        try:
            eps = solve_epsilon(n_unit, delta)
        except InvalidConfidence as exc:
            eps = exc.epsilon
        return cls(intensity_n=intensity_n, epsilon=eps * side, confidence_delta=delta, **kwargs)


@dataclass(frozen=True, eq=False)
class PointConfig:
    window: Window
    stretched: Window
    interior: np.ndarray
    strip: np.ndarray
    retries_used: int = 0
    epsilon: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "epsilon", self.stretched.half_extent - self.window.half_extent)

    @property
    def points(self) -> np.ndarray:
        """Interior nuclei first, then strip nuclei."""
        return np.concatenate([self.interior, self.strip])

    def to_dict(self) -> dict:
        return {
            "window": self.window.to_dict(),
            "stretched": self.stretched.to_dict(),
            "interior": self.interior.tolist(),
            "strip": self.strip.tolist(),
            "retries_used": self.retries_used,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def hull_mask(points: np.ndarray) -> np.ndarray:
    """Mask of points lying on the boundary of the convex hull (collinear edge points included)."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n < 3:
        return np.ones(n, dtype=bool)
    try:
        hull = ConvexHull(pts)
    except QhullError:
        # flat input: everything is on the boundary
        return np.ones(n, dtype=bool)
    mask = np.zeros(n, dtype=bool)
    mask[hull.vertices] = True
    # qhull drops points in the relative interior of hull edges; catch them explicitly
    eq = hull.equations  # rows (nx, ny, c) with nx*x + ny*y + c <= 0 inside
    dist = pts @ eq[:, :2].T + eq[:, 2]
    scale = np.abs(pts).max() + 1.0
    mask |= (np.abs(dist) <= 1e-14 * scale).any(axis=1)
    return mask


def accept_config(cfg: PointConfig, strict: bool = False) -> bool:
    """True iff every nucleus inside ``cfg.window`` has a bounded cell.

    With ``strict`` the circumscribed radius of those cells must also stay
    within the stretch margin.
    """
    n_in = len(cfg.interior)
    if n_in == 0:
        return True
    pts = cfg.points
    if strict:
        try:
            tess = build_tessellation(pts)
        except Exception:
            return False
        ok = tess.bounded[:n_in] & (tess.circ_radii[:n_in] <= cfg.epsilon)
        return bool(ok.all())
    return not hull_mask(pts)[:n_in].any()


def _draw(rng: Rng, params: SpppParams, w: Window, stretched: Window) -> tuple[np.ndarray, np.ndarray]:
    n_area = params.intensity_n * w.area
    s_area = params.intensity_n * (stretched.area - w.area)
    if params.mode == "poisson":
        n_in = sample_poisson_count(rng, n_area)
        n_strip = sample_poisson_count(rng, s_area)
    else:
        n_in = int(round(n_area))
        n_strip = strip_count(params.intensity_n, params.epsilon, w.half_extent)
    interior = sample_uniform_in(rng, w, n_in)
    strip = sample_uniform_in(rng, Strip(w, stretched), n_strip)
    return interior, strip


def sample_sppp(rng: Rng, params: SpppParams, w: Window = UNIT_WINDOW) -> PointConfig:
    """Draw an accepted stretched-window configuration, resampling on rejection.

    Raises :class:`RejectionExhausted` after ``params.max_retries`` rejected draws.
    """
    stretched = w.stretched(params.epsilon)
    for attempt in range(params.max_retries + 1):
        interior, strip = _draw(rng, params, w, stretched)
        cfg = PointConfig(w, stretched, interior, strip, retries_used=attempt)
        if accept_config(cfg, strict=params.strict):
            return cfg
    raise RejectionExhausted(
        f"no acceptable configuration after {params.max_retries} retries "
        f"(n={params.intensity_n}, epsilon={params.epsilon:.6g})"
    )
