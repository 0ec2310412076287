"""Integral estimators over a square window.

``mc``    plain Monte Carlo average, scaled by the window area.
``vor``   sum of ``f(x) * |cell(x)|`` over nuclei in ``W`` of a stretched-window sample.
``fvor``  self-normalised variant restricted to cells inside the stretched window.
``cvor``  nuclei only in ``W``, cells clipped to ``W`` (biased near the boundary).

All estimators accept a general window; on the unit window the area
factor is 1.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable, Literal

import numpy as np

from .errors import EmptyFilter, RejectionExhausted
from .geom2d import UNIT_WINDOW, Window, build_tessellation, clipped_cell_areas
from .pointproc import PointConfig, SpppParams, sample_sppp, sample_uniform_in
from .rng import Rng

__all__ = [
    "Integrand",
    "EstimateReport",
    "METHODS",
    "estimate_mc",
    "estimate_vor",
    "estimate_fvor",
    "estimate_cvor",
    "estimate",
    "voronoi_weights",
    "combine",
]

Method = Literal["mc", "vor", "fvor", "cvor"]
METHODS: tuple[str, ...] = ("mc", "vor", "fvor", "cvor")

# cap on redraws when the integrand is not finite at a sampled point
MAX_SINGULAR_REDRAWS = 1000


@dataclass(frozen=True)
class Integrand:
    """Vectorised integrand: ``eval`` maps an ``(n, 2)`` array to ``(n,)`` values."""

    eval: Callable[[np.ndarray], np.ndarray]
    support: Window = UNIT_WINDOW
    exact_value: float | None = None
    holder_alpha: float | None = None
    name: str = "f"

    def __call__(self, pts) -> np.ndarray:
        return np.asarray(self.eval(np.asarray(pts, dtype=float).reshape(-1, 2)), dtype=float)


@dataclass
class EstimateReport:
    method: str
    value: float
    n_interior: int
    n_strip: int = 0
    retries: int = 0
    wall_time: float = 0.0  # seconds

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wall_time_ms"] = d.pop("wall_time") * 1e3
        return d


def estimate_mc(rng: Rng, f: Integrand, n: int, w: Window = UNIT_WINDOW) -> EstimateReport:
    if n < 1:
        raise ValueError("n must be >= 1")
    t0 = time.perf_counter()
    pts = sample_uniform_in(rng, w, n)
    vals = f(pts)
    bad = ~np.isfinite(vals)
    redraws = 0
    while bad.any():
        redraws += 1
        if redraws > MAX_SINGULAR_REDRAWS:
            raise RuntimeError(f"integrand {f.name} keeps returning non-finite values")
        pts[bad] = sample_uniform_in(rng, w, int(bad.sum()))
        vals[bad] = f(pts[bad])
        bad = ~np.isfinite(vals)
    value = w.area * math.fsum(vals) / n
    return EstimateReport("mc", value, n, 0, redraws, time.perf_counter() - t0)


def voronoi_weights(cfg: PointConfig, filtered: bool = False) -> np.ndarray:
    """Cell areas of the interior nuclei of an accepted configuration.

    With ``filtered`` the weights of cells not contained in the stretched
    window are zeroed.
    """
    n_in = len(cfg.interior)
    if n_in == 0:
        return np.zeros(0)
    tess = build_tessellation(cfg.points)
    areas = tess.areas[:n_in]
    if not tess.bounded[:n_in].all():
        raise RejectionExhausted("accepted configuration has an unbounded interior cell")
    if filtered:
        keep = tess.within_mask(cfg.stretched)[:n_in]
        areas = np.where(keep, areas, 0.0)
    return areas


def combine(values: np.ndarray, weights: np.ndarray, method: str, area: float = 1.0):
    """Apply an estimator's weighting to sample values (``values`` may be ``(n,)`` or ``(n, c)``)."""
    values = np.asarray(values, dtype=float)
    if method == "mc":
        return area * values.mean(axis=0)
    if method == "vor":
        return np.tensordot(weights, values, axes=(0, 0))
    if method == "fvor":
        total = weights.sum()
        if not total > 0:
            raise EmptyFilter("no cell lies inside the stretched window")
        return area * np.tensordot(weights, values, axes=(0, 0)) / total
    raise ValueError(f"unknown weighting {method!r}")


def _voronoi_estimate(rng: Rng, f: Integrand, params: SpppParams, w: Window, method: str) -> EstimateReport:
    t0 = time.perf_counter()
    retries = 0
    failure: Exception | None = None
    for _ in range(params.max_retries + 1):
        cfg = sample_sppp(rng, params, w)
        retries += cfg.retries_used
        vals = f(cfg.interior)
        if not np.isfinite(vals).all():
            retries += 1
            failure = RejectionExhausted(f"integrand {f.name} not finite at sampled nuclei after retries")
            continue
        weights = voronoi_weights(cfg, filtered=method == "fvor")
        try:
            value = float(combine(vals, weights, method, w.area))
        except EmptyFilter:
            retries += 1
            failure = EmptyFilter(f"filtered estimator found no usable cells in {params.max_retries + 1} attempts")
            continue
        return EstimateReport(
            method, value, len(cfg.interior), len(cfg.strip), retries, time.perf_counter() - t0
        )
    raise failure


def estimate_vor(rng: Rng, f: Integrand, params: SpppParams, w: Window = UNIT_WINDOW) -> EstimateReport:
    return _voronoi_estimate(rng, f, params, w, "vor")


def estimate_fvor(rng: Rng, f: Integrand, params: SpppParams, w: Window = UNIT_WINDOW) -> EstimateReport:
    return _voronoi_estimate(rng, f, params, w, "fvor")


def estimate_cvor(rng: Rng, f: Integrand, n: int, w: Window = UNIT_WINDOW) -> EstimateReport:
    if n < 1:
        raise ValueError("n must be >= 1")
    t0 = time.perf_counter()
    retries = 0
    while True:
        pts = sample_uniform_in(rng, w, n)
        vals = f(pts)
        if np.isfinite(vals).all():
            break
        retries += 1
        if retries > MAX_SINGULAR_REDRAWS:
            raise RuntimeError(f"integrand {f.name} keeps returning non-finite values")
    areas = clipped_cell_areas(pts, w)
    value = float(np.dot(vals, areas))
    return EstimateReport("cvor", value, n, 0, retries, time.perf_counter() - t0)


def estimate(
    method: str,
    rng: Rng,
    f: Integrand,
    n: int,
    w: Window = UNIT_WINDOW,
    delta: float = 1e-3,
    mode: str = "fixed",
    max_retries: int = 100,
    params: SpppParams | None = None,
) -> EstimateReport:
    """Dispatch on ``method``; ``n`` is the sample count / intensity per unit area."""
    if method == "mc":
        return estimate_mc(rng, f, int(round(n * w.area)), w)
    if method == "cvor":
        return estimate_cvor(rng, f, int(round(n * w.area)), w)
    if method in ("vor", "fvor"):
        if params is None:
            params = SpppParams.create(n, delta, window=w, mode=mode, max_retries=max_retries)
        return _voronoi_estimate(rng, f, params, w, method)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
