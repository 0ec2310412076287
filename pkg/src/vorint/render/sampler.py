"""Sub-pixel sample placement.

A sampler decides where in the pixel window ``[-1/2, 1/2]^2`` camera rays
are fired and, for the stretched-window sampler, which Voronoi weights
those positions receive.  Weights depend on positions only, so they are
computed before any ray is traced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyFilter, RejectionExhausted
from ..estimators import voronoi_weights
from ..geom2d import UNIT_WINDOW
from ..pointproc import SpppParams, sample_sppp
from ..rng import Rng

SAMPLERS = ("rnd", "stratified", "sppp")


@dataclass
class PixelSamples:
    """Positions to trace and how to weight their radiance.

    ``weights`` is ``None`` for plain averaging.  ``fallback`` is set when
    Voronoi weighting was requested but could not be applied.
    """

    positions: np.ndarray
    weighting: str = "mc"
    weights: np.ndarray | None = None
    strip: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    retries: int = 0
    fallback: bool = False
    note: str = ""


def stratified_positions(rng: Rng, spp: int) -> np.ndarray:
    """Jittered ``k x k`` grid with ``k = floor(sqrt(spp))``; leftover samples are uniform."""
    k = math.isqrt(spp)
    ij = np.stack(np.meshgrid(np.arange(k), np.arange(k), indexing="ij"), axis=-1).reshape(-1, 2)
    pts = (ij + rng.random((k * k, 2))) / k - 0.5
    extra = spp - k * k
    if extra:
        pts = np.concatenate([pts, rng.random((extra, 2)) - 0.5])
    return pts


def sample_pixel(rng: Rng, sampler: str, spp: int, weighting: str = "mc", params: SpppParams | None = None) -> PixelSamples:
    if sampler == "rnd":
        return PixelSamples(rng.random((spp, 2)) - 0.5)
    if sampler == "stratified":
        return PixelSamples(stratified_positions(rng, spp))
    if sampler != "sppp":
        raise ValueError(f"unknown sampler {sampler!r}")

    params = params or SpppParams.create(spp)
    try:
        cfg = sample_sppp(rng, params, UNIT_WINDOW)
    except RejectionExhausted:
        return PixelSamples(rng.random((spp, 2)) - 0.5, fallback=weighting != "mc", note="rejection exhausted")
    out = PixelSamples(cfg.interior, weighting, strip=cfg.strip, retries=cfg.retries_used)
    if weighting == "mc":
        return out
    if len(cfg.interior) < 2:
        # a single cell carries no information about the sample layout
        out.weighting, out.fallback, out.note = "mc", True, "fewer than two interior nuclei"
        return out
    w = voronoi_weights(cfg, filtered=weighting == "fvor")
    if weighting == "fvor" and not w.sum() > 0:
        out.weighting, out.fallback, out.note = "mc", True, str(EmptyFilter.__name__)
        return out
    out.weights = w
    return out
