"""Render jobs: sampler -> path-tracing kernel -> per-pixel weighting."""

from __future__ import annotations

import functools
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..estimators import combine
from ..pointproc import SpppParams
from ..rng import make_rng
from . import kernel
from .sampler import SAMPLERS, PixelSamples, sample_pixel
from .scene import Scene

log = logging.getLogger(__name__)

WEIGHTINGS = ("mc", "vor", "fvor")


@dataclass(frozen=True, eq=False)
class RenderJob:
    scene: Scene
    spp: int
    sampler: str = "rnd"
    weighting: str = "mc"
    max_depth: int = 8
    nee: bool = True
    seed: int = 0
    delta: float = 1e-3
    clamp_factor: float = 10.0

    def __post_init__(self):
        if self.spp < 1:
            raise ValueError("spp must be >= 1")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if self.weighting != "mc" and self.sampler != "sppp":
            raise ValueError(f"{self.weighting} weighting requires the sppp sampler")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")

    @property
    def clamp(self) -> float:
        return self.clamp_factor * self.scene.max_emission

    @functools.cached_property
    def sppp_params(self) -> SpppParams:
        return SpppParams.create(self.spp, self.delta)


@dataclass
class RenderResult:
    image: np.ndarray  # (H, W, 3) linear radiance
    fallbacks: int = 0
    wall_time: float = 0.0


@functools.lru_cache(maxsize=8)
def _packed(scene: Scene):
    n_raw = np.cross(scene.edge_u, scene.edge_v)
    nn = np.einsum("ij,ij->i", n_raw, n_raw)
    normal = n_raw / np.sqrt(nn)[:, None]
    wvec = n_raw / nn[:, None]
    dvals = np.einsum("ij,ij->i", normal, scene.origin)
    lights = scene.emitters.astype(np.int64)
    la = scene.areas[lights]
    cdf = np.cumsum(la) / la.sum()
    geom = (
        np.ascontiguousarray(scene.origin),
        np.ascontiguousarray(scene.edge_u),
        np.ascontiguousarray(scene.edge_v),
        normal,
        wvec,
        dvals,
    )
    return geom, np.ascontiguousarray(scene.albedo), np.ascontiguousarray(scene.emission), lights, cdf, float(la.sum())


def trace(job: RenderJob, pix_x, pix_y, positions, sample_ids) -> np.ndarray:
    """Radiance of camera samples; ``positions`` are sub-pixel offsets in ``[-1/2, 1/2]^2``."""
    geom, albedo, emission, lights, cdf, area = _packed(job.scene)
    positions = np.asarray(positions, dtype=np.float64)
    return kernel.trace_samples(
        np.asarray(pix_x, dtype=np.int64),
        np.asarray(pix_y, dtype=np.int64),
        np.ascontiguousarray(positions[:, 0]),
        np.ascontiguousarray(positions[:, 1]),
        np.asarray(sample_ids, dtype=np.int64),
        job.scene.camera.packed(),
        *geom,
        albedo,
        emission,
        lights,
        cdf,
        area,
        job.seed,
        job.max_depth,
        job.nee,
        job.clamp,
    )


def first_hit_ids(scene: Scene, pix_x, pix_y, positions) -> np.ndarray:
    geom, *_ = _packed(scene)
    positions = np.asarray(positions, dtype=np.float64)
    return kernel.first_hits(
        np.asarray(pix_x, dtype=np.int64),
        np.asarray(pix_y, dtype=np.int64),
        np.ascontiguousarray(positions[:, 0]),
        np.ascontiguousarray(positions[:, 1]),
        scene.camera.packed(),
        *geom,
    )


def _pixel_samples(job: RenderJob, rng) -> PixelSamples:
    params = job.sppp_params if job.sampler == "sppp" else None
    return sample_pixel(rng, job.sampler, job.spp, job.weighting, params)


def _combine(ps: PixelSamples, radiance: np.ndarray) -> np.ndarray:
    if ps.weights is None:
        return radiance.mean(axis=0)
    return np.asarray(combine(radiance, ps.weights, ps.weighting, 1.0))


def render_pixel(rng, job: RenderJob, pixel_index: int, dump: bool = False):
    """Estimate one pixel; returns ``(rgb, info)``.

    ``info`` always records the weighting actually applied and whether it
    fell back to averaging; with ``dump`` it also lists every sample.

    ``rng`` drives sample placement (``None`` derives it from
    ``(job.seed, pixel_index)`` as :func:`render_image` does).
    """
    width = job.scene.camera.width
    py, px = divmod(int(pixel_index), width)
    if rng is None:
        rng = make_rng(job.seed, pixel_index)
    ps = _pixel_samples(job, rng)
    k = len(ps.positions)
    radiance = trace(job, np.full(k, px), np.full(k, py), ps.positions, np.arange(k))
    rgb = _combine(ps, radiance)
    info = {
        "pixel": [px, py],
        "sampler": job.sampler,
        "weighting": ps.weighting,
        "fallback": ps.fallback,
        "note": ps.note,
        "retries": ps.retries,
        "rgb": rgb.tolist(),
    }
    if dump:
        weights = ps.weights if ps.weights is not None else [None] * k
        info["samples"] = [
            {"pixel_uv": p.tolist(), "radiance": r.tolist(), "weight": None if wt is None else float(wt)}
            for p, r, wt in zip(ps.positions, radiance, weights)
        ]
        info["strip"] = ps.strip.tolist()
    return rgb, info


def render_image(job: RenderJob, rows_per_batch: int = 8, progress=None) -> RenderResult:
    """Render the full image; pixel ``i`` uses stream ``(job.seed, i)``."""
    t0 = time.perf_counter()
    cam = job.scene.camera
    w, h = cam.width, cam.height
    img = np.zeros((h, w, 3))
    fallbacks = 0
    for row0 in range(0, h, rows_per_batch):
        rows = range(row0, min(h, row0 + rows_per_batch))
        batch: list[tuple[int, int, PixelSamples]] = []
        for y in rows:
            for x in range(w):
                ps = _pixel_samples(job, make_rng(job.seed, y * w + x))
                fallbacks += ps.fallback
                batch.append((x, y, ps))
        counts = np.array([len(ps.positions) for _, _, ps in batch])
        pix_x = np.repeat([b[0] for b in batch], counts)
        pix_y = np.repeat([b[1] for b in batch], counts)
        pos = np.concatenate([ps.positions for _, _, ps in batch])
        sids = np.concatenate([np.arange(c) for c in counts])
        rad = trace(job, pix_x, pix_y, pos, sids)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        for k, (x, y, ps) in enumerate(batch):
            img[y, x] = _combine(ps, rad[offsets[k] : offsets[k + 1]])
        if progress is not None:
            progress(rows[-1] + 1, h)
    if fallbacks:
        log.info("%d pixel(s) fell back to mean weighting", fallbacks)
    return RenderResult(img, fallbacks, time.perf_counter() - t0)


def coverage(scene: Scene, quad_ids, samples_per_axis: int = 8) -> np.ndarray:
    """Fraction of each pixel whose first hit is one of ``quad_ids`` (regular sub-grid)."""
    cam = scene.camera
    w, h = cam.width, cam.height
    g = (np.arange(samples_per_axis) + 0.5) / samples_per_axis - 0.5
    sub = np.stack(np.meshgrid(g, g, indexing="xy"), axis=-1).reshape(-1, 2)
    k = len(sub)
    ys, xs = np.divmod(np.arange(w * h), w)
    ids = first_hit_ids(scene, np.repeat(xs, k), np.repeat(ys, k), np.tile(sub, (w * h, 1)))
    hit = np.isin(ids, np.asarray(list(quad_ids)))
    return hit.reshape(h, w, k).mean(axis=2)
