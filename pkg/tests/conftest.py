"""Shared fixtures.

Statistical runs are expensive, so identical (spec, seed) runs are cached
for the whole session and reused by every test that needs them.
"""

from __future__ import annotations

import functools
import math

import numpy as np
import pytest

from scipy import ndimage

from vorint.bench import BenchSpec, run_bench
from vorint.render import RenderJob, coverage, load_scene, render_image


@functools.lru_cache(maxsize=None)
def bench_cell(function: str, method: str, n: int, replications: int, mode: str = "fixed", seed: int = 0):
    """CellStats for one (function, method, n) cell; ``function`` accepts ``holder_<alpha>`` names."""
    spec = BenchSpec(function=function, methods=[method], n_values=[n], replications=replications, seed=seed, mode=mode)
    return run_bench(spec).cells[0]


@functools.lru_cache(maxsize=None)
def bench_sweep(function: str, methods: tuple[str, ...], n_values: tuple[int, ...], replications: int, seed: int = 0):
    spec = BenchSpec(function=function, methods=list(methods), n_values=list(n_values), replications=replications, seed=seed)
    return run_bench(spec)


def standard_error(cell) -> float:
    return cell.std_dev / math.sqrt(cell.replications)


# -- Cornell Box renders and regions -------------------------------------------


@functools.lru_cache(maxsize=None)
def cornell_scene():
    return load_scene()


@functools.lru_cache(maxsize=None)
def cornell_render(sampler: str, weighting: str, spp: int = 256, seed: int = 0) -> np.ndarray:
    return render_image(RenderJob(cornell_scene(), spp, sampler, weighting, seed=seed)).image


@functools.lru_cache(maxsize=None)
def light_coverage(samples_per_axis: int = 16) -> np.ndarray:
    scene = cornell_scene()
    return coverage(scene, [scene.index("light")], samples_per_axis)


def light_edge_mask() -> np.ndarray:
    c = light_coverage()
    return (c > 0) & (c < 1)


def flat_wall_mask() -> np.ndarray:
    """Pixels that see only the back wall, two pixels away from anything else."""
    scene = cornell_scene()
    back = coverage(scene, [scene.index("back")], 4) == 1
    return ndimage.binary_erosion(back, iterations=2)


def designated_pixel() -> tuple[int, int]:
    """The light-edge pixel whose light coverage is closest to one half (first in scan order on ties)."""
    c = light_coverage()
    score = np.where(light_edge_mask(), np.abs(c - 0.5), np.inf)
    y, x = np.unravel_index(int(np.argmin(score)), c.shape)
    return int(x), int(y)


# -- independent geometric oracles ---------------------------------------------


def hull_oracle(points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """O(n^2) convex-hull membership: a point is on the hull boundary iff the
    directions to all other points leave an angular gap of at least pi."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n <= 2:
        return np.ones(n, dtype=bool)
    out = np.zeros(n, dtype=bool)
    for i in range(n):
        d = np.delete(pts, i, axis=0) - pts[i]
        ang = np.sort(np.arctan2(d[:, 1], d[:, 0]))
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * math.pi]]))
        out[i] = gaps.max() >= math.pi - tol
    return out


def nearest_generator(points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    d2 = ((queries[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def in_convex_polygon(poly: np.ndarray, q: np.ndarray, tol: float = 1e-9) -> bool:
    """Point-in-CCW-convex-polygon with a boundary tolerance."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    cross = (b[:, 0] - a[:, 0]) * (q[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (q[0] - a[:, 0])
    return bool((cross >= -tol).all())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
