"""Minimal Lambertian path tracer with per-pixel Voronoi weighting."""

from importlib import resources
from pathlib import Path

from .imageio import compute_mse, read_pfm, write_image, write_pfm, write_ppm
from .render import RenderJob, RenderResult, coverage, render_image, render_pixel
from .scene import Camera, Scene, furnace_scene, load_scene

# settings the bundled reference image was rendered with (see reference_image)
REFERENCE_SPP = 4096
REFERENCE_SEED = 12345
REFERENCE_SAMPLER = "stratified"


def reference_path() -> Path:
    return Path(str(resources.files(__name__) / "data" / "cornell_reference_128_4096.pfm"))


def reference_image():
    """Cached 128x128 Cornell Box render (stratified, mean weighting, linear radiance)."""
    return read_pfm(reference_path())


__all__ = [
    "Camera",
    "Scene",
    "RenderJob",
    "RenderResult",
    "compute_mse",
    "coverage",
    "furnace_scene",
    "load_scene",
    "read_pfm",
    "reference_image",
    "reference_path",
    "render_image",
    "render_pixel",
    "write_image",
    "write_pfm",
    "write_ppm",
    "REFERENCE_SPP",
    "REFERENCE_SEED",
    "REFERENCE_SAMPLER",
]
