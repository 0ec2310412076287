"""Scene description: parallelogram primitives, Lambertian/emissive materials, pinhole camera."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = ["Camera", "Scene", "load_scene", "default_scene_path", "furnace_scene"]


def default_scene_path() -> Path:
    return Path(str(resources.files("vorint.render") / "data" / "cornell_box.json"))


@dataclass(frozen=True, eq=False)
class Camera:
    position: np.ndarray
    forward: np.ndarray
    right: np.ndarray
    up: np.ndarray
    fov_deg: float
    width: int
    height: int

    @classmethod
    def look_at(cls, position, target, up, fov_deg: float, width: int, height: int) -> "Camera":
        position = np.asarray(position, dtype=float)
        fwd = np.asarray(target, dtype=float) - position
        fwd /= np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(up, dtype=float))
        right /= np.linalg.norm(right)
        true_up = np.cross(right, fwd)
        return cls(position, fwd, right, true_up, float(fov_deg), int(width), int(height))

    def with_resolution(self, width: int, height: int) -> "Camera":
        return replace(self, width=int(width), height=int(height))

    def packed(self) -> np.ndarray:
        """Flat float array consumed by the tracing kernel."""
        tan_half = math.tan(math.radians(self.fov_deg) / 2)
        return np.concatenate(
            [self.position, self.forward, self.right, self.up, [tan_half, self.width, self.height]]
        ).astype(np.float64)


@dataclass(frozen=True, eq=False)
class Scene:
    """Parallelograms ``origin + a*u + b*v`` with ``a, b`` in ``[0, 1]``.

    Lambertian surfaces are two-sided; emitters radiate only on the side
    their normal ``u x v`` points to.
    """

    origin: np.ndarray  # (Q, 3)
    edge_u: np.ndarray
    edge_v: np.ndarray
    albedo: np.ndarray
    emission: np.ndarray
    names: tuple[str, ...]
    camera: Camera

    def __post_init__(self):
        if not (self.emission > 0).any():
            raise ValueError("scene needs at least one emitter")
        if (self.albedo < 0).any() or (self.albedo > 1).any():
            raise ValueError("albedo must lie in [0, 1]")

    @property
    def emitters(self) -> np.ndarray:
        return np.flatnonzero(self.emission.max(axis=1) > 0)

    @property
    def areas(self) -> np.ndarray:
        return np.linalg.norm(np.cross(self.edge_u, self.edge_v), axis=1)

    @property
    def max_emission(self) -> float:
        return float(self.emission.max())

    def index(self, name: str) -> int:
        return self.names.index(name)

    def with_resolution(self, width: int, height: int) -> "Scene":
        return replace(self, camera=self.camera.with_resolution(width, height))


def _box_quads(lo, hi):
    (x0, y0, z0), (x1, y1, z1) = lo, hi
    dx, dy, dz = x1 - x0, y1 - y0, z1 - z0
    return [
        ([x0, y0, z0], [dx, 0, 0], [0, dy, 0]),  # front (z0)
        ([x0, y0, z1], [0, dy, 0], [dx, 0, 0]),  # back (z1)
        ([x0, y0, z0], [0, dy, 0], [0, 0, dz]),  # x0
        ([x1, y0, z0], [0, 0, dz], [0, dy, 0]),  # x1
        ([x0, y1, z0], [dx, 0, 0], [0, 0, dz]),  # top
        ([x0, y0, z0], [0, 0, dz], [dx, 0, 0]),  # bottom
    ]


def scene_from_dict(d: dict, resolution: tuple[int, int] | None = None) -> Scene:
    mats = d["materials"]
    rows = []
    for q in d.get("quads", []):
        rows.append((q.get("name", "quad"), q["origin"], q["u"], q["v"], mats[q["material"]]))
    for b in d.get("boxes", []):
        for k, (o, u, v) in enumerate(_box_quads(b["min"], b["max"])):
            rows.append((f"{b.get('name', 'box')}.{k}", o, u, v, mats[b["material"]]))
    cam = d["camera"]
    w, h = resolution or cam["resolution"]
    camera = Camera.look_at(cam["position"], cam["look_at"], cam["up"], cam["fov_deg"], w, h)
    arr = lambda i: np.array([r[i] for r in rows], dtype=float)  # noqa: E731
    return Scene(
        origin=arr(1),
        edge_u=arr(2),
        edge_v=arr(3),
        albedo=np.array([r[4].get("albedo", [0, 0, 0]) for r in rows], dtype=float),
        emission=np.array([r[4].get("emission", [0, 0, 0]) for r in rows], dtype=float),
        names=tuple(r[0] for r in rows),
        camera=camera,
    )


def load_scene(path=None, resolution: tuple[int, int] | None = None) -> Scene:
    """Load a JSON scene (the built-in Cornell Box when ``path`` is None)."""
    path = default_scene_path() if path is None else Path(path)
    return scene_from_dict(json.loads(Path(path).read_text()), resolution)


def furnace_scene(albedo: float, emission: float, resolution=(4, 4)) -> Scene:
    """Closed cube whose six faces share one albedo and one (inward) emission.

    Every point sees radiance ``Le * sum_{k<depth} albedo**k``.
    """
    d = {
        "camera": {
            "position": [0.5, 0.5, 0.5],
            "look_at": [0.5, 0.5, 1.0],
            "up": [0, 1, 0],
            "fov_deg": 60.0,
            "resolution": list(resolution),
        },
        "materials": {"m": {"albedo": [albedo] * 3, "emission": [emission] * 3}},
        # normals u x v all point into the cube
        "quads": [
            {"origin": [0, 0, 0], "u": [0, 0, 1], "v": [1, 0, 0], "material": "m"},
            {"origin": [0, 1, 0], "u": [1, 0, 0], "v": [0, 0, 1], "material": "m"},
            {"origin": [0, 0, 0], "u": [1, 0, 0], "v": [0, 1, 0], "material": "m"},
            {"origin": [0, 0, 1], "u": [0, 1, 0], "v": [1, 0, 0], "material": "m"},
            {"origin": [0, 0, 0], "u": [0, 1, 0], "v": [0, 0, 1], "material": "m"},
            {"origin": [1, 0, 0], "u": [0, 0, 1], "v": [0, 1, 0], "material": "m"},
        ],
    }
    return scene_from_dict(d)
