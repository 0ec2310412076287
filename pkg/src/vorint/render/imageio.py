"""PFM / PPM image files and error metrics."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ResolutionMismatch

__all__ = ["write_pfm", "read_pfm", "write_ppm", "to_ppm_bytes", "to_pfm_bytes", "compute_mse", "write_image"]


def to_pfm_bytes(img: np.ndarray) -> bytes:
    """Colour PFM: little-endian float32 (negative scale), scanlines bottom-up."""
    img = np.asarray(img, dtype="<f4")
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) image")
    h, w, _ = img.shape
    header = f"PF\n{w} {h}\n-1.0\n".encode("ascii")
    return header + np.ascontiguousarray(img[::-1]).tobytes()


def write_pfm(path, img: np.ndarray) -> None:
    Path(path).write_bytes(to_pfm_bytes(img))


def read_pfm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode("ascii"))
        pos = end
    pos += 1  # single whitespace byte after the scale
    kind, w, h, scale = tokens[0], int(tokens[1]), int(tokens[2]), float(tokens[3])
    channels = {"PF": 3, "Pf": 1}.get(kind)
    if channels is None:
        raise ValueError(f"not a PFM file: magic {kind!r}")
    dtype = "<f4" if scale < 0 else ">f4"
    arr = np.frombuffer(data, dtype=dtype, count=w * h * channels, offset=pos)
    arr = arr.reshape(h, w, channels)[::-1].astype(np.float32)
    if channels == 1:
        arr = np.repeat(arr, 3, axis=2)
    return arr


def to_ppm_bytes(img: np.ndarray, gamma: float = 2.2) -> bytes:
    """Binary P6, 8 bits, gamma-encoded and clamped to [0, 1]."""
    img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) ** (1.0 / gamma)
    h, w, _ = img.shape
    q = np.round(img * 255.0).astype(np.uint8)
    return f"P6\n{w} {h}\n255\n".encode("ascii") + q.tobytes()


def write_ppm(path, img: np.ndarray, gamma: float = 2.2) -> None:
    Path(path).write_bytes(to_ppm_bytes(img, gamma))


def write_image(path, img: np.ndarray) -> None:
    """Dispatch on the file suffix (``.pfm`` or ``.ppm``)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        write_pfm(path, img)
    elif suffix == ".ppm":
        write_ppm(path, img)
    else:
        raise ValueError(f"unsupported image format {suffix!r} (use .pfm or .ppm)")


def compute_mse(image: np.ndarray, reference: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean over pixels and channels of the squared difference (linear radiance).

    ``mask`` optionally restricts the mean to an ``(H, W)`` boolean region.
    """
    a = np.asarray(image, dtype=np.float64)
    b = np.asarray(reference, dtype=np.float64)
    if a.shape != b.shape:
        raise ResolutionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    sq = (a - b) ** 2
    if mask is not None:
        sq = sq[np.asarray(mask, dtype=bool)]
    return float(sq.mean())
