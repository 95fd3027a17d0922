"""Deterministic rasterization of normalized layouts.

Edges are drawn as full-intensity Bresenham line segments, nodes as filled
discs on top; no anti-aliasing, so identical inputs give byte-identical
rasters.  Images can be round-tripped through portable graymaps (P2/P5).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gdpref.layouts import Layout


class RasterError(ValueError):
    pass


@dataclass
class RasterImage:
    pixels: np.ndarray  # (size, size) float in [0, 1], row 0 at the top

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.ndim != 2 or self.pixels.shape[0] != self.pixels.shape[1]:
            raise RasterError("raster must be square")
        if self.pixels.min() < 0 or self.pixels.max() > 1:
            raise RasterError("pixel intensities must lie in [0, 1]")

    @property
    def size(self) -> int:
        return self.pixels.shape[0]


def _bresenham(r0, c0, r1, c1):
    points = []
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dr - dc
    r, c = r0, c0
    while True:
        points.append((r, c))
        if r == r1 and c == c1:
            break
        e2 = 2 * err
        if e2 > -dc:
            err -= dc
            r += sr
        if e2 < dr:
            err += dr
            c += sc
    return points


def _stamp_disc(pixels, r, c, radius):
    size = pixels.shape[0]
    rad = int(np.ceil(radius))
    r0, r1 = max(0, r - rad), min(size, r + rad + 1)
    c0, c1 = max(0, c - rad), min(size, c + rad + 1)
    if r0 >= r1 or c0 >= c1:
        return
    rr, cc = np.mgrid[r0:r1, c0:c1]
    mask = (rr - r) ** 2 + (cc - c) ** 2 <= radius**2
    pixels[r0:r1, c0:c1][mask] = 1.0


def render(l: Layout, size: int = 512, node_radius: int = 4, edge_width: int = 1, edges=None) -> RasterImage:
    """Rasterize a normalized layout onto a black background."""
    if size < 16:
        raise RasterError(f"raster size must be >= 16, got {size}")
    X = l.coords
    if X.min() < -1e-9 or X.max() > 1 + 1e-9:
        raise RasterError(f"{l.graph_id}/{l.algorithm}: layout must be normalized before rendering")
    pixels = np.zeros((size, size))
    cols = np.clip(np.round(X[:, 0] * (size - 1)).astype(int), 0, size - 1)
    rows = np.clip(np.round((1.0 - X[:, 1]) * (size - 1)).astype(int), 0, size - 1)
    for u, v in edges or ():
        for r, c in _bresenham(rows[u], cols[u], rows[v], cols[v]):
            if edge_width <= 1:
                pixels[r, c] = 1.0
            else:
                _stamp_disc(pixels, r, c, edge_width / 2.0)
    for r, c in zip(rows, cols):
        _stamp_disc(pixels, r, c, node_radius)
    return RasterImage(pixels=pixels)


def write_pgm(img: RasterImage, path, binary: bool = True) -> None:
    levels = np.round(img.pixels * 255).astype(np.uint8)
    path = Path(path)
    header = f"P{'5' if binary else '2'}\n{img.size} {img.size}\n255\n"
    if binary:
        path.write_bytes(header.encode("ascii") + levels.tobytes())
    else:
        body = "\n".join(" ".join(str(v) for v in row) for row in levels)
        path.write_text(header + body + "\n", encoding="ascii")


def read_pgm(path) -> RasterImage:
    data = Path(path).read_bytes()
    if data[:2] == b"P5":
        parts = data.split(b"\n", 3)
        w, h = (int(x) for x in parts[1].split())
        levels = np.frombuffer(parts[3], dtype=np.uint8, count=w * h).reshape(h, w)
    elif data[:2] == b"P2":
        tokens = data.decode("ascii").split()
        w, h = int(tokens[1]), int(tokens[2])
        levels = np.array([int(t) for t in tokens[4 : 4 + w * h]], dtype=np.uint8).reshape(h, w)
    else:
        raise RasterError(f"{path}: not a P2/P5 portable graymap")
    return RasterImage(pixels=levels.astype(float) / 255.0)


def to_png_bytes(img: RasterImage) -> bytes:
    """Grayscale PNG encoding (used for service payloads and LLM image prompts)."""
    import struct
    import zlib

    levels = np.round(img.pixels * 255).astype(np.uint8)
    h, w = levels.shape
    raw = b"".join(b"\x00" + levels[r].tobytes() for r in range(h))

    def chunk(tag, payload):
        data = tag + payload
        return struct.pack(">I", len(payload)) + data + struct.pack(">I", zlib.crc32(data))

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", zlib.compress(raw, 9))
        + chunk(b"IEND", b"")
    )
