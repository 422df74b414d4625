"""Grayscale software renderer, letterbox resize and PGM I/O."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import _kernels
from ..mesh import Mesh

RENDER_WIDTH = 256
RENDER_HEIGHT = 192
INPUT_SIZE = 220
AMBIENT = 0.2
ALBEDO = 0.8
BACKGROUND = 255


@dataclass(frozen=True)
class Camera:
    """Orbit camera around ``target``; y is up, azimuth is measured in the
    x-z plane from +x towards +z."""

    azimuth: float
    elevation: float
    distance: float
    fov: float = np.pi / 4
    target: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError("camera distance must be positive")

    @property
    def eye(self) -> np.ndarray:
        ce = np.cos(self.elevation)
        d = np.array([ce * np.cos(self.azimuth), np.sin(self.elevation), ce * np.sin(self.azimuth)])
        return np.asarray(self.target, dtype=np.float64) + self.distance * d

    def basis(self):
        """``(right, up, forward)`` unit vectors."""
        fwd = np.asarray(self.target, dtype=np.float64) - self.eye
        fwd /= np.linalg.norm(fwd)
        world_up = np.array([0.0, 1.0, 0.0])
        if abs(fwd @ world_up) > 1.0 - 1e-9:
            world_up = np.array([0.0, 0.0, 1.0])
        right = np.cross(fwd, world_up)
        right /= np.linalg.norm(right)
        up = np.cross(right, fwd)
        return right, up, fwd

    def to_camera(self, pts) -> np.ndarray:
        right, up, fwd = self.basis()
        rel = np.asarray(pts, dtype=np.float64) - self.eye
        return np.stack([rel @ right, rel @ up, rel @ fwd], axis=-1)

    def focal(self, height) -> float:
        return 0.5 * height / np.tan(0.5 * self.fov)

    def to_list(self):
        return [self.azimuth, self.elevation, self.distance, self.fov, *self.target]

    @classmethod
    def from_list(cls, vals):
        vals = [float(v) for v in vals]
        return cls(vals[0], vals[1], vals[2], vals[3], tuple(vals[4:7]))

    def to_dict(self):
        return asdict(self)


def render(mesh: Mesh, camera: Camera, width=RENDER_WIDTH, height=RENDER_HEIGHT,
           near=1e-3) -> np.ndarray:
    """Flat-shaded grayscale view, ``uint8 (height, width)``, white background.

    Each face gets ``255 * albedo * (ambient + (1 - ambient) |n . view|)``
    with the light at the eye. Faces reaching behind the near plane are
    dropped (no clipping).
    """
    img = np.full((height, width), BACKGROUND, dtype=np.uint8)
    if not mesh.n_faces:
        return img
    cam = camera.to_camera(mesh.vertices)
    z = cam[:, 2]
    tri_z = z[mesh.faces]
    keep = np.all(tri_z > near * camera.distance, axis=1)
    if not keep.any():
        return img
    faces = mesh.faces[keep]
    f = camera.focal(height)
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = 0.5 * width + f * cam[:, 0] / z
        sy = 0.5 * height - f * cam[:, 1] / z
        inv_z = 1.0 / z
    screen = np.ascontiguousarray(np.stack([sx, sy], axis=1)[faces])
    inv_depth = np.ascontiguousarray(inv_z[faces])
    t = cam[faces]
    n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
    nn = np.linalg.norm(n, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.where(nn > 0, np.abs(n[:, 2]) / nn, 0.0)
    shade = np.ascontiguousarray(255.0 * ALBEDO * (AMBIENT + (1.0 - AMBIENT) * cos))
    color, _ = _kernels.rasterize(screen, inv_depth, shade, int(width), int(height))
    drawn = ~np.isnan(color)
    img[drawn] = np.clip(np.rint(color[drawn]), 0, 255).astype(np.uint8)
    return img


def _bilinear(src, out_h, out_w):
    h, w = src.shape
    sy = h / out_h
    sx = w / out_w
    y = np.clip((np.arange(out_h) + 0.5) * sy - 0.5, 0, h - 1)
    x = np.clip((np.arange(out_w) + 0.5) * sx - 0.5, 0, w - 1)
    y0 = np.floor(y).astype(int)
    x0 = np.floor(x).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (y - y0)[:, None]
    fx = (x - x0)[None, :]
    s = src.astype(np.float64)
    top = s[y0][:, x0] * (1 - fx) + s[y0][:, x1] * fx
    bot = s[y1][:, x0] * (1 - fx) + s[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def resize_to_input(image, size=INPUT_SIZE) -> np.ndarray:
    """Aspect-preserving bilinear fit of the longer side to ``size``, centred
    on a white square canvas. Returns ``uint8 (size, size)``."""
    image = np.asarray(image)
    h, w = image.shape
    scale = size / max(h, w)
    nh, nw = int(round(h * scale)), int(round(w * scale))
    out = np.full((size, size), float(BACKGROUND))
    top, left = (size - nh) // 2, (size - nw) // 2
    out[top:top + nh, left:left + nw] = _bilinear(image, nh, nw)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def to_network_input(image) -> np.ndarray:
    """Pixels ``[0, 255]`` to ``[-1, 1]``; white maps to exactly +1."""
    return np.asarray(image, dtype=np.float64) / 127.5 - 1.0


def save_pgm(image, path) -> None:
    image = np.asarray(image, dtype=np.uint8)
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def load_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    pos += 1
    return np.frombuffer(data[pos:pos + w * h], dtype=np.uint8).reshape(h, w).copy()
