"""Synthetic scene rendering: crop-like background, marker compositing, corruptions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from boomtrack.frames import Frame, to_grayscale

GREEN = np.array([62.0, 112.0, 44.0])
TAN = np.array([186.0, 168.0, 118.0])

MAX_BLUR = 2.5
MAX_EXPOSURE = 0.25
MAX_ROTATION = 20.0


@dataclass(frozen=True)
class CorruptionSpec:
    blur_sigma: float = 0.0  # pixels
    exposure: float = 0.0  # fractional brightness change
    rotation: float = 0.0  # in-plane marker rotation, degrees
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.blur_sigma <= MAX_BLUR:
            raise ValueError(f"blur_sigma must lie in [0, {MAX_BLUR}], got {self.blur_sigma}")
        if not -MAX_EXPOSURE <= self.exposure <= MAX_EXPOSURE:
            raise ValueError(f"exposure must lie in [-{MAX_EXPOSURE}, {MAX_EXPOSURE}], got {self.exposure}")
        if not -MAX_ROTATION <= self.rotation <= MAX_ROTATION:
            raise ValueError(f"rotation must lie in [-{MAX_ROTATION}, {MAX_ROTATION}], got {self.rotation}")


CLEAN = CorruptionSpec()


def sample_corruption(bound: CorruptionSpec, rng: np.random.Generator) -> CorruptionSpec:
    """Draw blur in [0, bound], exposure and rotation in [-bound, +bound]."""
    return CorruptionSpec(
        blur_sigma=float(rng.uniform(0.0, bound.blur_sigma)),
        exposure=float(rng.uniform(-abs(bound.exposure), abs(bound.exposure))),
        rotation=float(rng.uniform(-abs(bound.rotation), abs(bound.rotation))),
        seed=bound.seed,
    )


@dataclass(frozen=True)
class BackgroundSpec:
    kind: str = "crop"  # "crop" (procedural texture) or "plain"
    seed: int = 0
    level: int = 255  # fill value for plain backgrounds
    grain: float = 2.0  # per-pixel noise sigma, gray levels
    feature_px: int = 48  # size of the low-frequency texture blobs


def make_background(width: int, height: int, spec: BackgroundSpec = BackgroundSpec(), channels: int = 3) -> np.ndarray:
    """Background raster (HxW or HxWx3, uint8)."""
    if spec.kind == "plain":
        shape = (height, width) if channels == 1 else (height, width, 3)
        return np.full(shape, spec.level, dtype=np.uint8)
    if spec.kind != "crop":
        raise ValueError(f"unknown background kind {spec.kind!r}")
    rng = np.random.default_rng(spec.seed)
    gh = max(2, math.ceil(height / spec.feature_px) + 1)
    gw = max(2, math.ceil(width / spec.feature_px) + 1)
    coarse = rng.random((gh, gw))
    field = ndimage.zoom(coarse, (height / (gh - 1), width / (gw - 1)), order=3, mode="nearest")[:height, :width]
    if field.shape != (height, width):
        field = np.pad(field, ((0, height - field.shape[0]), (0, width - field.shape[1])), mode="edge")
    field = np.clip(field, 0.0, 1.0)
    rgb = GREEN[None, None, :] * (1 - field[..., None]) + TAN[None, None, :] * field[..., None]
    rgb += rng.normal(0.0, spec.grain, size=rgb.shape)
    img = np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)
    if channels == 1:
        return to_grayscale(Frame(img)).pixels.copy()
    return img


def _bilinear(src: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear samples of ``src`` at continuous coordinates (pixel centers at +0.5)."""
    coords = np.vstack([v.ravel() - 0.5, u.ravel() - 0.5])
    if src.ndim == 2:
        return ndimage.map_coordinates(src, coords, order=1, mode="nearest").reshape(u.shape)
    return np.stack(
        [ndimage.map_coordinates(src[..., c], coords, order=1, mode="nearest").reshape(u.shape) for c in range(3)],
        axis=-1,
    )


def composite(
    canvas: np.ndarray,
    sprite: np.ndarray,
    center: tuple[float, float],
    size_px: float | None = None,
    rotation_deg: float = 0.0,
    supersample: int = 4,
) -> np.ndarray:
    """Paste ``sprite`` (square, gray) centered at ``center`` and scaled to ``size_px``.

    Integer-aligned, unscaled, unrotated placements copy pixels verbatim;
    everything else is area-sampled with ``supersample``^2 bilinear taps per
    output pixel, blended against the canvas where taps fall outside the sprite.
    """
    out = canvas.astype(np.float64).copy()
    m = sprite.shape[0]
    size = float(m if size_px is None else size_px)
    s = size / m
    ox, oy = center[0] - size / 2, center[1] - size / 2
    h, w = canvas.shape[:2]
    if rotation_deg == 0.0 and s == 1.0 and float(ox).is_integer() and float(oy).is_integer():
        x0, y0 = int(ox), int(oy)
        xs0, ys0 = max(0, -x0), max(0, -y0)
        xs1, ys1 = min(m, w - x0), min(m, h - y0)
        if xs1 > xs0 and ys1 > ys0:
            patch = sprite[ys0:ys1, xs0:xs1].astype(np.float64)
            region = out[y0 + ys0 : y0 + ys1, x0 + xs0 : x0 + xs1]
            region[...] = patch[..., None] if out.ndim == 3 else patch
        return np.clip(out, 0, 255).astype(np.uint8)

    theta = math.radians(rotation_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    half = size / 2 * (abs(cos_t) + abs(sin_t))
    x0 = max(0, int(math.floor(center[0] - half)) - 1)
    x1 = min(w, int(math.ceil(center[0] + half)) + 1)
    y0 = max(0, int(math.floor(center[1] - half)) - 1)
    y1 = min(h, int(math.ceil(center[1] + half)) + 1)
    if x1 <= x0 or y1 <= y0:
        return canvas.copy()
    k = supersample
    sub = (np.arange(k) + 0.5) / k
    ys = (np.arange(y0, y1)[:, None] + sub[None, :]).ravel()
    xs = (np.arange(x0, x1)[:, None] + sub[None, :]).ravel()
    X, Y = np.meshgrid(xs, ys)
    dx, dy = X - center[0], Y - center[1]
    # inverse rotation (positive angle turns the sprite clockwise on screen)
    u = (cos_t * dx + sin_t * dy) / s + m / 2
    v = (-sin_t * dx + cos_t * dy) / s + m / 2
    inside = (u >= 0) & (u < m) & (v >= 0) & (v < m)
    vals = _bilinear(sprite.astype(np.float64), u, v)
    ny, nx = y1 - y0, x1 - x0
    cover = inside.reshape(ny, k, nx, k).mean(axis=(1, 3))
    val = np.where(inside, vals, 0.0).reshape(ny, k, nx, k).sum(axis=(1, 3)) / (k * k)
    region = out[y0:y1, x0:x1]
    if out.ndim == 3:
        region[...] = region * (1 - cover[..., None]) + val[..., None]
    else:
        region[...] = region * (1 - cover) + val
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def apply_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return img
    f = img.astype(np.float64)
    if f.ndim == 2:
        f = ndimage.gaussian_filter(f, sigma, mode="nearest")
    else:
        f = np.stack([ndimage.gaussian_filter(f[..., c], sigma, mode="nearest") for c in range(3)], axis=-1)
    return np.clip(np.floor(f + 0.5), 0, 255).astype(np.uint8)


def apply_exposure(img: np.ndarray, exposure: float) -> np.ndarray:
    if exposure == 0:
        return img
    f = img.astype(np.float64) * (1.0 + exposure)
    return np.clip(np.floor(f + 0.5), 0, 255).astype(np.uint8)


def render_scene(
    canvas: np.ndarray,
    marker: Frame | None,
    center: tuple[float, float] | None,
    corruption: CorruptionSpec = CLEAN,
    marker_px: float | None = None,
    timestamp: float = 0.0,
) -> Frame:
    """Composite ``marker`` at ``center`` onto ``canvas``, then blur and expose.

    ``marker`` of ``None`` (or ``center`` of ``None``) renders background only,
    as when the target has left the field of view.
    """
    img = np.asarray(canvas)
    if marker is not None and center is not None:
        img = composite(img, marker.pixels, center, marker_px, corruption.rotation)
    img = apply_blur(img, corruption.blur_sigma)
    img = apply_exposure(img, corruption.exposure)
    return Frame(img, timestamp)


def occlude(frame: Frame, x0: int, y0: int, x1: int, y1: int, texture: np.ndarray) -> Frame:
    """Cover ``[x0, x1) x [y0, y1)`` with the matching region of ``texture``."""
    img = frame.pixels.copy()
    tex = texture
    if img.ndim == 2 and tex.ndim == 3:
        tex = to_grayscale(Frame(tex)).pixels
    elif img.ndim == 3 and tex.ndim == 2:
        tex = np.repeat(tex[..., None], 3, axis=2)
    img[y0:y1, x0:x1] = tex[y0:y1, x0:x1]
    return Frame(img, frame.timestamp)
