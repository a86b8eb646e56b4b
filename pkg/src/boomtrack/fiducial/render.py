"""Marker rasterization: quiet zone, one-cell black border, inner code cells."""

from __future__ import annotations

import numpy as np

from boomtrack.fiducial.dictionary import MarkerDictionary
from boomtrack.frames import Frame


def marker_cells(d: MarkerDictionary, marker_id: int) -> np.ndarray:
    """The ``(grid+2)^2`` cell matrix (1 = white) including the black border ring."""
    if not 0 <= marker_id < len(d):
        raise IndexError(f"marker id {marker_id} out of range for {len(d)}-code dictionary")
    cells = np.zeros((d.grid + 2, d.grid + 2), dtype=np.uint8)
    cells[1:-1, 1:-1] = d.codes[marker_id]
    return cells


def render_marker(d: MarkerDictionary, marker_id: int, side: int, quiet_zone: int = 0) -> Frame:
    """Grayscale marker image of ``side + 2*quiet_zone`` pixels per edge.

    The marker square occupies ``[quiet_zone, quiet_zone + side)`` on both axes,
    so its outer corners sit at ``quiet_zone`` and ``quiet_zone + side`` in
    continuous pixel coordinates.
    """
    n = d.grid + 2
    if side <= 0 or side % n:
        raise ValueError(f"side {side} must be a positive multiple of {n} (grid {d.grid} plus border)")
    if quiet_zone < 0:
        raise ValueError("quiet_zone must be non-negative")
    cell = side // n
    body = np.kron(marker_cells(d, marker_id), np.ones((cell, cell), dtype=np.uint8)) * 255
    out = np.full((side + 2 * quiet_zone, side + 2 * quiet_zone), 255, dtype=np.uint8)
    out[quiet_zone : quiet_zone + side, quiet_zone : quiet_zone + side] = body
    return Frame(out)


def marker_corners(side: float, quiet_zone: float = 0.0, origin: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Clockwise outer corners (TL, TR, BR, BL) of a render placed at ``origin``."""
    x0 = origin[0] + quiet_zone
    y0 = origin[1] + quiet_zone
    return np.array([[x0, y0], [x0 + side, y0], [x0 + side, y0 + side], [x0, y0 + side]], dtype=float)
