"""Lab boom kinematics and the calibrated-scale pinhole camera."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class RangeViolation(ValueError):
    pass


class OutOfFrameError(ValueError):
    pass


@dataclass(frozen=True)
class BoomModel:
    length: float = 3.0  # pivot to tip, meters
    pivot_height: float = 1.7
    vertical_range: float = 1.2  # |vertical tip travel| allowed, meters
    horizontal_range: float = 3.0  # |fore-aft articulation| allowed, meters

    def __post_init__(self) -> None:
        if not self.length > 0:
            raise ValueError(f"boom length must be positive, got {self.length}")
        if self.vertical_range < 0 or self.horizontal_range < 0:
            raise ValueError("ranges must be non-negative")


LAB_BOOM = BoomModel()
FIELD_HALF_BOOM = BoomModel(length=18.2, pivot_height=1.7, vertical_range=2.0, horizontal_range=3.0)


@dataclass(frozen=True)
class MotionCommand:
    t: float
    vertical_angle: float = 0.0  # degrees
    horizontal_offset: float = 0.0  # meters


def tip_position(b: BoomModel, cmd: MotionCommand) -> tuple[float, float]:
    """``(horizontal, vertical)`` tip offset in meters from the rest pose."""
    vertical = b.length * math.sin(math.radians(cmd.vertical_angle))
    horizontal = cmd.horizontal_offset
    if abs(vertical) > b.vertical_range + 1e-12:
        raise RangeViolation(f"vertical travel {vertical:.4f} m exceeds +/-{b.vertical_range} m")
    if abs(horizontal) > b.horizontal_range + 1e-12:
        raise RangeViolation(f"horizontal offset {horizontal:.4f} m exceeds +/-{b.horizontal_range} m")
    return horizontal, vertical


def angle_for_vertical(b: BoomModel, vertical: float) -> float:
    """Actuator angle in degrees that lifts the tip by ``vertical`` meters."""
    if abs(vertical) > b.length:
        raise RangeViolation(f"cannot lift {vertical} m with a {b.length} m boom")
    return math.degrees(math.asin(vertical / b.length))


def command_at(commands: Sequence[MotionCommand], t: float, interpolation: str = "linear") -> MotionCommand:
    """Command in force at ``t``: piecewise linear (or held) between keyframes."""
    if not commands:
        return MotionCommand(t)
    cmds = sorted(commands, key=lambda c: c.t)
    if t <= cmds[0].t:
        return MotionCommand(t, cmds[0].vertical_angle, cmds[0].horizontal_offset)
    for a, b in zip(cmds, cmds[1:]):
        if a.t <= t < b.t:
            if interpolation == "hold" or b.t == a.t:
                return MotionCommand(t, a.vertical_angle, a.horizontal_offset)
            f = (t - a.t) / (b.t - a.t)
            return MotionCommand(
                t,
                a.vertical_angle + f * (b.vertical_angle - a.vertical_angle),
                a.horizontal_offset + f * (b.horizontal_offset - a.horizontal_offset),
            )
    last = cmds[-1]
    return MotionCommand(t, last.vertical_angle, last.horizontal_offset)


@dataclass(frozen=True)
class CameraModel:
    pixel_pitch: float = 0.003196  # meters per pixel at the target depth
    width: int = 1920
    height: int = 1200
    principal_x: float | None = None  # defaults to the frame center
    principal_y: float | None = None
    frame_rate: float = 10.0
    depth: float = 18.2

    def __post_init__(self) -> None:
        if not self.pixel_pitch > 0:
            raise ValueError("pixel_pitch must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("frame dimensions must be positive")
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be positive")
        if self.principal_x is None:
            object.__setattr__(self, "principal_x", self.width / 2)
        if self.principal_y is None:
            object.__setattr__(self, "principal_y", self.height / 2)

    @property
    def scale(self) -> float:
        """Pixels per meter at depth."""
        return 1.0 / self.pixel_pitch


def project(cam: CameraModel, pos: tuple[float, float], *, margin: float = 0.0, check: bool = False) -> tuple[float, float]:
    """Image position of a tip offset ``(horizontal, vertical)``; image y points down.

    With ``check`` an :class:`OutOfFrameError` is raised when the point lies
    closer than ``margin`` pixels to the frame edge.
    """
    cx = cam.principal_x + pos[0] / cam.pixel_pitch
    cy = cam.principal_y - pos[1] / cam.pixel_pitch
    if check and not (margin <= cx <= cam.width - margin and margin <= cy <= cam.height - margin):
        raise OutOfFrameError(f"target at ({cx:.1f}, {cy:.1f}) px is outside the {cam.width}x{cam.height} frame")
    return cx, cy


def unproject(cam: CameraModel, cx: float, cy: float) -> tuple[float, float]:
    return (cx - cam.principal_x) * cam.pixel_pitch, (cam.principal_y - cy) * cam.pixel_pitch


def frame_times(rate: float, duration: float) -> np.ndarray:
    n = int(round(duration * rate))
    return np.arange(n) / rate
