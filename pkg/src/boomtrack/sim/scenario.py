"""Scenario configuration and the seeded end-to-end simulator run.

Config files are plain ``key = value`` lines; ``#`` starts a comment and
``command = t, angle_deg, offset_m`` may repeat. Example::

    boom_length = 3.0
    frame_rate = 5
    duration = 20
    command = 0, 0, 0
    command = 4, 0, 0
    command = 5, 9.594068, 0
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from boomtrack._io import atomic_write_text
from boomtrack.detections import Detection, dumps_detections
from boomtrack.fiducial.dictionary import MarkerDictionary, generate_dictionary
from boomtrack.fiducial.render import render_marker
from boomtrack.frames import Frame, save_image
from boomtrack.incline import InclinometerReading, NoiseProfile, dumps_readings
from boomtrack.sim.boom import (
    BoomModel,
    CameraModel,
    MotionCommand,
    OutOfFrameError,
    command_at,
    frame_times,
    project,
    tip_position,
)
from boomtrack.sim.scene import BackgroundSpec, CorruptionSpec, make_background, render_scene, sample_corruption


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    boom: BoomModel = BoomModel()
    camera: CameraModel = CameraModel()
    commands: tuple[MotionCommand, ...] = ()
    duration: float = 10.0
    sensor_rate: float = 10.0
    interpolation: str = "linear"
    corruption: CorruptionSpec = CorruptionSpec()
    randomize_corruption: bool = False
    noise: NoiseProfile = NoiseProfile(-0.07, -0.03, trial_count=10, trial_duration=10.0)
    marker_size: float = 0.2  # marker edge in meters, excluding the quiet zone
    marker_id: int = 3
    dict_grid: int = 6
    dict_count: int = 50
    dict_min_hamming: int = 5
    dict_seed: int = 0
    color: str = "rgb"
    background: str = "crop"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.color not in ("rgb", "gray"):
            raise ConfigError(f"color must be rgb or gray, got {self.color!r}")
        if self.interpolation not in ("linear", "hold"):
            raise ConfigError(f"interpolation must be linear or hold, got {self.interpolation!r}")
        if not self.duration > 0 or not self.sensor_rate > 0:
            raise ConfigError("duration and sensor_rate must be positive")
        if not self.marker_size > 0:
            raise ConfigError("marker_size must be positive")
        for c in self.commands:
            tip_position(self.boom, c)  # range check up front


_BOOM_KEYS = {"boom_length": "length", "pivot_height": "pivot_height",
              "vertical_range": "vertical_range", "horizontal_range": "horizontal_range"}
_CAMERA_KEYS = {"pixel_pitch": "pixel_pitch", "width": "width", "height": "height",
                "principal_x": "principal_x", "principal_y": "principal_y",
                "frame_rate": "frame_rate", "depth": "depth"}
_CORRUPTION_KEYS = {"blur_sigma": "blur_sigma", "exposure": "exposure", "rotation_deg": "rotation"}
_NOISE_KEYS = {"noise_min_deg": "min_deflection", "noise_max_deg": "max_deflection"}
_TOP_KEYS = {f.name for f in dataclasses.fields(Scenario)} - {"boom", "camera", "commands", "corruption", "noise"}
_INT_FIELDS = {"width", "height", "marker_id", "dict_grid", "dict_count", "dict_min_hamming", "dict_seed", "seed"}


def _coerce(key: str, value: str, lineno: int):
    try:
        if key in _INT_FIELDS:
            return int(value)
        if key == "randomize_corruption":
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return value.lower() in ("true", "1", "yes")
        if key in ("color", "interpolation", "background"):
            return value
        return float(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from None


def parse_scenario(text: str, seed: int | None = None) -> Scenario:
    boom, cam, corr, noise, top = {}, {}, {}, {}, {}
    commands = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = key.strip(), value.strip()
        if key == "command":
            parts = [p.strip() for p in value.split(",")]
            if len(parts) != 3:
                raise ConfigError(f"line {lineno}: command needs t,angle_deg,offset_m")
            try:
                commands.append(MotionCommand(*(float(p) for p in parts)))
            except ValueError:
                raise ConfigError(f"line {lineno}: non-numeric command {value!r}") from None
        elif key in _BOOM_KEYS:
            boom[_BOOM_KEYS[key]] = _coerce(key, value, lineno)
        elif key in _CAMERA_KEYS:
            cam[_CAMERA_KEYS[key]] = _coerce(key, value, lineno)
        elif key in _CORRUPTION_KEYS:
            corr[_CORRUPTION_KEYS[key]] = _coerce(key, value, lineno)
        elif key in _NOISE_KEYS:
            noise[_NOISE_KEYS[key]] = _coerce(key, value, lineno)
        elif key in _TOP_KEYS:
            top[key] = _coerce(key, value, lineno)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    if seed is not None:
        top["seed"] = seed
    try:
        base_noise = Scenario.noise
        return Scenario(
            boom=BoomModel(**boom),
            camera=CameraModel(**cam),
            commands=tuple(sorted(commands, key=lambda c: c.t)),
            corruption=CorruptionSpec(seed=int(top.get("seed", 0)), **corr),
            noise=dataclasses.replace(base_noise, **noise),
            **top,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_scenario(path: str | os.PathLike, seed: int | None = None) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"), seed)


def dumps_scenario(s: Scenario) -> str:
    lines = [
        f"boom_length = {s.boom.length!r}",
        f"pivot_height = {s.boom.pivot_height!r}",
        f"vertical_range = {s.boom.vertical_range!r}",
        f"horizontal_range = {s.boom.horizontal_range!r}",
        f"pixel_pitch = {s.camera.pixel_pitch!r}",
        f"width = {s.camera.width}",
        f"height = {s.camera.height}",
        f"principal_x = {s.camera.principal_x!r}",
        f"principal_y = {s.camera.principal_y!r}",
        f"frame_rate = {s.camera.frame_rate!r}",
        f"depth = {s.camera.depth!r}",
        f"duration = {s.duration!r}",
        f"sensor_rate = {s.sensor_rate!r}",
        f"interpolation = {s.interpolation}",
        f"blur_sigma = {s.corruption.blur_sigma!r}",
        f"exposure = {s.corruption.exposure!r}",
        f"rotation_deg = {s.corruption.rotation!r}",
        f"randomize_corruption = {str(s.randomize_corruption).lower()}",
        f"noise_min_deg = {s.noise.min_deflection!r}",
        f"noise_max_deg = {s.noise.max_deflection!r}",
        f"marker_size = {s.marker_size!r}",
        f"marker_id = {s.marker_id}",
        f"dict_grid = {s.dict_grid}",
        f"dict_count = {s.dict_count}",
        f"dict_min_hamming = {s.dict_min_hamming}",
        f"dict_seed = {s.dict_seed}",
        f"color = {s.color}",
        f"background = {s.background}",
        f"seed = {s.seed}",
    ]
    lines += [f"command = {c.t!r}, {c.vertical_angle!r}, {c.horizontal_offset!r}" for c in s.commands]
    return "\n".join(lines) + "\n"


@dataclass
class ScenarioResult:
    dictionary: MarkerDictionary
    frames: list[Frame]
    truth: list[tuple[float, float, float]]  # (t, dx, dy)
    detections: list[Detection]
    readings: list[InclinometerReading]
    out_of_frame: list[float] = field(default_factory=list)  # timestamps
    corruptions: list[CorruptionSpec] = field(default_factory=list)


def marker_sprite(d: MarkerDictionary, marker_id: int, side_px: float) -> tuple[Frame, float]:
    """Marker render with a one-cell quiet zone, and its on-image size in pixels.

    Renders at the exact size when ``side_px`` is a whole number of cells,
    otherwise at 16 px per cell for the compositor to resample.
    """
    n = d.grid + 2
    cells = side_px / n
    total_px = side_px * (n + 2) / n
    if abs(cells - round(cells)) < 1e-9 and round(cells) >= 1:
        c = int(round(cells))
        return render_marker(d, marker_id, c * n, c), total_px
    return render_marker(d, marker_id, 16 * n, 16), total_px


def run_scenario(s: Scenario, keep_frames: bool = True) -> ScenarioResult:
    """Simulate the scenario in memory; see :func:`write_scenario` for files."""
    d = generate_dictionary(s.dict_grid, s.dict_count, s.dict_min_hamming, seed=s.dict_seed)
    cam = s.camera
    side_px = s.marker_size / cam.pixel_pitch
    sprite, total_px = marker_sprite(d, s.marker_id, side_px)
    channels = 3 if s.color == "rgb" else 1
    canvas = make_background(
        cam.width, cam.height, BackgroundSpec(kind=s.background, seed=s.seed), channels=channels
    )

    rng = np.random.default_rng(s.seed)
    corr_rng = np.random.default_rng([s.seed, 1])
    h0, v0 = tip_position(s.boom, command_at(s.commands, 0.0, s.interpolation))
    frames, truth, dets, gone, corrs = [], [], [], [], []
    for t in frame_times(cam.frame_rate, s.duration):
        t = float(t)
        hz, vt = tip_position(s.boom, command_at(s.commands, t, s.interpolation))
        truth.append((t, hz - h0, vt - v0))
        corr = sample_corruption(s.corruption, corr_rng) if s.randomize_corruption else s.corruption
        corrs.append(corr)
        try:
            center = project(cam, (hz, vt), margin=total_px / 2, check=True)
        except OutOfFrameError:
            center = None
            gone.append(t)
        if center is not None:
            theta = math.radians(corr.rotation)
            extent = side_px * (abs(math.cos(theta)) + abs(math.sin(theta)))
            dets.append(Detection(t, center[0], center[1], extent, extent, 1.0, 1.0, class_id=0))
        if keep_frames:
            frames.append(render_scene(canvas, sprite, center, corr, total_px, timestamp=t))

    readings = []
    for t in frame_times(s.sensor_rate, s.duration):
        t = float(t)
        cmd = command_at(s.commands, t, s.interpolation)
        noise = float(rng.uniform(s.noise.min_deflection, s.noise.max_deflection))
        readings.append(InclinometerReading(t, cmd.vertical_angle + noise))
    return ScenarioResult(d, frames, truth, dets, readings, gone, corrs)


def dumps_truth(truth: list[tuple[float, float, float]]) -> str:
    buf = io.StringIO()
    buf.write("t_s,dx_m,dy_m\n")
    for t, dx, dy in truth:
        buf.write(f"{t:.6f},{dx + 0.0:.6f},{dy + 0.0:.6f}\n")
    return buf.getvalue()


def load_truth(path: str | os.PathLike) -> list[tuple[float, float, float]]:
    rows = Path(path).read_text(encoding="utf-8").splitlines()
    if not rows or rows[0].strip() != "t_s,dx_m,dy_m":
        raise ValueError(f"{path}: expected header t_s,dx_m,dy_m")
    return [tuple(float(v) for v in r.split(",")) for r in rows[1:] if r.strip()]  # type: ignore[misc]


def write_scenario(s: Scenario, out_dir: str | os.PathLike) -> ScenarioResult:
    """Run the scenario and write frames, truth, ideal detections, sensor trace and dictionary."""
    out = Path(out_dir)
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    res = run_scenario(s)
    ext = "ppm" if s.color == "rgb" else "pgm"
    names = {}
    for i, f in enumerate(res.frames):
        names[f.timestamp] = f"frame_{i:05d}.{ext}"
        save_image(f, frames_dir / names[f.timestamp], write_meta=True)
    atomic_write_text(out / "truth.csv", dumps_truth(res.truth))
    # image names let the ideal records double as ground truth for `eval`
    atomic_write_text(out / "detections_truth.jsonl", dumps_detections(_rounded(res.detections, names)))
    atomic_write_text(out / "sensor.csv", dumps_readings(res.readings))
    res.dictionary.save(out / "dict.txt")
    atomic_write_text(out / "scenario.cfg", dumps_scenario(s))
    return res


def _rounded(dets: list[Detection], names: dict[float, str]) -> list[Detection]:
    # fixed precision keeps the JSONL byte-stable across platforms
    return [
        Detection(
            round(d.t, 6), round(d.cx, 6), round(d.cy, 6), round(d.w, 6), round(d.h, 6),
            d.objectness, d.class_prob, image=names.get(d.t),
        )
        for d in dets
    ]


def summarize(res: ScenarioResult) -> str:
    return json.dumps(
        {
            "frames": len(res.truth),
            "detections": len(res.detections),
            "out_of_frame": len(res.out_of_frame),
            "readings": len(res.readings),
        }
    )
