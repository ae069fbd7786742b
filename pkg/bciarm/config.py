"""Arm geometry, color thresholds and scenes live in TOML files rather than in
code. The packaged defaults sit in `bciarm.data.config`; every loader takes an
optional path and falls back to them.

"""

import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

import bciarm.data.config as defaults
import bciarm.vision as vision
from bciarm.kinematics import RobotGeometry

logger = logging.getLogger(__name__)

GEOMETRY_KEYS = ("L1", "L2", "L3", "L4", "La", "Lb", "base_height", "j1_position")
SCENE_KEYS = ("disk", "target_left", "target_right", "target_colors", "camera")


def _read(path: Path | None, default: Path) -> dict[str, Any]:
    path = Path(path) if path is not None else default
    logger.debug("reading configuration %s", path)
    with open(path, "rb") as f:
        return tomllib.load(f)


def _check_keys(table: dict[str, Any], allowed: tuple[str, ...], where: str) -> None:
    for key in table:
        if key not in allowed:
            raise ValueError(f"{where}: unknown key {key!r}")


def _pair(value: Any, name: str) -> tuple[float, float]:
    if not isinstance(value, list) or len(value) != 2:
        raise ValueError(f"{name} must be a list of two numbers")
    return (float(value[0]), float(value[1]))


def load_geometry(path: Path | None = None) -> RobotGeometry:
    table = _read(path, defaults.geometry)
    _check_keys(table, GEOMETRY_KEYS, "geometry")
    kwargs: dict[str, Any] = {k: float(v) for k, v in table.items() if k != "j1_position"}
    if "j1_position" in table:
        kwargs["j1_position"] = tuple(float(v) for v in table["j1_position"])
    return RobotGeometry(**kwargs)


def load_colors(path: Path | None = None) -> dict[str, vision.ColorSpec]:
    table = _read(path, defaults.colors)
    colors = dict(vision.DEFAULT_COLORS)
    for name, bounds in table.items():
        if name not in vision.DEFAULT_COLORS:
            raise ValueError(f"colors: unknown color {name!r}")
        if not isinstance(bounds, dict):
            raise ValueError(f"colors: [{name}] must be a table")
        _check_keys(bounds, ("lo", "hi"), f"colors.{name}")
        missing = [k for k in ("lo", "hi") if k not in bounds]
        if missing:
            raise ValueError(f"colors.{name}: missing key {missing[0]!r}")
        colors[name] = vision.ColorSpec(
            name, tuple(int(v) for v in bounds["lo"]), tuple(int(v) for v in bounds["hi"])
        )
    return colors


@dataclass(frozen=True, slots=True)
class SceneConfig:
    scene: vision.Scene
    camera: vision.Homography


def load_scene(path: Path | None = None) -> SceneConfig:
    table = _read(path, defaults.scene)
    _check_keys(table, SCENE_KEYS, "scene")
    try:
        kwargs: dict[str, Any] = {
            name: _pair(table[name], name) for name in ("disk", "target_left", "target_right")
        }
    except KeyError as e:
        raise ValueError(f"scene: missing key {e.args[0]!r}") from None
    if "target_colors" in table:
        a, b = table["target_colors"]
        kwargs["target_colors"] = (str(a), str(b))

    camera = (
        vision.Homography(np.array(table["camera"], dtype=float))
        if "camera" in table
        else vision.default_camera()
    )
    return SceneConfig(vision.Scene(**kwargs), camera)
