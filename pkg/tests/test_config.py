import numpy as np
import pytest

import bciarm.config as config
import bciarm.kinematics as kinematics
import bciarm.vision as vision


def test_packaged_geometry():
    assert config.load_geometry() == kinematics.RobotGeometry.default()


def test_packaged_colors():
    assert config.load_colors() == vision.DEFAULT_COLORS


def test_packaged_scene():
    loaded = config.load_scene()
    assert loaded.scene == vision.Scene((50.0, 200.0), (-100.0, 250.0), (100.0, 250.0))
    np.testing.assert_allclose(loaded.camera.matrix, vision.default_camera().matrix)


def test_geometry_override(tmp_path):
    path = tmp_path / "geometry.toml"
    path.write_text("L3 = 180.0\nj1_position = [0.0, 0.0, 36.0]\n")
    geom = config.load_geometry(path)
    assert geom.L3 == 180.0
    assert geom.L4 == 160.0
    assert geom.j1_position == (0.0, 0.0, 36.0)


def test_invalid_geometry(tmp_path):
    path = tmp_path / "geometry.toml"
    path.write_text("L2 = 90.0\n")
    with pytest.raises(kinematics.InvalidGeometry):
        config.load_geometry(path)


def test_color_override(tmp_path):
    path = tmp_path / "colors.toml"
    path.write_text("[blue]\nlo = [0, 0, 150]\nhi = [100, 100, 255]\n")
    colors = config.load_colors(path)
    assert colors["blue"].lo == (0, 0, 150)
    assert colors["cyan"] == vision.DEFAULT_COLORS["cyan"]


def test_scene_with_camera(tmp_path):
    path = tmp_path / "scene.toml"
    path.write_text(
        "disk = [0.0, 150.0]\n"
        "target_left = [-50.0, 300.0]\n"
        "target_right = [60.0, 300.0]\n"
        "camera = [[1.0, 0.0, 120.0], [0.0, 1.0, 40.0], [0.0, 0.0, 1.0]]\n"
    )
    loaded = config.load_scene(path)
    assert loaded.scene.disk == (0.0, 150.0)
    assert loaded.scene.target_colors == ("green", "red")
    assert loaded.camera.matrix[0, 2] == 120.0


@pytest.mark.parametrize(
    "loader, text",
    [
        (config.load_geometry, "L5 = 10.0\n"),
        (config.load_colors, "[purple]\nlo = [0, 0, 0]\nhi = [1, 1, 1]\n"),
        (config.load_colors, "[blue]\nlo = [0, 0, 0]\nhi = [1, 1, 1]\nmid = [0, 0, 0]\n"),
        (config.load_colors, "[blue]\nlo = [0, 0, 0]\n"),
        (config.load_scene, "disk = [0.0, 150.0]\n"),
        (config.load_scene, "disk = [0.0, 150.0, 3.0]\ntarget_left = [0, 1]\ntarget_right = [1, 1]\n"),
        (
            config.load_scene,
            "disk = [0.0, 150.0]\ntarget_left = [0, 1]\ntarget_right = [1, 1]\nlight = 3\n",
        ),
    ],
)
def test_bad_files(tmp_path, loader, text):
    path = tmp_path / "bad.toml"
    path.write_text(text)
    with pytest.raises(ValueError):
        loader(path)


def test_missing_color_bound_is_named(tmp_path):
    path = tmp_path / "colors.toml"
    path.write_text("[blue]\nhi = [80, 80, 255]\n")
    with pytest.raises(ValueError, match="colors.blue: missing key 'lo'"):
        config.load_colors(path)
