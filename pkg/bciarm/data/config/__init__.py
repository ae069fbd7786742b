from importlib import resources
from pathlib import Path

_config_dir = resources.files("bciarm.data.config")

geometry = Path(_config_dir.joinpath("geometry.toml")).resolve(strict=True)
colors = Path(_config_dir.joinpath("colors.toml")).resolve(strict=True)
scene = Path(_config_dir.joinpath("scene.toml")).resolve(strict=True)


all_config_files = [geometry, colors, scene]
