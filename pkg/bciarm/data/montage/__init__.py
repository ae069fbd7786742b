from importlib import resources
from pathlib import Path


_montage_dir = resources.files("bciarm.data.montage")

standard_1020 = Path(_montage_dir.joinpath("standard_1020.json")).resolve(strict=True)

all_montage_files = [standard_1020]
