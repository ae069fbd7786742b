"""Locating the disk and the two target stickers on the table.

Four colored square markers sit at known positions in the corners of a
400 x 400 mm square on the table. Their centroids in the camera image give four
pixel/plane correspondences, which fix the homography from pixels to table
millimeters. The centroids of the disk and targets are mapped through it and
then into the robot frame.

`render_scene` does the opposite: it paints a scene in the table plane and
warps it into a camera image. It is the oracle the pipeline is tested against.

Pixel coordinates are (x, y) = (column, row), with integer values at pixel
centers.

"""

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Mapping, Sequence, TypeAlias

import numpy as np
import optree
import scipy.ndimage

logger = logging.getLogger(__name__)

DEFAULT_WIDTH = 640
DEFAULT_HEIGHT = 480

TABLE_SIZE = 400.0
MARKER_SIZE = 30.0
DISK_RADIUS = 13.0
DISK_HEIGHT = 6.0
TARGET_RADIUS = 42.0

MarkerColor: TypeAlias = Literal["cyan", "orange", "magenta", "yellow"]

# Marker centroids in the plane frame (mm).
MARKER_POSITIONS: dict[str, tuple[float, float]] = {
    "cyan": (15.0, 15.0),
    "orange": (385.0, 15.0),
    "magenta": (15.0, 385.0),
    "yellow": (385.0, 385.0),
}

PAINT: dict[str, tuple[int, int, int]] = {
    "cyan": (0, 255, 255),
    "orange": (255, 165, 0),
    "magenta": (255, 0, 255),
    "yellow": (255, 255, 0),
    "blue": (0, 0, 255),
    "green": (0, 255, 0),
    "red": (255, 0, 0),
    "table": (255, 255, 255),
    "background": (64, 64, 64),
}

NOISE_SIGMA: dict[str, float] = {"none": 0.0, "low": 8.0, "high": 20.0}
NoiseLevel: TypeAlias = Literal["none", "low", "high"]


class VisionError(Exception):
    pass


class MarkerNotFound(VisionError):
    pass


class AmbiguousMarker(VisionError):
    pass


class ItemNotFound(VisionError):
    pass


class TargetTie(VisionError):
    pass


class DegenerateCorrespondences(VisionError):
    pass


class PointAtInfinity(VisionError):
    pass


class OffFrame(VisionError):
    pass


class PpmFormatError(VisionError):
    pass


# Images


@dataclass(frozen=True, slots=True, eq=False)
class RasterImage:
    """Row-major RGB image, shape (height, width, 3), 8 bits per channel."""

    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"expected (height, width, 3) pixels, got {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {self.pixels.dtype}")

    @classmethod
    def filled(
        cls,
        color: Sequence[int],
        width: int = DEFAULT_WIDTH,
        height: int = DEFAULT_HEIGHT,
    ) -> "RasterImage":
        pixels = np.empty((height, width, 3), dtype=np.uint8)
        pixels[:] = np.asarray(color, dtype=np.uint8)
        return cls(pixels)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def write_ppm(img: RasterImage, path: Path) -> None:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(img.pixels).tobytes())


def read_ppm(path: Path) -> RasterImage:
    with open(path, "rb") as f:
        data = f.read()

    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PpmFormatError(f"{path}: truncated header")
        tokens.append(data[start:pos])
    # Exactly one whitespace byte separates the header from the raster.
    pos += 1

    magic, w, h, maxval = tokens
    if magic != b"P6":
        raise PpmFormatError(f"{path}: not a binary PPM (magic {magic!r})")
    try:
        width, height, depth = int(w), int(h), int(maxval)
    except ValueError:
        raise PpmFormatError(f"{path}: malformed header") from None
    if depth != 255:
        raise PpmFormatError(f"{path}: only maxval 255 is supported, got {depth}")

    raster = data[pos : pos + width * height * 3]
    if len(raster) != width * height * 3:
        raise PpmFormatError(
            f"{path}: expected {width * height * 3} raster bytes, got {len(raster)}"
        )
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3).copy()
    return RasterImage(pixels)


# Segmentation


@dataclass(frozen=True, slots=True)
class ColorSpec:
    name: str
    lo: tuple[int, int, int]
    hi: tuple[int, int, int]

    def __post_init__(self):
        if len(self.lo) != 3 or len(self.hi) != 3:
            raise ValueError(f"{self.name}: bounds must have 3 channels")
        for channel, (lo, hi) in zip("RGB", zip(self.lo, self.hi)):
            if not 0 <= lo <= hi <= 255:
                raise ValueError(
                    f"{self.name}: channel {channel} needs 0 <= lo <= hi <= 255, got [{lo}, {hi}]"
                )


DEFAULT_COLORS: dict[str, ColorSpec] = {
    spec.name: spec
    for spec in (
        ColorSpec("cyan", (0, 200, 200), (80, 255, 255)),
        ColorSpec("orange", (200, 120, 0), (255, 199, 80)),
        ColorSpec("magenta", (200, 0, 200), (255, 80, 255)),
        ColorSpec("yellow", (200, 200, 0), (255, 255, 80)),
        ColorSpec("blue", (0, 0, 200), (80, 80, 255)),
        ColorSpec("green", (0, 200, 0), (80, 255, 80)),
        ColorSpec("red", (200, 0, 0), (255, 80, 80)),
    )
}


def segment_color(img: RasterImage, spec: ColorSpec) -> np.ndarray:
    """Boolean mask of the pixels whose three channels are all within bounds."""
    lo = np.asarray(spec.lo, dtype=np.uint8)
    hi = np.asarray(spec.hi, dtype=np.uint8)
    return np.all((img.pixels >= lo) & (img.pixels <= hi), axis=2)


@dataclass(frozen=True, slots=True)
class Component:
    area: int
    centroid: tuple[float, float]


_FOUR_CONNECTED = scipy.ndimage.generate_binary_structure(2, 1)


def connected_components(mask: np.ndarray, min_area: int = 20) -> list[Component]:
    """4-connected components of a mask, largest first, then by (y, x)."""
    labels, n = scipy.ndimage.label(mask, structure=_FOUR_CONNECTED)
    if n == 0:
        return []

    index = np.arange(1, n + 1)
    areas = scipy.ndimage.sum_labels(np.ones_like(labels), labels, index)
    rows, cols = np.indices(labels.shape)
    ys = scipy.ndimage.mean(rows, labels, index)
    xs = scipy.ndimage.mean(cols, labels, index)

    components = [
        Component(int(a), (float(x), float(y)))
        for a, x, y in zip(areas, xs, ys)
        if a >= min_area
    ]
    components.sort(key=lambda c: (-c.area, c.centroid[1], c.centroid[0]))
    return components


# Homographies


@dataclass(frozen=True, slots=True, eq=False)
class Homography:
    """3 x 3 projective map, scaled so that the bottom-right entry is 1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"a homography is 3 x 3, got {m.shape}")
        if abs(m[2, 2]) > 1e-12:
            m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-12 * max(np.abs(m).max(), 1.0) ** 3:
            raise DegenerateCorrespondences("homography is not invertible")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def __matmul__(self, other: "Homography") -> "Homography":
        return Homography(self.matrix @ other.matrix)


def apply_homography(h: Homography, p: Sequence[float]) -> np.ndarray:
    """(u, v) -> (x, y) through homogeneous coordinates."""
    x, y, w = h.matrix @ np.array([p[0], p[1], 1.0])
    if abs(w) <= 1e-12 * max(abs(x), abs(y), 1.0):
        raise PointAtInfinity(f"{tuple(p)} maps to infinity")
    return np.array([x / w, y / w])


def _normalizing_transform(points: np.ndarray) -> np.ndarray:
    center = points.mean(axis=0)
    spread = np.mean(np.linalg.norm(points - center, axis=1))
    s = math.sqrt(2) / spread
    return np.array([[s, 0, -s * center[0]], [0, s, -s * center[1]], [0, 0, 1]])


def _collinear(a: np.ndarray, b: np.ndarray, c: np.ndarray, rel: float = 1e-9) -> bool:
    u, v = b - a, c - a
    return abs(u[0] * v[1] - u[1] * v[0]) <= rel * np.linalg.norm(u) * np.linalg.norm(v)


def estimate_homography(
    correspondences: Sequence[tuple[Sequence[float], Sequence[float]]],
) -> Homography:
    """Exact homography from four (source, destination) point pairs.

    Eight equations in the eight unknowns h11..h32 with h33 = 1, solved on
    points normalized to zero mean and mean radius sqrt(2).
    """
    if len(correspondences) != 4:
        raise DegenerateCorrespondences(
            f"exactly 4 correspondences are needed, got {len(correspondences)}"
        )
    src = np.array([c[0] for c in correspondences], dtype=float)
    dst = np.array([c[1] for c in correspondences], dtype=float)

    for i in range(4):
        for j in range(i + 1, 4):
            if np.allclose(src[i], src[j], rtol=0, atol=1e-9):
                raise DegenerateCorrespondences(f"source points {i} and {j} coincide")
    for skip in range(4):
        a, b, c = (dst[k] for k in range(4) if k != skip)
        if _collinear(a, b, c):
            raise DegenerateCorrespondences("three destination points are collinear")

    t_src = _normalizing_transform(src)
    t_dst = _normalizing_transform(dst)
    s = (t_src @ np.column_stack([src, np.ones(4)]).T).T
    d = (t_dst @ np.column_stack([dst, np.ones(4)]).T).T

    a = np.zeros((8, 8))
    b = np.zeros(8)
    for k in range(4):
        x, y = s[k, 0], s[k, 1]
        xp, yp = d[k, 0], d[k, 1]
        a[2 * k] = [x, y, 1, 0, 0, 0, -x * xp, -y * xp]
        a[2 * k + 1] = [0, 0, 0, x, y, 1, -x * yp, -y * yp]
        b[2 * k] = xp
        b[2 * k + 1] = yp

    if np.linalg.cond(a) > 1e12:
        raise DegenerateCorrespondences("rank-deficient correspondence system")
    h = np.append(np.linalg.solve(a, b), 1.0).reshape(3, 3)
    return Homography(np.linalg.inv(t_dst) @ h @ t_src)


def plane_to_robot_frame(p: Sequence[float]) -> np.ndarray:
    """Plane (0, 0) is robot (-200, 400) and plane (400, 400) is robot (200, 0)."""
    return np.array([p[0] - TABLE_SIZE / 2, TABLE_SIZE - p[1]])


def robot_to_plane_frame(p: Sequence[float]) -> np.ndarray:
    return np.array([p[0] + TABLE_SIZE / 2, TABLE_SIZE - p[1]])


# Scenes


@dataclass(frozen=True, slots=True)
class Scene:
    """Item positions in the robot frame (mm).

    `target_colors` names the sticker colors of the left and right targets.
    """

    disk: tuple[float, float]
    target_left: tuple[float, float]
    target_right: tuple[float, float]
    target_colors: tuple[str, str] = ("green", "red")
    markers: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: dict(MARKER_POSITIONS)
    )

    def __post_init__(self):
        for name in ("disk", "target_left", "target_right"):
            x, y = getattr(self, name)
            if not (-TABLE_SIZE / 2 <= x <= TABLE_SIZE / 2 and 0 <= y <= TABLE_SIZE):
                raise ValueError(f"{name} {(x, y)} is outside the table square")

    def items(self) -> dict[str, tuple[float, float]]:
        return {
            "disk": self.disk,
            "target_left": self.target_left,
            "target_right": self.target_right,
        }

    def mirrored(self) -> "Scene":
        """Mirror image about x = 0. Left and right swap."""

        def flip(p: tuple[float, float]) -> tuple[float, float]:
            return (-p[0], p[1])

        return replace(
            self,
            disk=flip(self.disk),
            target_left=flip(self.target_right),
            target_right=flip(self.target_left),
            target_colors=(self.target_colors[1], self.target_colors[0]),
        )


def _overlaps_marker(center: np.ndarray, radius: float, margin: float) -> bool:
    half = MARKER_SIZE / 2 + margin
    for mx, my in MARKER_POSITIONS.values():
        dx = max(abs(center[0] - mx) - half, 0.0)
        dy = max(abs(center[1] - my) - half, 0.0)
        if math.hypot(dx, dy) < radius:
            return True
    return False


def random_scene(
    rng: np.random.Generator,
    x_range: tuple[float, float] = (-150.0, 150.0),
    y_range: tuple[float, float] = (60.0, 300.0),
    margin: float = 5.0,
    max_tries: int = 1000,
) -> Scene:
    """Non-overlapping disk and targets clear of the markers.

    The default region keeps every item within reach of the default arm.
    """
    radii = (DISK_RADIUS, TARGET_RADIUS, TARGET_RADIUS)
    for _ in range(max_tries):
        centers = [
            np.array([rng.uniform(*x_range), rng.uniform(*y_range)]) for _ in radii
        ]
        if any(
            _overlaps_marker(robot_to_plane_frame(c), r, margin)
            for c, r in zip(centers, radii)
        ):
            continue
        if any(
            np.linalg.norm(centers[i] - centers[j]) < radii[i] + radii[j] + margin
            for i in range(3)
            for j in range(i + 1, 3)
        ):
            continue
        disk, a, b = (tuple(float(v) for v in c) for c in centers)
        if a[0] == b[0]:
            continue
        left, right = (a, b) if a[0] < b[0] else (b, a)
        return Scene(disk, left, right)
    raise VisionError(f"could not place the items in {max_tries} tries")


def default_camera() -> Homography:
    """Plane-to-pixel map centering the square in a 640 x 480 frame."""
    s = 1.1
    return Homography(
        np.array(
            [
                [s, 0.0, (DEFAULT_WIDTH - s * TABLE_SIZE) / 2],
                [0.0, s, (DEFAULT_HEIGHT - s * TABLE_SIZE) / 2],
                [0.0, 0.0, 1.0],
            ]
        )
    )


_TABLE_CORNERS = ((0.0, 0.0), (TABLE_SIZE, 0.0), (0.0, TABLE_SIZE), (TABLE_SIZE, TABLE_SIZE))


def _in_frame(camera: Homography, width: int, height: int, margin: float = 0.0) -> bool:
    for corner in _TABLE_CORNERS:
        try:
            u, v = apply_homography(camera, corner)
        except PointAtInfinity:
            return False
        if not (margin <= u <= width - 1 - margin and margin <= v <= height - 1 - margin):
            return False
    return True


def random_camera(
    rng: np.random.Generator,
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
    max_tries: int = 1000,
) -> Homography:
    """A mild perspective view of the table square.

    Scale 0.9 to 1.05 px/mm, an in-plane rotation of 2 to 6 degrees either way
    and perspective terms up to 1e-4 per mm, about the center of the square.
    The rotation stays clear of zero so that marker edges do not line up with
    the pixel grid.
    """
    half = TABLE_SIZE / 2
    to_center = np.array([[1.0, 0.0, -half], [0.0, 1.0, -half], [0.0, 0.0, 1.0]])
    for _ in range(max_tries):
        s = rng.uniform(0.9, 1.05)
        angle = math.radians(rng.uniform(2.0, 6.0)) * rng.choice([-1.0, 1.0])
        px, py = rng.uniform(-1e-4, 1e-4, size=2)
        c, sn = math.cos(angle), math.sin(angle)
        rotate = np.array([[s * c, -s * sn, 0.0], [s * sn, s * c, 0.0], [0.0, 0.0, 1.0]])
        tilt = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [px, py, 1.0]])
        shift = np.array(
            [
                [1.0, 0.0, width / 2 + rng.uniform(-10, 10)],
                [0.0, 1.0, height / 2 + rng.uniform(-5, 5)],
                [0.0, 0.0, 1.0],
            ]
        )
        camera = Homography(shift @ rotate @ tilt @ to_center)
        if _in_frame(camera, width, height, margin=2.0):
            return camera
    raise VisionError(f"no camera kept the square in frame after {max_tries} tries")


# Label ids painted by `paint_labels`, in painting order.
LABELS: tuple[str, ...] = (
    "background",
    "table",
    "target_left",
    "target_right",
    "disk",
    "cyan",
    "orange",
    "magenta",
    "yellow",
)


def paint_labels(
    scene: Scene,
    camera: Homography,
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
) -> np.ndarray:
    """Label of every pixel: which item its center sees on the table plane."""
    if not _in_frame(camera, width, height):
        raise OffFrame("the table square does not fit in the frame")

    v, u = np.mgrid[0:height, 0:width]
    pixels = np.stack([u.ravel(), v.ravel(), np.ones(u.size)])
    plane = camera.inverse().matrix @ pixels
    x = (plane[0] / plane[2]).reshape(height, width)
    y = (plane[1] / plane[2]).reshape(height, width)

    labels = np.zeros((height, width), dtype=np.uint8)
    labels[(x >= 0) & (x <= TABLE_SIZE) & (y >= 0) & (y <= TABLE_SIZE)] = LABELS.index(
        "table"
    )

    circles = (
        ("target_left", scene.target_left, TARGET_RADIUS),
        ("target_right", scene.target_right, TARGET_RADIUS),
        ("disk", scene.disk, DISK_RADIUS),
    )
    for name, center, radius in circles:
        cx, cy = robot_to_plane_frame(center)
        labels[(x - cx) ** 2 + (y - cy) ** 2 <= radius**2] = LABELS.index(name)

    half = MARKER_SIZE / 2
    for color, (mx, my) in scene.markers.items():
        labels[(np.abs(x - mx) <= half) & (np.abs(y - my) <= half)] = LABELS.index(color)

    return labels


def render_scene(
    scene: Scene,
    camera: Homography,
    noise: NoiseLevel = "none",
    seed: int = 0,
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
) -> RasterImage:
    """Camera image of the scene. `camera` maps plane millimeters to pixels.

    Noise is additive Gaussian per channel, sigma 8 ("low") or 20 ("high")
    grey levels, clipped to [0, 255].
    """
    labels = paint_labels(scene, camera, width, height)

    palette = np.array(
        [
            PAINT[name]
            for name in (
                "background",
                "table",
                scene.target_colors[0],
                scene.target_colors[1],
                "blue",
                "cyan",
                "orange",
                "magenta",
                "yellow",
            )
        ],
        dtype=np.uint8,
    )
    pixels = palette[labels]

    sigma = NOISE_SIGMA[noise]
    if sigma > 0:
        rng = np.random.default_rng(seed)
        noisy = pixels.astype(float) + rng.normal(0.0, sigma, size=pixels.shape)
        pixels = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
    return RasterImage(pixels)


# Pipeline


@dataclass(frozen=True, slots=True)
class Correspondence:
    color: str
    pixel: tuple[float, float]
    plane: tuple[float, float]


def _single_component(
    img: RasterImage,
    spec: ColorSpec,
    min_area: int,
    missing: type[VisionError],
    label: str,
) -> Component:
    components = connected_components(segment_color(img, spec), min_area)
    if not components:
        raise missing(f"{label}: no {spec.name} component found")
    if len(components) > 1:
        raise AmbiguousMarker(
            f"{label}: {len(components)} {spec.name} components found"
        )
    return components[0]


def detect_markers(
    img: RasterImage,
    colors: Mapping[str, ColorSpec] = DEFAULT_COLORS,
    min_area: int = 20,
) -> list[Correspondence]:
    out = []
    for color, plane in MARKER_POSITIONS.items():
        component = _single_component(
            img, colors[color], min_area, MarkerNotFound, f"{color} marker"
        )
        out.append(Correspondence(color, component.centroid, plane))
        logger.debug("%s marker at pixel %s", color, component.centroid)
    return out


def locate_items(
    img: RasterImage,
    colors: Mapping[str, ColorSpec] = DEFAULT_COLORS,
    target_colors: tuple[str, str] = ("green", "red"),
    min_area: int = 20,
) -> Scene:
    """Robot-frame positions of the disk and targets seen in `img`.

    The target with the smaller robot-frame x is the left one, whatever its
    color.
    """
    markers = detect_markers(img, colors, min_area)
    h = estimate_homography([(m.pixel, m.plane) for m in markers])

    pixel_points = {
        name: np.array(
            _single_component(img, colors[name], min_area, ItemNotFound, label).centroid
        )
        for name, label in (
            ("blue", "disk"),
            (target_colors[0], "target"),
            (target_colors[1], "target"),
        )
    }
    robot = optree.tree_map(
        lambda p: plane_to_robot_frame(apply_homography(h, p)), pixel_points
    )
    logger.debug("items in robot frame: %s", robot)

    a, b = target_colors
    if robot[a][0] == robot[b][0]:
        raise TargetTie(f"targets {a} and {b} share x = {robot[a][0]:.3f} mm")
    left, right = (a, b) if robot[a][0] < robot[b][0] else (b, a)

    def as_tuple(p: np.ndarray) -> tuple[float, float]:
        return (float(p[0]), float(p[1]))

    return Scene(
        disk=as_tuple(robot["blue"]),
        target_left=as_tuple(robot[left]),
        target_right=as_tuple(robot[right]),
        target_colors=(left, right),
    )
