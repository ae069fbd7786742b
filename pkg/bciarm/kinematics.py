"""Inverse kinematics of the arm, solved with conformal geometric algebra.

Only the shoulder rotation J0, the elbow J2 and the wrist J3 are solved for; J1
is a fixed joint on the z-axis and the wrist rotation and gripper play no part
in positioning. The construction confines the arm to the vertical plane that
contains the z-axis and the target:

1. The effector plane through e0, e3, the target and einf.
2. x_h, the point at horizontal distance La in both the effector plane and the
   base plane, from a sphere around the origin.
3. J2 from the spheres around J1 (radius L2) and x_h (radius Lb), cut with the
   effector plane.
4. J3 from the spheres around J2 (radius L3) and the target (radius L4), cut
   with the effector plane.
5. The joint angles from the directions of the lines through the joints.

External units are millimeters. The geometric construction runs in meters,
which keeps the squared terms of the embedding close to unity.

`forward_kinematics` shares no code with the solver and serves as its oracle.

"""

import functools
import logging
import math
from dataclasses import dataclass
from typing import Literal, Sequence, TypeAlias

import numpy as np

import bciarm.cga as cga

logger = logging.getLogger(__name__)

_METERS_PER_MM = 1e-3

Branch: TypeAlias = Literal["elbow-up", "elbow-down"]
Stage: TypeAlias = Literal["effector_plane", "x_h", "j2", "j3", "angles"]


class InvalidGeometry(ValueError):
    pass


class IkError(Exception):
    """A failed IK stage. `stage` names the construction step."""

    def __init__(self, stage: Stage, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message


@dataclass(frozen=True, slots=True)
class RobotGeometry:
    """Link lengths of the arm, in millimeters.

    J0 is the origin. J1 sits on the z-axis. J2 is held by the shoulder at a
    horizontal distance La from the z-axis and a height Lb above the base, so
    that La^2 + (Lb - J1z)^2 = L2^2.
    """

    L1: float = 36.0
    L2: float = 80.0
    L3: float = 170.0
    L4: float = 160.0
    La: float = 48.0
    Lb: float = 100.0
    base_height: float = 49.0
    j1_position: tuple[float, float, float] | None = None

    def __post_init__(self):
        for name in ("L1", "L2", "L3", "L4", "La", "Lb", "base_height"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidGeometry(f"{name} must be a positive length, got {value}")
        if self.j1_position is not None:
            if len(self.j1_position) != 3:
                raise InvalidGeometry("j1_position must be a 3-vector")
            x, y, _ = self.j1_position
            if abs(x) > 1e-9 or abs(y) > 1e-9:
                raise InvalidGeometry(
                    f"J1 must lie on the z-axis, got {self.j1_position}"
                )
        self.validate()

    @classmethod
    def default(cls) -> "RobotGeometry":
        return cls()

    @property
    def j1(self) -> np.ndarray:
        if self.j1_position is None:
            return np.array([0.0, 0.0, self.L1])
        return np.array(self.j1_position, dtype=float)

    def validate(self, rel: float = 1e-6) -> "RobotGeometry":
        """Check the shoulder invariant and return self.

        The fixed J2 must also be the higher of the two sphere-intersection
        candidates, otherwise the "+" split would select its mirror image.
        """
        rise = self.Lb - self.j1[2]
        reach2 = self.La**2 + rise**2
        if abs(reach2 - self.L2**2) > rel * self.L2**2:
            raise InvalidGeometry(
                f"La^2 + (Lb - J1z)^2 = {reach2:.6g} does not match L2^2 = {self.L2**2:.6g}"
            )
        if abs(self.j1[2] - self.L1) > rel * self.L1:
            raise InvalidGeometry(
                f"J1 height {self.j1[2]} does not match L1 = {self.L1}"
            )
        if _mirror_height(self) >= self.Lb:
            raise InvalidGeometry("J2 is not the upper intersection candidate")
        return self


def _mirror_height(geom: RobotGeometry) -> float:
    # Reflect (La, Lb) across the line through J1 = (0, j1z) and x_h = (La, 0).
    a = np.array([0.0, geom.j1[2]])
    b = np.array([geom.La, 0.0])
    p = np.array([geom.La, geom.Lb])
    d = (b - a) / np.linalg.norm(b - a)
    foot = a + d * np.dot(p - a, d)
    return float((2 * foot - p)[1])


@dataclass(frozen=True, slots=True)
class JointAngles:
    theta0: float
    theta2: float
    theta3: float

    def degrees(self) -> tuple[float, float, float]:
        return (
            math.degrees(self.theta0),
            math.degrees(self.theta2),
            math.degrees(self.theta3),
        )


@dataclass(frozen=True, slots=True)
class IkSolution:
    angles: JointAngles
    j2: np.ndarray
    j3: np.ndarray
    effector: np.ndarray
    branch: Branch

    def in_plane(self) -> dict[str, tuple[float, float]]:
        """(radial, height) coordinates of each joint in the effector plane."""
        u = np.array([-math.sin(self.angles.theta0), math.cos(self.angles.theta0), 0.0])
        return {
            name: (float(np.dot(p, u)), float(p[2]))
            for name, p in (("j2", self.j2), ("j3", self.j3), ("effector", self.effector))
        }


def wrap_angle(theta: float) -> float:
    """Wrap into (-pi, pi]."""
    w = math.remainder(theta, 2 * math.pi)
    return w + 2 * math.pi if w <= -math.pi else w


def _target(x_e: Sequence[float]) -> np.ndarray:
    x = np.asarray(x_e, dtype=float)
    if x.shape != (3,) or not np.all(np.isfinite(x)):
        raise ValueError(f"target must be a finite 3-vector, got {x_e!r}")
    return x


def _point(x_mm: np.ndarray) -> cga.ConformalPoint:
    return cga.embed_point(x_mm * _METERS_PER_MM)


def _to_mm(p: cga.ConformalPoint) -> np.ndarray:
    return cga.extract_point(p) / _METERS_PER_MM


def effector_plane(x_e: Sequence[float]) -> cga.Plane:
    """pi_e = e0 ^ e3 ^ X_e ^ einf, the vertical plane through the target."""
    x = _target(x_e)
    if math.hypot(x[0], x[1]) <= cga.DEFAULT_TOLERANCE.bound(float(np.linalg.norm(x))):
        raise IkError("effector_plane", "degenerate effector plane: target on the z-axis")
    try:
        return cga.make_plane_wedge([cga.E0, cga.E3, _point(x), cga.EINF])
    except cga.DegenerateEntityError as e:
        raise IkError("effector_plane", f"degenerate effector plane: {e}") from e


def base_plane() -> cga.Plane:
    """pi_b = e0 ^ e1 ^ e2 ^ einf."""
    return cga.make_plane_wedge([cga.E0, cga.E1, cga.E2, cga.EINF])


def _split(pp: cga.PointPair, sign: Literal["+", "-"], stage: Stage, what: str):
    if not pp.is_real():
        raise IkError(stage, what)
    try:
        return cga.split_point_pair(pp, sign)
    except cga.CgaError as e:
        raise IkError(stage, f"{what}: {e}") from e


def solve_xh(geom: RobotGeometry, pi_e: cga.Plane) -> np.ndarray:
    """The point at distance La from the origin in both pi_e and pi_b.

    Of the two candidates, the one on the target's side is kept. That side is
    read from the orientation of pi_e: its normal n = e3 x x_e, so the target
    lies along n x e3.
    """
    try:
        s0 = cga.make_sphere(cga.E0, geom.La * _METERS_PER_MM)
        c0 = cga.intersect_plane_sphere(pi_e, s0)
        pp0 = cga.intersect_circle_plane(c0, base_plane())
    except cga.CgaError as e:
        raise IkError("x_h", str(e)) from e
    if not pp0.is_real():
        raise IkError("x_h", "no real x_h for this geometry")

    toward = np.cross(cga.plane_normal(pi_e), [0.0, 0.0, 1.0])
    candidates = [_to_mm(p) for p in pp0.points()]
    x_h = max(candidates, key=lambda p: float(np.dot(p, toward)))
    logger.debug("x_h = %s", x_h)
    return x_h


def solve_j2(geom: RobotGeometry, x_e: Sequence[float]) -> np.ndarray:
    x = _target(x_e)
    pi_e = effector_plane(x)
    x_h = solve_xh(geom, pi_e)
    try:
        s1 = cga.make_sphere(_point(geom.j1), geom.L2 * _METERS_PER_MM)
        sh = cga.make_sphere(_point(x_h), geom.Lb * _METERS_PER_MM)
        c2 = cga.intersect_spheres(s1, sh)
        pp2 = cga.intersect_circle_plane(c2, pi_e)
    except cga.CgaError as e:
        raise IkError("j2", f"J2 unreachable for this geometry/target: {e}") from e
    j2 = _to_mm(_split(pp2, "+", "j2", "J2 unreachable for this geometry/target"))
    logger.debug("j2 = %s", j2)
    return j2


def solve_j3(
    geom: RobotGeometry,
    x_e: Sequence[float],
    j2: Sequence[float],
    branch: Branch = "elbow-up",
) -> np.ndarray:
    """J3 from the spheres around J2 and the target.

    Elbow-up keeps the higher candidate, elbow-down the lower.
    """
    x = _target(x_e)
    j2 = np.asarray(j2, dtype=float)
    reach = float(np.linalg.norm(x - j2))
    slack = 1e-9 * (geom.L3 + geom.L4)
    if reach > geom.L3 + geom.L4 + slack or reach < abs(geom.L3 - geom.L4) - slack:
        raise IkError(
            "j3",
            f"target outside wrist workspace (|x_e - j2| = {reach:.3f} mm)",
        )

    pi_e = effector_plane(x)
    try:
        s2 = cga.make_sphere(_point(j2), geom.L3 * _METERS_PER_MM)
        se = cga.make_sphere(_point(x), geom.L4 * _METERS_PER_MM)
        c3 = cga.intersect_spheres(s2, se)
        pp3 = cga.intersect_circle_plane(c3, pi_e)
    except cga.CgaError as e:
        raise IkError("j3", f"target outside wrist workspace: {e}") from e
    sign: Literal["+", "-"] = "+" if branch == "elbow-up" else "-"
    j3 = _to_mm(_split(pp3, sign, "j3", "target outside wrist workspace"))
    logger.debug("j3 (%s) = %s", branch, j3)
    return j3


def joint_angles(
    geom: RobotGeometry,
    j2: Sequence[float],
    j3: Sequence[float],
    x_e: Sequence[float],
) -> JointAngles:
    """Joint angles from the directions of l12, l23 and l3e.

    theta0 is the angle from e2 to the effector-plane normal about +z, less a
    quarter turn, so that a target straight ahead on +y gives theta0 = 0.
    theta2 and theta3 are counter-clockwise about the effector-plane normal,
    which makes them positive when the distal link bends down.
    """
    x = _target(x_e)
    try:
        normal = cga.plane_normal(effector_plane(x))
        p1, p2, p3, pe = (
            _point(np.asarray(p, dtype=float)) for p in (geom.j1, j2, j3, x)
        )
        d12 = cga.line_direction(cga.make_line(p1, p2))
        d23 = cga.line_direction(cga.make_line(p2, p3))
        d3e = cga.line_direction(cga.make_line(p3, pe))

        theta0 = cga.signed_angle([0.0, 1.0, 0.0], normal, [0.0, 0.0, 1.0])
        theta2 = cga.signed_angle(d12, d23, normal)
        theta3 = cga.signed_angle(d23, d3e, normal)
    except cga.CgaError as e:
        raise IkError("angles", str(e)) from e

    return JointAngles(
        wrap_angle(theta0 - math.pi / 2), wrap_angle(theta2), wrap_angle(theta3)
    )


def solve_ik(
    geom: RobotGeometry, x_e: Sequence[float], branch: Branch = "elbow-up"
) -> IkSolution:
    x = _target(x_e)
    logger.debug("solving IK for %s (%s)", x, branch)
    j2 = solve_j2(geom, x)
    j3 = solve_j3(geom, x, j2, branch)
    angles = joint_angles(geom, j2, j3, x)
    return IkSolution(angles, j2, j3, x.copy(), branch)


def forward_kinematics(geom: RobotGeometry, angles: JointAngles) -> np.ndarray:
    """Effector position of the chain for the given joint angles.

    u is the horizontal direction of the arm, so theta0 = 0 points it along
    +y. Elevations in the (u, z) plane decrease by theta2 at the elbow and by
    theta3 at the wrist.
    """
    u = np.array([-math.sin(angles.theta0), math.cos(angles.theta0), 0.0])
    up = np.array([0.0, 0.0, 1.0])

    j2 = geom.La * u + geom.Lb * up
    phi12 = math.atan2(geom.Lb - geom.j1[2], geom.La)
    phi23 = phi12 - angles.theta2
    j3 = j2 + geom.L3 * (math.cos(phi23) * u + math.sin(phi23) * up)
    phi3e = phi23 - angles.theta3
    return j3 + geom.L4 * (math.cos(phi3e) * u + math.sin(phi3e) * up)


@dataclass(frozen=True, slots=True)
class Reachability:
    ok: bool
    reason: str

    def __bool__(self) -> bool:
        return self.ok


def reachable(geom: RobotGeometry, x_e: Sequence[float]) -> Reachability:
    x = _target(x_e)
    radial = math.hypot(x[0], x[1])
    if radial <= cga.DEFAULT_TOLERANCE.bound(float(np.linalg.norm(x))):
        return Reachability(False, "degenerate plane")

    u = np.array([x[0], x[1], 0.0]) / radial
    j2 = geom.La * u + np.array([0.0, 0.0, geom.Lb])
    reach = float(np.linalg.norm(x - j2))
    if reach > geom.L3 + geom.L4 or reach < abs(geom.L3 - geom.L4):
        return Reachability(False, "target outside wrist workspace")

    try:
        solve_ik(geom, x)
    except IkError as e:
        return Reachability(False, str(e))
    return Reachability(True, "reachable")


class Workspace:
    """Memoized reachability, keyed by the position rounded to 1e-6 mm.

    At most `maxsize` positions are kept, least recently used first out.
    """

    def __init__(self, geom: RobotGeometry, maxsize: int = 4096):
        self.geom = geom
        self._lookup = functools.lru_cache(maxsize=maxsize)(self._reachable)

    def _reachable(self, key: tuple[float, ...]) -> Reachability:
        return reachable(self.geom, key)

    def check(self, x_e: Sequence[float]) -> Reachability:
        return self._lookup(tuple(round(float(v), 6) for v in x_e))

    def cache_info(self):
        return self._lookup.cache_info()

    def __contains__(self, x_e: Sequence[float]) -> bool:
        return self.check(x_e).ok
