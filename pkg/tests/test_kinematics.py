import math

import numpy as np
import pytest

import bciarm.cga as cga
import bciarm.kinematics as kinematics
from bciarm.kinematics import IkError, JointAngles, RobotGeometry

HOME = (0.0, 155.5, 284.3)
TABLE_TARGET = (0.0, 300.0, -49.0)

geom = RobotGeometry.default()


def random_targets(n: int, seed: int = 0) -> list[np.ndarray]:
    """Reachable targets, from the forward kinematics of random joint angles
    kept away from full extension and in front of the z-axis."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        angles = JointAngles(
            rng.uniform(-math.pi, math.pi),
            rng.uniform(-1.5, 1.5),
            rng.uniform(0.2, 2.6),
        )
        x = kinematics.forward_kinematics(geom, angles)
        ahead = -math.sin(angles.theta0) * x[0] + math.cos(angles.theta0) * x[1]
        if ahead > 20.0:
            out.append(x)
    return out


TARGETS = random_targets(1000)


def rotate_z(x, phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([c * x[0] - s * x[1], s * x[0] + c * x[1], x[2]])


def test_default_geometry_is_valid():
    assert geom.validate() is geom
    assert geom.La**2 + (geom.Lb - geom.L1) ** 2 == pytest.approx(geom.L2**2)


def test_invalid_geometry():
    with pytest.raises(kinematics.InvalidGeometry):
        RobotGeometry(L2=-1.0)
    with pytest.raises(kinematics.InvalidGeometry):
        RobotGeometry(L2=90.0)
    with pytest.raises(kinematics.InvalidGeometry):
        RobotGeometry(La=60.0)
    with pytest.raises(kinematics.InvalidGeometry):
        RobotGeometry(j1_position=(1.0, 0.0, 36.0))


def test_effector_plane():
    assert np.cross(cga.plane_normal(kinematics.effector_plane([0, 1, 0])), [1, 0, 0]) == pytest.approx(
        [0, 0, 0], abs=1e-12
    )
    pi = kinematics.effector_plane([1, 1, 0])
    assert cga.incident(cga.embed_point([2e-3, 2e-3, 5e-3]), pi)

    with pytest.raises(IkError) as e:
        kinematics.effector_plane([0, 0, 300])
    assert e.value.stage == "effector_plane"


def test_base_plane():
    base = kinematics.base_plane()
    assert cga.incident(cga.embed_point([1, 0, 0]), base)
    assert cga.incident(cga.embed_point([0, 1, 0]), base)
    assert not cga.incident(cga.embed_point([0, 0, 1]), base)


@pytest.mark.parametrize(
    "target, expected",
    [
        ([0, 200, 50], [0, 100, 0]),
        ([200, 0, 50], [100, 0, 0]),
        ([0, -200, 50], [0, -100, 0]),
    ],
)
def test_solve_xh(target, expected):
    wide = RobotGeometry(La=100.0, L2=math.hypot(100.0, 64.0))
    x_h = kinematics.solve_xh(wide, kinematics.effector_plane(target))
    assert x_h == pytest.approx(expected, abs=1e-6)


def test_anchor_points_are_reachable():
    for target in (HOME, TABLE_TARGET):
        solution = kinematics.solve_ik(geom, target)
        back = kinematics.forward_kinematics(geom, solution.angles)
        assert np.linalg.norm(back - np.array(target)) < 1e-6
        assert kinematics.reachable(geom, target)


def test_straight_ahead_is_in_the_yz_plane():
    solution = kinematics.solve_ik(geom, TABLE_TARGET)
    assert solution.angles.theta0 == pytest.approx(0.0, abs=1e-9)
    assert solution.j2[0] == pytest.approx(0.0, abs=1e-9)
    assert solution.j3[0] == pytest.approx(0.0, abs=1e-9)


def test_round_trip():
    worst = 0.0
    for x in TARGETS:
        solution = kinematics.solve_ik(geom, x)
        back = kinematics.forward_kinematics(geom, solution.angles)
        worst = max(worst, float(np.linalg.norm(back - x)))
    assert worst < 1e-6


def test_link_lengths_and_planarity():
    for x in TARGETS[:200]:
        s = kinematics.solve_ik(geom, x)
        assert np.linalg.norm(s.j2 - geom.j1) == pytest.approx(geom.L2, rel=1e-9)
        assert np.linalg.norm(s.j3 - s.j2) == pytest.approx(geom.L3, rel=1e-9)
        assert np.linalg.norm(x - s.j3) == pytest.approx(geom.L4, rel=1e-9)
        for joint in (s.j2, s.j3):
            # Horizontal parts parallel to the target's.
            assert x[0] * joint[1] - x[1] * joint[0] == pytest.approx(0.0, abs=1e-6)


def test_theta0_equivariance():
    rng = np.random.default_rng(1)
    for x in TARGETS[:100]:
        phi = float(rng.uniform(-math.pi, math.pi))
        a = kinematics.solve_ik(geom, x).angles
        b = kinematics.solve_ik(geom, rotate_z(x, phi)).angles
        assert kinematics.wrap_angle(b.theta0 - a.theta0 - phi) == pytest.approx(0.0, abs=1e-6)
        assert b.theta2 == pytest.approx(a.theta2, abs=1e-6)
        assert b.theta3 == pytest.approx(a.theta3, abs=1e-6)


def test_branches():
    for x in TARGETS[:100]:
        up = kinematics.solve_ik(geom, x, "elbow-up")
        down = kinematics.solve_ik(geom, x, "elbow-down")
        assert up.angles.theta0 == pytest.approx(down.angles.theta0, abs=1e-9)
        assert up.j2 == pytest.approx(down.j2, abs=1e-6)
        assert up.j3[2] >= down.j3[2] - 1e-9
        for s in (up, down):
            back = kinematics.forward_kinematics(geom, s.angles)
            assert np.linalg.norm(back - x) < 1e-6


def test_forward_kinematics_reference_pose():
    straight = kinematics.forward_kinematics(geom, JointAngles(0.0, 0.0, 0.0))
    # J2 = (0, 48, 100); the arm continues along (0.6, 0.8) for L3 + L4.
    assert straight == pytest.approx([0.0, 48.0 + 330.0 * 0.6, 100.0 + 330.0 * 0.8])

    turned = kinematics.forward_kinematics(geom, JointAngles(math.pi / 2, 0.3, 0.5))
    ahead = kinematics.forward_kinematics(geom, JointAngles(0.0, 0.3, 0.5))
    assert turned == pytest.approx([-ahead[1], ahead[0], ahead[2]])


def test_straight_configuration_has_zero_angles():
    straight = kinematics.forward_kinematics(geom, JointAngles(0.0, 0.0, 0.0))
    j2 = np.array([0.0, geom.La, geom.Lb])
    d = (straight - j2) / np.linalg.norm(straight - j2)
    j3 = j2 + geom.L3 * d
    angles = kinematics.joint_angles(geom, j2, j3, straight)
    assert angles.theta2 == pytest.approx(0.0, abs=1e-9)
    assert angles.theta3 == pytest.approx(0.0, abs=1e-9)


def test_out_of_reach():
    with pytest.raises(IkError) as e:
        kinematics.solve_ik(geom, [0, 10000, 0])
    assert e.value.stage == "j3"
    assert "outside wrist workspace" in str(e.value)

    result = kinematics.reachable(geom, [0, 10000, 0])
    assert not result
    assert result.reason == "target outside wrist workspace"


def test_z_axis_target():
    result = kinematics.reachable(geom, [0, 0, 300])
    assert not result.ok
    assert result.reason == "degenerate plane"


def test_unreachable_j2():
    with pytest.raises(kinematics.InvalidGeometry):
        RobotGeometry(L2=5.0, Lb=40.0)
    # Bypass construction to reach the stage check.
    short = RobotGeometry()
    object.__setattr__(short, "L2", 5.0)
    object.__setattr__(short, "Lb", 40.0)
    with pytest.raises(IkError) as e:
        kinematics.solve_j2(short, [0, 200, 0])
    assert e.value.stage == "j2"


def test_solve_j3_at_full_extension():
    j2 = np.array([0.0, geom.La, geom.Lb])
    x = j2 + np.array([0.0, geom.L3 + geom.L4, 0.0])
    j3 = kinematics.solve_j3(geom, x, j2)
    assert j3 == pytest.approx(j2 + np.array([0.0, geom.L3, 0.0]), abs=1e-3)


def test_reachable_agrees_with_solver():
    rng = np.random.default_rng(2)
    for _ in range(200):
        x = rng.uniform([-400, -400, -200], [400, 400, 500])
        try:
            kinematics.solve_ik(geom, x)
            solved = True
        except IkError:
            solved = False
        assert bool(kinematics.reachable(geom, x)) == solved


def test_workspace():
    ws = kinematics.Workspace(geom)
    assert HOME in ws
    assert (0.0, 10000.0, 0.0) not in ws
    assert ws.check(HOME) is ws.check(HOME)


def test_in_plane_coordinates_follow_the_rotation():
    ahead = kinematics.solve_ik(geom, (0.0, 300.0, -49.0)).in_plane()
    side = kinematics.solve_ik(geom, (300.0, 0.0, -49.0)).in_plane()
    assert ahead["effector"] == pytest.approx((300.0, -49.0), abs=1e-6)
    for joint in ("j2", "j3", "effector"):
        assert side[joint] == pytest.approx(ahead[joint], abs=1e-6)


def test_workspace_cache_is_bounded():
    ws = kinematics.Workspace(geom, maxsize=2)
    for y in (150.0, 200.0, 250.0, 150.0):
        ws.check((0.0, y, 100.0))
    info = ws.cache_info()
    assert info.currsize == 2
    assert info.misses == 4
    assert ws.check((0.0, 150.0000000001, 100.0)) is ws.check((0.0, 150.0, 100.0))
    assert ws.cache_info().hits == 2
