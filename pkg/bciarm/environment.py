"""The process-control state machine is a plain function of (state, label).
This module wraps it into a gymnasium environment so that a decoder, or any
gymnasium consumer, can drive the arm one command at a time and be rewarded for
bringing the effector closer to a target.

"""

import typing

import gymnasium
import numpy as np

import bciarm.control as control
import bciarm.kinematics as kinematics
from bciarm.signals import CLASSES

ACTIONS = CLASSES


class InvalidStateException(Exception):
    def __init__(self, wanted, got):
        super().__init__(f"Environment is in invalid state. Wanted: {wanted}, is: {got}")


class ProcessControlEnv(gymnasium.Env):
    """What does environment.ProcessControlEnv have that
    control.process_control_step doesn't?

    1. The ability to be reset()
    2. A well defined observation and action space.
    3. A reward: how much closer to the target the step brought the effector.

    Actions index ACTIONS (LHIM, REST, RHIM). Observations are the effector
    position in mm followed by a one-hot of the active axis (x, y, z).
    """

    metadata = {"render_modes": []}

    observation_space: gymnasium.spaces.Box
    action_space: gymnasium.spaces.Discrete

    state: control.ProcessControlState | None

    def __init__(
        self,
        geom: kinematics.RobotGeometry | None = None,
        target: control.Point = control.PROCESS_TARGET,
        start: control.Point = control.HOME,
        max_steps: int = 200,
        success_radius: float = 10.0,
    ):
        super(ProcessControlEnv, self).__init__()
        self.geom = geom or kinematics.RobotGeometry.default()
        self.workspace = kinematics.Workspace(self.geom)
        self.target = np.array(target, dtype=float)
        self.start = start
        self.max_steps = max_steps
        self.success_radius = success_radius

        reach = self.geom.L2 + self.geom.L3 + self.geom.L4 + self.geom.Lb
        low = np.array([-reach] * 3 + [0.0] * 3)
        high = np.array([reach] * 3 + [1.0] * 3)
        self.observation_space = gymnasium.spaces.Box(low=low, high=high, dtype=np.float64)
        self.action_space = gymnasium.spaces.Discrete(len(ACTIONS))

        self.state = None
        self.steps = 0

    def _observation(self) -> np.ndarray:
        assert self.state is not None
        one_hot = [float(self.state.active_axis == a) for a in control.AXES]
        return np.array([*self.state.effector, *one_hot], dtype=np.float64)

    def _distance(self) -> float:
        assert self.state is not None
        return float(np.linalg.norm(np.array(self.state.effector) - self.target))

    def reset(
        self,
        *,
        seed: int | None = None,
        options: dict[str, typing.Any] | None = None,
    ) -> typing.Tuple[np.ndarray, dict[str, typing.Any]]:
        super().reset(seed=seed)
        self.state = control.ProcessControlState(effector=tuple(self.start))
        self.steps = 0
        return self._observation(), {"distance": self._distance()}

    def step(
        self, action
    ) -> typing.Tuple[np.ndarray, float, bool, bool, dict[str, typing.Any]]:
        if self.state is None:
            raise InvalidStateException(control.ProcessControlState, None)
        if not self.action_space.contains(action):
            raise ValueError(f"invalid action {action!r}")

        before = self._distance()
        self.state, report = control.process_control_step(
            self.state, ACTIONS[int(action)], self.workspace
        )
        self.steps += 1
        after = self._distance()

        terminated = after <= self.success_radius
        truncated = not terminated and self.steps >= self.max_steps
        return (
            self._observation(),
            before - after,
            terminated,
            truncated,
            {"distance": after, "report": report},
        )
