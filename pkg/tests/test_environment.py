import numpy as np
import pytest

import bciarm.environment as environment


def rhim() -> int:
    return environment.ACTIONS.index("RHIM")


def test_step_before_reset() -> None:
    env = environment.ProcessControlEnv()
    with pytest.raises(environment.InvalidStateException):
        env.step(rhim())


def test_environment() -> None:
    env = environment.ProcessControlEnv(max_steps=3)

    obs, info = env.reset(seed=0)
    assert env.observation_space.contains(obs)
    assert obs.tolist() == [0.0, 155.5, 284.3, 0.0, 1.0, 0.0]
    assert info["distance"] == pytest.approx(363.3, abs=0.05)

    obs, reward, terminated, truncated, info = env.step(rhim())
    assert reward > 0
    assert obs[1] == pytest.approx(165.5)
    assert not terminated and not truncated

    _, reward, _, _, _ = env.step(environment.ACTIONS.index("LHIM"))
    assert reward < 0

    _, reward, terminated, truncated, _ = env.step(environment.ACTIONS.index("REST"))
    assert reward == 0.0
    assert truncated and not terminated


def test_reaching_the_target_terminates() -> None:
    env = environment.ProcessControlEnv(start=(0.0, 290.0, -49.0))
    env.reset()
    _, _, terminated, _, info = env.step(rhim())
    assert terminated
    assert info["distance"] == pytest.approx(0.0)


def test_invalid_action() -> None:
    env = environment.ProcessControlEnv()
    env.reset()
    with pytest.raises(ValueError):
        env.step(np.int64(7))
