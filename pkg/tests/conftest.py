import numpy as np
import pytest

from sapsom.agent import TrainingConfig, train
from sapsom.cartpole import CartPole, EnvParams
from sapsom.persistence import ModelArtifact

SMALL = TrainingConfig(rows=6, cols=6, pretrain_episodes=40, joint_episodes=120, seed=3)


@pytest.fixture(scope="session")
def small_artifact():
    """A quickly trained 6x6 model; good enough for plumbing tests, not for accuracy."""
    env_params = EnvParams()
    agent = train(CartPole(env_params), SMALL)
    return ModelArtifact.from_agent(agent, env_params)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if module is None or not module.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.LINES:
        terminalreporter.write_line(line)
