import pytest

from merza.affect import LoudnessParams
from merza.qlearn import TrainConfig, train


@pytest.fixture(scope="session")
def default_run():
    """One full default training run shared by every test that needs a
    converged policy. Takes a few seconds; everything downstream reuses
    it."""
    cfg = TrainConfig(seed=1)
    table, trace = train(cfg, LoudnessParams())
    return cfg, table, trace


@pytest.fixture(scope="session")
def quick_table():
    """A small, fast table for tests that need a policy but not a good
    one."""
    cfg = TrainConfig(episodes=200, seed=3)
    table, _ = train(cfg, LoudnessParams())
    return table
