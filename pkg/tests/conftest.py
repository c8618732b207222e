import random

import pytest

from startlab.configs import study1_config, study2_config
from startlab.persistence import SessionConfig
from startlab.session import SessionRuntime


@pytest.fixture
def rng():
    return random.Random(12345)


@pytest.fixture(scope="session")
def study1_session():
    """One completed simulated button-press session, shared by read-only tests."""
    config = SessionConfig.from_dict(study1_config())
    runtime = SessionRuntime(config)
    runtime.run_all()
    return runtime


@pytest.fixture(scope="session")
def study2_session():
    """One completed simulated crouch-start session."""
    config = SessionConfig.from_dict(study2_config())
    runtime = SessionRuntime(config)
    runtime.run_all()
    return runtime


def run_study2_records(seed: int):
    config = SessionConfig.from_dict(study2_config(seed))
    runtime = SessionRuntime(config)
    runtime.run_all()
    return runtime.records
