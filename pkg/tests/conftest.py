"""Shared fixtures: the expensive trajectories are computed once per session."""

import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

from splaysim.experiments import fig2_config, theorem1_corpus
from splaysim.sim import run


@pytest.fixture(scope="session")
def fig2_arc():
    """The shipped nominal study arc (stop rule exits near t = 90)."""
    return run(fig2_config())


@pytest.fixture(scope="session")
def corpus_result():
    """(records, wall_seconds) for the full seeded 100-run corpus."""
    t0 = time.perf_counter()
    records = theorem1_corpus(runs=100)
    return records, time.perf_counter() - t0
