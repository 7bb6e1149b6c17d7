import numpy as np
import pytest

from gradmesh.models.experiment import ExperimentConfig, LatencyModel
from gradmesh.services.harness import assign_schedules, build_world
from gradmesh.services.harness.state import persisted_params
from gradmesh.services.sgd.engine import compute_gradient
from gradmesh.utils.numeric import running_mean

SMALL = dict(
    workers=4,
    batches_per_worker=4,
    batch_size=8,
    epochs=1,
    classes=3,
    features=4,
    n_examples=256,
    compare_oracle=False,
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_config():
    """Factory for desk-scale configs; keyword arguments override the small defaults."""

    def _make(**overrides) -> ExperimentConfig:
        return ExperimentConfig(**{**SMALL, **overrides})

    return _make


@pytest.fixture
def zero_latency():
    return LatencyModel.zero()


def prepared_world(cfg: ExperimentConfig, epoch: int = 0):
    """A built world with schedules assigned for `epoch`, ready for run_round."""
    setup = build_world(cfg)
    assign_schedules(setup, epoch)
    return setup


def expected_round_mean(setup, minibatches: int = 1) -> np.ndarray:
    """Mean of every worker's gradients for the next round, computed from the persisted state."""
    worker_means = []
    for state in setup.workers:
        params = persisted_params(state, setup.dims)
        batches = state.schedule[state.cursor : state.cursor + minibatches]
        worker_means.append(running_mean(compute_gradient(params, batch).values for batch in batches))
    return running_mean(worker_means)
