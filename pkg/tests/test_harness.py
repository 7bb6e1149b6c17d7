from pathlib import Path

import pytest
from conftest import prepared_world

from gradmesh.core.constants import PARAMS_STATE_KEY, RESIDUAL_STATE_KEY
from gradmesh.core.exceptions import ConfigurationError
from gradmesh.models.experiment import Deployment, ExperimentConfig, InvocationMode, StrategyKind
from gradmesh.models.traffic import SubstrateClass
from gradmesh.services.cost import gpu_cost
from gradmesh.services.harness import (
    build_world,
    discard_round_keys,
    early_stop_check,
    epochs_to_csv,
    epochs_to_target,
    invocation_duration,
    load_config,
    oracle_epochs_to_target,
    oracle_sequential_run,
    params_digest,
    persisted_params,
    result_from_json,
    result_to_json,
    run_epoch,
    run_experiment,
    run_round,
)
from gradmesh.services.harness.serialization import EPOCH_COLUMNS
from gradmesh.services.sgd.engine import accuracy
from gradmesh.services.substrate import kv_exists

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.toml"
CONVERGENCE_EPOCHS = 30


def test_single_worker_allreduce_is_bitwise_sequential_sgd(make_config):
    cfg = make_config(workers=1, epochs=2, compare_oracle=True)
    result = run_experiment(cfg)
    assert result.oracle_divergence == 0.0
    assert result.params_digest == params_digest(oracle_sequential_run(cfg))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("workers", [1, 2, 4, 8])
@pytest.mark.parametrize(
    "variant",
    [
        dict(strategy=StrategyKind.SPIRT_P2P),
        dict(strategy=StrategyKind.SPIRT_P2P, minibatches_per_round=2),
        dict(strategy=StrategyKind.MLLESS_PS, tau=0.0),
        dict(strategy=StrategyKind.SCATTER_REDUCE),
        dict(strategy=StrategyKind.ALL_REDUCE),
        dict(strategy=StrategyKind.SHARED_STORE_BASELINE),
    ],
    ids=lambda v: f"{v['strategy'].value}-m{v.get('minibatches_per_round', 1)}",
)
def test_exact_strategies_track_the_oracle(make_config, seed, workers, variant):
    result = run_experiment(make_config(seed=seed, workers=workers, epochs=5, compare_oracle=True, **variant))
    assert result.oracle_divergence is not None
    assert result.oracle_divergence < 1e-6
    assert result.workers_agree


def test_inexact_mlless_skips_the_oracle(make_config):
    result = run_experiment(make_config(strategy="mlless", tau=0.05, compare_oracle=True))
    assert result.oracle_divergence is None


def test_runs_are_reproducible(make_config):
    cfg = make_config(strategy="spirt", minibatches_per_round=2, epochs=3, seed=5)
    assert result_to_json(run_experiment(cfg)) == result_to_json(run_experiment(cfg))


def test_seed_changes_the_outcome(make_config):
    first = run_experiment(make_config(seed=1))
    second = run_experiment(make_config(seed=2))
    assert first.params_digest != second.params_digest


@pytest.fixture(scope="module")
def oracle_convergence():
    """Epochs-to-95% of single-node SGD on the default problem, per seed."""
    return {seed: oracle_epochs_to_target(ExperimentConfig(seed=seed), CONVERGENCE_EPOCHS) for seed in range(3)}


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("strategy", ["spirt", "scatterreduce", "allreduce", "sharedstore"])
def test_exact_strategies_converge_in_the_oracle_epoch_count(oracle_convergence, strategy, seed):
    expected = oracle_convergence[seed]
    assert expected is not None
    assert expected <= CONVERGENCE_EPOCHS
    assert epochs_to_target(ExperimentConfig(strategy=strategy, seed=seed), CONVERGENCE_EPOCHS) == expected


@pytest.mark.parametrize("seed", range(3))
def test_mlless_with_small_tau_reaches_target_accuracy(seed):
    cfg = ExperimentConfig(strategy="mlless", tau=0.01, seed=seed)
    reached = epochs_to_target(cfg, CONVERGENCE_EPOCHS)
    assert reached is not None
    assert epochs_to_target(cfg, CONVERGENCE_EPOCHS) == reached


def test_epoch_metrics_are_consistent(make_config):
    result = run_experiment(make_config(strategy="allreduce", epochs=3))
    previous = 0.0
    for metrics in result.epochs:
        assert metrics.total_time_s >= metrics.sync_wait_s
        assert metrics.cumulative_cost_usd > previous
        previous = metrics.cumulative_cost_usd
        assert metrics.invocations_per_worker == metrics.rounds
        assert metrics.serial_time_s == pytest.approx(metrics.mean_invocation_s * metrics.rounds)
    assert result.total_cost_usd == result.epochs[-1].cumulative_cost_usd


def test_epoch_traffic_is_rounds_times_round_traffic(make_config):
    cfg = make_config(strategy="allreduce")
    setup = build_world(cfg)
    metrics = run_epoch(setup, 0)
    g = 8 * cfg.param_count
    shared = metrics.traffic[SubstrateClass.SHARED_DB]
    assert shared.bytes_written == cfg.rounds_per_epoch * (cfg.workers + 1) * g
    assert shared.bytes_read == cfg.rounds_per_epoch * 2 * cfg.workers * g


def test_epoch_accuracy_is_measured_on_the_full_dataset(make_config):
    setup = build_world(make_config())
    metrics = run_epoch(setup, 0)
    params = persisted_params(setup.workers[0], setup.dims)
    assert metrics.train_accuracy == accuracy(params, setup.dataset.full_batch())


def test_parallel_invocations_bill_every_minibatch(make_config):
    serial = run_experiment(make_config(strategy="spirt", minibatches_per_round=2))
    parallel = run_experiment(
        make_config(strategy="spirt", minibatches_per_round=2, invocation_mode=InvocationMode.PARALLEL)
    )
    assert serial.epochs[0].invocations_per_worker == serial.epochs[0].rounds
    assert parallel.epochs[0].invocations_per_worker == 2 * parallel.epochs[0].rounds


def test_shared_store_defaults_to_gpu_billing(make_config):
    result = run_experiment(make_config(strategy="sharedstore"))
    metrics = result.epochs[0]
    assert metrics.cost.deployment == Deployment.GPU
    assert metrics.cost.invocations_per_worker == 1
    assert metrics.cost.total_usd == pytest.approx(4 * gpu_cost(metrics.total_time_s))
    forced = run_experiment(make_config(strategy="sharedstore", deployment="serverless"))
    assert forced.epochs[0].cost.deployment == Deployment.SERVERLESS


def test_early_stop_check_examples():
    assert early_stop_check([0.5, 0.6, 0.6, 0.6, 0.6], patience=3, min_delta=0.001)
    assert not early_stop_check([0.5, 0.6, 0.7], patience=3, min_delta=0.001)
    assert not early_stop_check([0.5, 0.6, 0.61, 0.62, 0.63], patience=2, min_delta=0.001)
    with pytest.raises(ConfigurationError):
        early_stop_check([0.5], patience=0, min_delta=0.0)


def test_early_stopping_ends_the_run(make_config):
    result = run_experiment(make_config(epochs=5, early_stopping=True, patience=1, min_delta=1.0))
    assert result.early_stopped
    assert len(result.epochs) == 2


def test_invocation_duration_is_linear():
    base = invocation_duration((3, 4), 8, 1e9)
    assert base == pytest.approx(8 * 15 * 6 / 1e9)
    assert invocation_duration((3, 4), 16, 1e9) == pytest.approx(2 * base)
    assert invocation_duration((3, 4), 8, 1e9, [0.1, 0.2]) == pytest.approx(base + 0.3)
    with pytest.raises(ConfigurationError):
        invocation_duration((3, 4), 8, 0.0)


def test_insufficient_data_fails_before_training(make_config):
    with pytest.raises(ConfigurationError):
        build_world(make_config(workers=8, batches_per_worker=8, batch_size=8))


def test_result_json_roundtrip(make_config):
    for tau in (0.05, float("inf")):
        result = run_experiment(make_config(strategy="mlless", tau=tau))
        restored = result_from_json(result_to_json(result))
        assert restored.config == result.config
        assert restored.params_digest == result.params_digest
        assert result_to_json(restored) == result_to_json(result)


def test_epochs_csv_layout(make_config):
    result = run_experiment(make_config(epochs=2))
    text = epochs_to_csv(result)
    lines = text.split("\r\n")
    assert lines[0] == ",".join(EPOCH_COLUMNS)
    assert lines[-1] == ""
    assert len(lines) == 4


def test_default_config_file_matches_model_defaults():
    assert load_config(DEFAULT_CONFIG) == ExperimentConfig()


def test_overrides_and_seed_are_applied_in_order():
    cfg = load_config(
        DEFAULT_CONFIG,
        ["strategy.name=spirt", "training.workers=2", "latency.queue.fixed_latency=0.0", "tau=inf", "workers=3"],
        seed=9,
    )
    assert cfg.strategy == StrategyKind.SPIRT_P2P
    assert cfg.workers == 3
    assert cfg.latency.queue.fixed_latency == 0.0
    assert cfg.tau == float("inf")
    assert cfg.seed == 9


@pytest.mark.parametrize(
    "override",
    ["training.bogus=1", "nosection.key.deep=1", "strategy.name=unknown", "novalue", "training.workers=0"],
)
def test_bad_overrides_are_configuration_errors(override):
    with pytest.raises(ConfigurationError):
        load_config(DEFAULT_CONFIG, [override])


def test_unreadable_or_invalid_config_files(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.toml")
    broken = tmp_path / "broken.toml"
    broken.write_text("[training\nworkers = ", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_config(broken)


def test_scatter_reduce_needs_enough_parameters():
    with pytest.raises(ValueError):
        ExperimentConfig(strategy="scatterreduce", classes=2, features=1, workers=5)


def test_round_state_lives_only_in_the_store(make_config):
    setup = prepared_world(make_config(strategy="spirt"))
    assert all(state.params is None for state in setup.workers)
    stored = persisted_params(setup.workers[0], setup.dims)
    assert stored.dims == (3, 4)


@pytest.mark.parametrize("strategy", ["allreduce", "spirt", "scatterreduce", "mlless"])
def test_finished_round_keys_are_discarded(make_config, strategy):
    setup = prepared_world(make_config(strategy=strategy, tau=0.0))
    run_round(setup)
    label = setup.cfg.strategy.value
    assert not [key for key in setup.world.shared_db.keys() if key.startswith(f"{label}:r0:")]
    for w, store in enumerate(setup.world.local_dbs):
        state_keys = {PARAMS_STATE_KEY.format(worker=w)}
        if setup.carries_residual:
            state_keys.add(RESIDUAL_STATE_KEY.format(worker=w))
        assert set(store.keys()) == state_keys
        assert kv_exists(store, PARAMS_STATE_KEY.format(worker=w))


def test_discarding_an_unknown_round_drops_nothing(make_config):
    setup = prepared_world(make_config(strategy="allreduce"))
    run_round(setup)
    assert discard_round_keys(setup, 7) == 0
