"""
Experiment driver: builds the world, runs epochs of the configured strategy, tracks
accuracy and cost, and compares against the single-node oracle.
"""

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
from loguru import logger

from gradmesh.core.constants import FLOPS_PER_PARAM_EXAMPLE, ROUND_KEY_PREFIX
from gradmesh.core.exceptions import ConfigurationError, ProtocolError
from gradmesh.models.experiment import Deployment, ExperimentConfig, InvocationMode, StrategyKind
from gradmesh.models.metrics import EpochMetrics, ExperimentResult
from gradmesh.services.cost import CostInputs, build_cost_report
from gradmesh.services.harness.state import persist_state, persisted_params, restore_state
from gradmesh.services.sgd.data import Dataset, generate_synthetic_dataset, partition_dataset
from gradmesh.services.sgd.engine import (
    Dims,
    GradientVector,
    ModelParams,
    accuracy,
    apply_update,
    compute_gradient,
    compute_loss,
    init_model,
)
from gradmesh.services.strategies import STRATEGY_RUNNERS
from gradmesh.services.strategies.base import RoundContext, RoundOutcome, WorkerState
from gradmesh.services.substrate.operations import kv_delete
from gradmesh.services.substrate.world import SubstrateWorld
from gradmesh.utils.numeric import max_relative_difference, running_mean


@dataclass
class ExperimentWorld:
    """Everything one experiment mutates: substrates, workers, and the global round counter."""

    cfg: ExperimentConfig
    dataset: Dataset
    world: SubstrateWorld
    workers: list[WorkerState]
    rounds_done: int = 0
    rounds_agreed: bool = True
    history: list[float] = field(default_factory=list)

    @property
    def dims(self) -> Dims:
        return self.cfg.dims

    @property
    def carries_residual(self) -> bool:
        return self.cfg.strategy == StrategyKind.MLLESS_PS


def invocation_duration(
    dims: Dims,
    batch_size: int,
    compute_flops_per_second: float,
    latency_charges: Iterable[float] | float = 0.0,
) -> float:
    """Linear compute term (batch_size × params × flops/param/example ÷ rate) plus latency charges."""
    if not compute_flops_per_second > 0:
        raise ConfigurationError(f"compute rate must be positive, got {compute_flops_per_second}")
    classes, features = dims
    compute = batch_size * classes * (features + 1) * FLOPS_PER_PARAM_EXAMPLE / compute_flops_per_second
    charges = latency_charges if isinstance(latency_charges, (int, float)) else sum(latency_charges)
    return compute + charges


def _dataset_for(cfg: ExperimentConfig) -> Dataset:
    return generate_synthetic_dataset(cfg.n_examples, cfg.classes, cfg.features, cfg.separation, cfg.seed)


def build_world(cfg: ExperimentConfig, event_log_limit: int | None = None) -> ExperimentWorld:
    """Generate data, create substrates and workers, and persist the shared initial model.

    `event_log_limit` overrides GRADMESH_EVENT_LOG_LIMIT for this world's op event log.
    """
    dataset = _dataset_for(cfg)
    # fail fast on data shortage before any worker exists
    partition_dataset(dataset, cfg.workers, cfg.batches_per_worker, cfg.batch_size, seed=(cfg.seed, 0))
    world = SubstrateWorld(cfg.workers, latency=cfg.latency, event_log_limit=event_log_limit)
    initial = init_model(cfg.classes, cfg.features, cfg.seed)
    workers = []
    for w in range(cfg.workers):
        store = world.local_dbs[w]
        state = WorkerState(
            worker_id=w,
            state_store=store,
            local_db=store if cfg.strategy == StrategyKind.SPIRT_P2P else None,
            params=initial,
            clock=world.new_clock(owner=w),
        )
        if cfg.strategy == StrategyKind.MLLESS_PS:
            state.residual = GradientVector.zeros(cfg.dims)
        persist_state(state)
        workers.append(state)
    logger.debug(f"[{cfg.strategy.value}] world ready: {cfg.workers} workers, {len(dataset)} examples")
    return ExperimentWorld(cfg=cfg, dataset=dataset, world=world, workers=workers)


def _round_context(setup: ExperimentWorld) -> RoundContext:
    cfg = setup.cfg
    return RoundContext(
        strategy=cfg.strategy,
        round=setup.rounds_done,
        lr=cfg.lr,
        tau=cfg.tau,
        minibatches_per_round=cfg.minibatches_per_round,
        spirt_in_database=cfg.spirt_in_database,
        poll_budget=cfg.poll_budget,
        scheduler=cfg.scheduler,
        compute_s_per_batch=invocation_duration(cfg.dims, cfg.batch_size, cfg.compute_flops_per_second),
        invocation_mode=cfg.invocation_mode,
    )


def run_round(setup: ExperimentWorld) -> RoundOutcome:
    """restore → protocol round → persist, for every worker."""
    for state in setup.workers:
        restore_state(state, setup.dims, with_residual=setup.carries_residual)
    outcome = STRATEGY_RUNNERS[setup.cfg.strategy](setup.workers, setup.world, _round_context(setup))
    for state in setup.workers:
        persist_state(state)
    discard_round_keys(setup, setup.rounds_done)
    setup.rounds_done += 1
    setup.rounds_agreed = setup.rounds_agreed and outcome.workers_agree()
    return outcome


def discard_round_keys(setup: ExperimentWorld, round: int) -> int:
    """Delete a finished round's transient keys from every KV store; returns how many were dropped.

    Persisted worker state and the object-store bucket are left alone.
    """
    prefix = ROUND_KEY_PREFIX.format(strategy=setup.cfg.strategy.value, round=round)
    dropped = 0
    for store in (*setup.world.local_dbs, setup.world.shared_db):
        for key in store.keys():
            if key.startswith(prefix):
                dropped += kv_delete(store, key)
    logger.trace(f"[{setup.cfg.strategy.value}] dropped {dropped} keys of round {round}")
    return dropped


def assign_schedules(setup: ExperimentWorld, epoch: int) -> None:
    """Hand every worker its minibatch schedule for `epoch` (reshuffled per epoch)."""
    cfg = setup.cfg
    schedules = partition_dataset(
        setup.dataset, cfg.workers, cfg.batches_per_worker, cfg.batch_size, seed=(cfg.seed, epoch)
    )
    for state, schedule in zip(setup.workers, schedules):
        state.schedule = schedule
        state.cursor = 0


def run_epoch(setup: ExperimentWorld, epoch: int, cumulative_cost_usd: float = 0.0) -> EpochMetrics:
    cfg = setup.cfg
    if cfg.rounds_per_epoch < 1:
        raise ConfigurationError("an epoch needs at least one round")
    assign_schedules(setup, epoch)

    before = setup.world.snapshot()
    invocation_times: list[float] = []
    total_time = sync_wait = transfer = 0.0
    for _ in range(cfg.rounds_per_epoch):
        outcome = run_round(setup)
        invocation_times.extend(outcome.durations.values())
        total_time += outcome.slowest_s
        sync_wait += outcome.sync_wait_s
        transfer += outcome.transfer_s
    traffic = setup.world.snapshot().delta(before)

    invocations = cfg.rounds_per_epoch
    if cfg.invocation_mode == InvocationMode.PARALLEL:
        invocations *= cfg.minibatches_per_round
    mean_invocation = float(np.mean(invocation_times))
    serial_time = mean_invocation * invocations

    deployment = cfg.resolved_deployment
    if deployment == Deployment.GPU:
        usage = CostInputs(workers=cfg.workers, duration_s=total_time)
    else:
        usage = CostInputs(
            workers=cfg.workers,
            duration_s=mean_invocation,
            invocations_per_worker=invocations,
            ram_mb=cfg.ram_mb_assumed,
        )
    cost = build_cost_report(usage, cfg.pricing, deployment)

    params = persisted_params(setup.workers[0], setup.dims)
    full = setup.dataset.full_batch()
    metrics = EpochMetrics(
        epoch=epoch,
        train_accuracy=accuracy(params, full),
        mean_loss=compute_loss(params, full),
        rounds=cfg.rounds_per_epoch,
        invocations_per_worker=invocations,
        mean_invocation_s=mean_invocation,
        total_time_s=total_time,
        serial_time_s=serial_time,
        sync_wait_s=sync_wait,
        transfer_s=transfer,
        traffic=traffic,
        cost=cost,
        cumulative_cost_usd=cumulative_cost_usd + cost.total_usd,
    )
    logger.info(
        f"[{cfg.strategy.value}] epoch {epoch}: acc={metrics.train_accuracy:.4f} loss={metrics.mean_loss:.4f} "
        f"time={total_time:.4f}s cost=${cost.total_usd:.6g}"
    )
    return metrics


def early_stop_check(history: list[float], patience: int, min_delta: float) -> bool:
    """True when the last `patience` epochs failed to beat the earlier best by at least min_delta."""
    if patience < 1:
        raise ConfigurationError(f"patience must be >= 1, got {patience}")
    if len(history) <= patience:
        return False
    best_before = max(history[:-patience])
    return max(history[-patience:]) < best_before + min_delta


def _oracle_epochs(cfg: ExperimentConfig, dataset: Dataset, epochs: int) -> Iterator[ModelParams]:
    params = init_model(cfg.classes, cfg.features, cfg.seed)
    m = cfg.minibatches_per_round
    for epoch in range(epochs):
        schedules = partition_dataset(
            dataset, cfg.workers, cfg.batches_per_worker, cfg.batch_size, seed=(cfg.seed, epoch)
        )
        for r in range(cfg.rounds_per_epoch):
            worker_means = [
                running_mean(compute_gradient(params, batch).values for batch in schedule[r * m : (r + 1) * m])
                for schedule in schedules
            ]
            params = apply_update(params, GradientVector(values=running_mean(worker_means), dims=cfg.dims), cfg.lr)
        yield params


def oracle_sequential_run(cfg: ExperimentConfig, epochs: int | None = None) -> ModelParams:
    """Single-node SGD on the same batch sequence: each step uses the mean of the round's worker gradients.

    Each worker's minibatches for a round are averaged first, then the per-worker means,
    both in ascending order. The strategy field is ignored.
    """
    params = init_model(cfg.classes, cfg.features, cfg.seed)
    for params in _oracle_epochs(cfg, _dataset_for(cfg), cfg.epochs if epochs is None else epochs):
        pass
    return params


def oracle_epochs_to_target(cfg: ExperimentConfig, max_epochs: int) -> int | None:
    """Epochs the sequential oracle needs to reach cfg.target_accuracy on the full dataset, or None."""
    dataset = _dataset_for(cfg)
    full = dataset.full_batch()
    for done, params in enumerate(_oracle_epochs(cfg, dataset, max_epochs), start=1):
        if accuracy(params, full) >= cfg.target_accuracy:
            return done
    return None


def epochs_to_target(cfg: ExperimentConfig, max_epochs: int) -> int | None:
    """Epochs the configured strategy needs to reach cfg.target_accuracy, stopping as soon as it does."""
    setup = build_world(cfg)
    for epoch in range(max_epochs):
        if run_epoch(setup, epoch).train_accuracy >= cfg.target_accuracy:
            return epoch + 1
    return None


def params_digest(params: ModelParams) -> str:
    return hashlib.sha256(params.flat().tobytes()).hexdigest()


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    result, _ = run_instrumented(cfg)
    return result


def run_instrumented(
    cfg: ExperimentConfig, event_log_limit: int | None = None
) -> tuple[ExperimentResult, ExperimentWorld]:
    """Run the experiment and also hand back its world, for counter and event-log dumps."""
    logger.info(
        f"Running {cfg.strategy.value}: W={cfg.workers} epochs={cfg.epochs} seed={cfg.seed} "
        f"scheduler={cfg.scheduler.value}"
    )
    setup = build_world(cfg, event_log_limit=event_log_limit)
    epochs: list[EpochMetrics] = []
    early_stopped = False
    cumulative = 0.0
    try:
        for epoch in range(cfg.epochs):
            metrics = run_epoch(setup, epoch, cumulative)
            cumulative = metrics.cumulative_cost_usd
            epochs.append(metrics)
            setup.history.append(metrics.train_accuracy)
            if cfg.early_stopping and early_stop_check(setup.history, cfg.patience, cfg.min_delta):
                logger.info(f"[{cfg.strategy.value}] early stop after epoch {epoch}")
                early_stopped = True
                break
    except ProtocolError as exc:
        exc.with_context(strategy=cfg.strategy.value)
        logger.error(f"Protocol failure: {exc}")
        raise

    finals = [persisted_params(state, cfg.dims) for state in setup.workers]
    final = finals[0]
    workers_agree = all(p.equals(final) for p in finals[1:])

    divergence = None
    if cfg.compare_oracle and cfg.is_exact:
        oracle = oracle_sequential_run(cfg, epochs=len(epochs))
        divergence = max_relative_difference(final.flat(), oracle.flat())
        logger.debug(f"Oracle divergence {divergence:.3e}")

    reached = None
    time_to_target = None
    elapsed = 0.0
    for metrics in epochs:
        elapsed += metrics.total_time_s
        if metrics.train_accuracy >= cfg.target_accuracy:
            reached = metrics.epoch + 1
            time_to_target = elapsed
            break

    result = ExperimentResult(
        config=cfg,
        epochs=epochs,
        early_stopped=early_stopped,
        params_digest=params_digest(final),
        workers_agree=workers_agree and setup.rounds_agreed,
        oracle_divergence=divergence,
        epochs_to_target=reached,
        time_to_target_s=time_to_target,
    )
    return result, setup
