"""
Round-protocol building blocks shared by every aggregation strategy.

A worker protocol is a generator: it performs substrate operations directly and yields
only after a poll found its awaited condition unmet. The generator's return value is the
worker's aggregated gradient for the round. Schedulers (see scheduler.py) step them.
"""

from dataclasses import dataclass, field
from typing import Callable, Generator

import numpy as np
from loguru import logger

from gradmesh.core.constants import DEFAULT_BARRIER_PHASE, DEFAULT_POLL_BUDGET, SIGNIFICANCE_EPSILON
from gradmesh.core.exceptions import ConfigurationError, ContractError, KeyNotFound, ProtocolError
from gradmesh.models.experiment import InvocationMode, SchedulerMode, StrategyKind
from gradmesh.models.traffic import TrafficCounters
from gradmesh.services.sgd.engine import GradientVector, Minibatch, ModelParams, apply_update
from gradmesh.services.strategies.scheduler import run_tasks
from gradmesh.services.substrate.clock import LogicalClock
from gradmesh.services.substrate.kv_store import KVStore
from gradmesh.services.substrate.world import SubstrateWorld

Protocol = Generator[None, None, GradientVector]


@dataclass
class WorkerState:
    """One emulated stateless worker.

    `params` and `residual` are only populated between restore and persist; the harness
    clears them at every round boundary.
    """

    worker_id: int
    state_store: KVStore
    schedule: list[Minibatch] = field(default_factory=list)
    params: ModelParams | None = None
    round: int = 0
    cursor: int = 0
    residual: GradientVector | None = None
    local_db: KVStore | None = None
    clock: LogicalClock = field(default_factory=LogicalClock)

    def require_params(self) -> ModelParams:
        if self.params is None:
            raise ProtocolError("worker params were not restored before the round", worker=self.worker_id)
        return self.params

    def next_batches(self, count: int) -> list[Minibatch]:
        batches = self.schedule[self.cursor : self.cursor + count]
        if len(batches) != count:
            raise ConfigurationError(
                f"worker {self.worker_id} schedule exhausted: wanted {count} batches at {self.cursor}, "
                f"{len(self.schedule)} scheduled"
            )
        self.cursor += count
        return batches


@dataclass(frozen=True)
class RoundContext:
    """Per-round knobs every protocol reads."""

    strategy: StrategyKind
    round: int
    lr: float
    tau: float = 0.0
    minibatches_per_round: int = 1
    spirt_in_database: bool = True
    poll_budget: int = DEFAULT_POLL_BUDGET
    scheduler: SchedulerMode = SchedulerMode.DETERMINISTIC
    compute_s_per_batch: float = 0.0
    invocation_mode: InvocationMode = InvocationMode.SERIAL

    @property
    def label(self) -> str:
        return self.strategy.value

    def charge_compute(self, clock: LogicalClock, batches: int) -> None:
        """Serial invocations pay every minibatch; parallel ones overlap them into one term."""
        terms = batches if self.invocation_mode == InvocationMode.SERIAL else 1
        clock.advance_compute(terms * self.compute_s_per_batch)


@dataclass(frozen=True)
class ChunkAssignment:
    total_dims: int
    workers: int
    boundaries: tuple[tuple[int, int], ...]

    @classmethod
    def for_dims(cls, total_dims: int, workers: int) -> "ChunkAssignment":
        """Contiguous ranges; the first total_dims mod workers chunks get one extra element."""
        if workers < 1:
            raise ConfigurationError(f"chunking needs at least one worker, got {workers}")
        if workers > total_dims:
            raise ConfigurationError(f"cannot split {total_dims} dims into {workers} non-empty chunks")
        base, extra = divmod(total_dims, workers)
        boundaries = []
        start = 0
        for i in range(workers):
            end = start + base + (1 if i < extra else 0)
            boundaries.append((start, end))
            start = end
        return cls(total_dims=total_dims, workers=workers, boundaries=tuple(boundaries))

    def sizes(self) -> list[int]:
        return [end - start for start, end in self.boundaries]


def chunk_split(g: GradientVector, workers: int) -> list[np.ndarray]:
    assignment = ChunkAssignment.for_dims(len(g), workers)
    return [g.values[start:end].copy() for start, end in assignment.boundaries]


def chunk_concat(chunks: list[np.ndarray], dims: tuple[int, int]) -> GradientVector:
    return GradientVector(values=np.concatenate([np.asarray(c, dtype=np.float64) for c in chunks]), dims=dims)


def significance_test(update: GradientVector | np.ndarray, params: ModelParams, tau: float) -> bool:
    """True when ||update|| / (||params|| + eps) > tau."""
    values = update.values if isinstance(update, GradientVector) else np.asarray(update, dtype=np.float64)
    if values.size != params.size:
        raise ContractError(f"update of length {values.size} does not match params of size {params.size}")
    ratio = float(np.linalg.norm(values)) / (float(np.linalg.norm(params.flat())) + SIGNIFICANCE_EPSILON)
    return ratio > tau


@dataclass
class RoundOutcome:
    aggregates: dict[int, GradientVector]
    params: dict[int, ModelParams]
    durations: dict[int, float]
    sync_wait: dict[int, float]
    transfer: dict[int, float]
    traffic: TrafficCounters
    worker_traffic: dict[int, TrafficCounters] = field(default_factory=dict)

    @property
    def slowest_s(self) -> float:
        return max(self.durations.values(), default=0.0)

    @property
    def sync_wait_s(self) -> float:
        return max(self.sync_wait.values(), default=0.0)

    @property
    def transfer_s(self) -> float:
        return max(self.transfer.values(), default=0.0)

    def workers_agree(self) -> bool:
        """Bitwise agreement of every worker's aggregate and updated params."""
        aggregates = [g.values.tobytes() for g in self.aggregates.values()]
        params = [p.flat().tobytes() for p in self.params.values()]
        return len(set(aggregates)) <= 1 and len(set(params)) <= 1


def await_registrations(
    store: KVStore,
    round: int,
    worker: int,
    expected: int,
    poll_budget: int,
    clock: LogicalClock | None = None,
    phase: str = DEFAULT_BARRIER_PHASE,
) -> Generator[None, None, float]:
    """Poll the (round, phase) barrier until `expected` workers registered; returns the simulated wait.

    Every poll, including the one that succeeds, costs one tick of the store's class.
    """
    tick = clock.tick(store.cls) if clock is not None else 0.0
    waited = 0.0
    for _ in range(poll_budget):
        count = store.barrier_count(round, phase)
        waited += tick
        if clock is not None:
            clock.advance_wait(tick)
        if count >= expected:
            return waited
        yield
    members = store.barrier_members(round, phase)
    missing = [w for w in range(expected) if w not in members] if expected > 1 else []
    raise ProtocolError(
        f"barrier '{phase}' poll budget of {poll_budget} exhausted with {len(members)}/{expected} registered",
        round=round,
        worker=worker,
        missing=missing,
    )


def barrier_wait(
    store: KVStore,
    round: int,
    worker: int,
    workers: int,
    poll_budget: int = DEFAULT_POLL_BUDGET,
    clock: LogicalClock | None = None,
    phase: str = DEFAULT_BARRIER_PHASE,
) -> Generator[None, None, float]:
    """Wait until all `workers` registered for (round, phase). The caller registered already.

    A single worker is its own quorum and returns without polling.
    """
    if workers == 1:
        return 0.0
    return (yield from await_registrations(store, round, worker, workers, poll_budget, clock=clock, phase=phase))


WorkerProtocol = Callable[[WorkerState, SubstrateWorld, RoundContext], Protocol]


def execute_round(
    workers: list[WorkerState],
    world: SubstrateWorld,
    ctx: RoundContext,
    protocol: WorkerProtocol,
    extra_tasks: dict[str, Generator] | None = None,
    apply_updates: bool = True,
) -> RoundOutcome:
    """Drive one round of `protocol` on every worker and collect the outcome.

    Each worker starts the round with a fresh invocation clock. When `apply_updates` is set
    the client-side SGD step is applied here; protocols that update in the database leave
    the new params on the worker themselves.
    """
    before = world.snapshot()
    worker_before = {s.worker_id: world.worker_snapshot(s.worker_id) for s in workers}
    for state in workers:
        state.clock = world.new_clock(owner=state.worker_id)
    tasks: dict[str, Generator] = {f"worker-{s.worker_id}": protocol(s, world, ctx) for s in workers}
    tasks.update(extra_tasks or {})
    try:
        results = run_tasks(tasks, ctx.scheduler)
    except ProtocolError as exc:
        raise exc.with_context(strategy=ctx.label, round=ctx.round)

    aggregates: dict[int, GradientVector] = {}
    params: dict[int, ModelParams] = {}
    for state in workers:
        aggregate = results[f"worker-{state.worker_id}"]
        aggregates[state.worker_id] = aggregate
        if apply_updates:
            state.params = apply_update(state.require_params(), aggregate, ctx.lr)
        params[state.worker_id] = state.require_params()
        state.round += 1

    outcome = RoundOutcome(
        aggregates=aggregates,
        params=params,
        durations={s.worker_id: s.clock.now for s in workers},
        sync_wait={s.worker_id: s.clock.sync_wait_s for s in workers},
        transfer={s.worker_id: s.clock.transfer_s for s in workers},
        traffic=world.snapshot().delta(before),
        worker_traffic={w: world.worker_snapshot(w).delta(snap) for w, snap in worker_before.items()},
    )
    logger.debug(
        f"[{ctx.label}] round {ctx.round} done: slowest={outcome.slowest_s:.6f}s "
        f"payload={outcome.traffic.total_payload_bytes()}B"
    )
    return outcome


def fetch_vector(
    store: KVStore, key: str, worker: int, clock: LogicalClock | None = None, reader: int | None = None
) -> np.ndarray:
    """kv_get for protocol code: a missing key here is an ordering bug, surfaced as ProtocolError."""
    try:
        return store.get_vector(key, clock=clock, reader=reader)
    except KeyNotFound as exc:
        raise ProtocolError(f"expected key is missing from {exc.substrate}", worker=worker, missing=[key]) from exc
