from loguru import logger

from gradmesh.core.constants import (
    LOCAL_AVG_KEY,
    MINIBATCH_GRAD_KEY,
    PARAMS_STATE_KEY,
    PEER_AVG_KEY,
    WORKER_AGGREGATE_KEY,
)
from gradmesh.core.exceptions import KeyNotFound, ProtocolError
from gradmesh.services.sgd.engine import GradientVector, ModelParams, apply_update, compute_gradient
from gradmesh.services.strategies.base import (
    Protocol,
    RoundContext,
    RoundOutcome,
    WorkerState,
    barrier_wait,
    execute_round,
    fetch_vector,
)
from gradmesh.services.substrate.clock import LogicalClock
from gradmesh.services.substrate.kv_store import KVStore
from gradmesh.services.substrate.world import SubstrateWorld
from gradmesh.utils.numeric import running_mean


def _average_into(
    store: KVStore, keys: list[str], output_key: str, in_database: bool, worker: int, clock: LogicalClock
) -> None:
    """Average `keys` into `output_key`, inside the database or by fetch-average-store."""
    if in_database:
        try:
            store.server_average(keys, output_key, clock=clock)
        except KeyNotFound as exc:
            raise ProtocolError("in-database average over a missing key", worker=worker, missing=[exc.key]) from exc
        return
    values = [fetch_vector(store, key, worker, clock) for key in keys]
    store.put_vector(output_key, running_mean(values), clock)


def spirt_worker(state: WorkerState, world: SubstrateWorld, ctx: RoundContext) -> Protocol:
    """
    Peer-to-peer SPIRT round for one worker.

    1. m minibatch gradients go to the worker's own LocalDB and are averaged there.
    2. Barrier on the synchronization store until all W local averages exist.
    3. The W-1 peer averages are copied from the peers' LocalDBs into the worker's own.
    4. A second average over the W local averages (ascending worker order) is the aggregate.
    5. The SGD step runs on the stored params key and the worker loads the result.

    With `spirt_in_database` off, steps 1, 4 and 5 fetch to the client, compute, and store.
    """
    me = state.worker_id
    clock = state.clock
    local = state.local_db
    if local is None:
        raise ProtocolError("SPIRT worker has no LocalDB", worker=me)
    params = state.require_params()
    batches = state.next_batches(ctx.minibatches_per_round)
    in_database = ctx.spirt_in_database

    minibatch_keys = []
    for part, batch in enumerate(batches):
        key = MINIBATCH_GRAD_KEY.format(strategy=ctx.label, round=ctx.round, worker=me, part=part)
        local.put_vector(key, compute_gradient(params, batch).values, clock)
        minibatch_keys.append(key)
    ctx.charge_compute(clock, len(batches))

    local_avg_key = LOCAL_AVG_KEY.format(strategy=ctx.label, round=ctx.round, worker=me)
    _average_into(local, minibatch_keys, local_avg_key, in_database, me, clock)

    world.barrier.barrier_add(ctx.round, me, clock=clock)
    yield from barrier_wait(world.barrier, ctx.round, me, world.workers, ctx.poll_budget, clock=clock)

    stage_keys = []
    for peer in range(world.workers):
        if peer == me:
            stage_keys.append(local_avg_key)
            continue
        peer_key = LOCAL_AVG_KEY.format(strategy=ctx.label, round=ctx.round, worker=peer)
        values = fetch_vector(world.local_dbs[peer], peer_key, me, clock, reader=me)
        copy_key = PEER_AVG_KEY.format(strategy=ctx.label, round=ctx.round, worker=me, part=peer)
        local.put_vector(copy_key, values, clock)
        stage_keys.append(copy_key)

    aggregate_key = WORKER_AGGREGATE_KEY.format(strategy=ctx.label, round=ctx.round, worker=me)
    _average_into(local, stage_keys, aggregate_key, in_database, me, clock)

    params_key = PARAMS_STATE_KEY.format(worker=me)
    if in_database:
        if not local.exists(params_key):
            raise ProtocolError("in-database update needs persisted params", worker=me, missing=[params_key])
        local.server_sgd_step(params_key, aggregate_key, ctx.lr, clock=clock)
        state.params = ModelParams.from_flat(fetch_vector(local, params_key, me, clock), params.dims)
        aggregate = local.peek_vector(aggregate_key)
    else:
        aggregate = fetch_vector(local, aggregate_key, me, clock)
        state.params = apply_update(params, GradientVector(values=aggregate, dims=params.dims), ctx.lr)
        local.put_vector(params_key, state.params.flat(), clock)
    logger.trace(f"[{ctx.label}] worker {me} updated params for round {ctx.round}")
    return GradientVector(values=aggregate, dims=params.dims)


def run_spirt_round(workers: list[WorkerState], world: SubstrateWorld, ctx: RoundContext) -> RoundOutcome:
    return execute_round(workers, world, ctx, spirt_worker, apply_updates=False)
