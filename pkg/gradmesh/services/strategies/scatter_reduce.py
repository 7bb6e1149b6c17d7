from gradmesh.core.constants import CHUNK_KEY, CHUNKS_PHASE, PARTIAL_KEY, PARTIALS_PHASE
from gradmesh.services.sgd.engine import compute_gradient
from gradmesh.services.strategies.base import (
    Protocol,
    RoundContext,
    RoundOutcome,
    WorkerState,
    barrier_wait,
    chunk_concat,
    chunk_split,
    execute_round,
    fetch_vector,
)
from gradmesh.services.substrate.world import SubstrateWorld
from gradmesh.utils.numeric import running_mean


def scatter_reduce_worker(state: WorkerState, world: SubstrateWorld, ctx: RoundContext) -> Protocol:
    """
    Worker i owns chunk i: it keeps that chunk of its own gradient, uploads the others,
    reduces chunk i over every worker's copy, publishes the reduced chunk, and finally
    assembles the full aggregate from all reduced chunks.
    """
    me = state.worker_id
    workers = world.workers
    clock = state.clock
    params = state.require_params()
    (batch,) = state.next_batches(1)
    grad = compute_gradient(params, batch)
    ctx.charge_compute(clock, 1)
    if workers == 1:
        return grad

    chunks = chunk_split(grad, workers)
    for part in range(workers):
        if part != me:
            key = CHUNK_KEY.format(strategy=ctx.label, round=ctx.round, worker=me, part=part)
            world.shared_db.put_vector(key, chunks[part], clock)
    world.barrier.barrier_add(ctx.round, me, phase=CHUNKS_PHASE, clock=clock)
    yield from barrier_wait(world.barrier, ctx.round, me, workers, ctx.poll_budget, clock=clock, phase=CHUNKS_PHASE)

    copies = [
        chunks[me]
        if w == me
        else fetch_vector(
            world.shared_db, CHUNK_KEY.format(strategy=ctx.label, round=ctx.round, worker=w, part=me), me, clock
        )
        for w in range(workers)
    ]
    reduced = running_mean(copies)
    world.shared_db.put_vector(PARTIAL_KEY.format(strategy=ctx.label, round=ctx.round, part=me), reduced, clock)
    world.barrier.barrier_add(ctx.round, me, phase=PARTIALS_PHASE, clock=clock)
    yield from barrier_wait(
        world.barrier, ctx.round, me, workers, ctx.poll_budget, clock=clock, phase=PARTIALS_PHASE
    )

    parts = [
        reduced
        if part == me
        else fetch_vector(
            world.shared_db, PARTIAL_KEY.format(strategy=ctx.label, round=ctx.round, part=part), me, clock
        )
        for part in range(workers)
    ]
    return chunk_concat(parts, params.dims)


def run_scatterreduce_round(workers: list[WorkerState], world: SubstrateWorld, ctx: RoundContext) -> RoundOutcome:
    return execute_round(workers, world, ctx, scatter_reduce_worker)
