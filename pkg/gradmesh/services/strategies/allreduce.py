from gradmesh.core.constants import AGGREGATE_KEY, AGGREGATE_PHASE, GRAD_KEY, GRADS_PHASE, MASTER_WORKER
from gradmesh.services.sgd.engine import GradientVector, compute_gradient
from gradmesh.services.strategies.base import (
    Protocol,
    RoundContext,
    RoundOutcome,
    WorkerState,
    await_registrations,
    barrier_wait,
    execute_round,
    fetch_vector,
)
from gradmesh.services.substrate.world import SubstrateWorld
from gradmesh.utils.numeric import running_mean


def allreduce_worker(state: WorkerState, world: SubstrateWorld, ctx: RoundContext) -> Protocol:
    """
    Centralized AllReduce as one worker sees it.

    Everyone uploads its gradient to the SharedDB. The master (worker 0) waits for all
    uploads, fetches all W gradients (its own included, it keeps nothing in memory), and
    publishes the mean. Every worker, master included, then fetches the mean.
    """
    me = state.worker_id
    clock = state.clock
    params = state.require_params()
    (batch,) = state.next_batches(1)
    grad = compute_gradient(params, batch)
    ctx.charge_compute(clock, 1)

    world.shared_db.put_vector(GRAD_KEY.format(strategy=ctx.label, round=ctx.round, worker=me), grad.values, clock)
    world.barrier.barrier_add(ctx.round, me, phase=GRADS_PHASE, clock=clock)

    aggregate_key = AGGREGATE_KEY.format(strategy=ctx.label, round=ctx.round)
    if me == MASTER_WORKER:
        yield from barrier_wait(
            world.barrier, ctx.round, me, world.workers, ctx.poll_budget, clock=clock, phase=GRADS_PHASE
        )
        grads = [
            fetch_vector(world.shared_db, GRAD_KEY.format(strategy=ctx.label, round=ctx.round, worker=w), me, clock)
            for w in range(world.workers)
        ]
        world.shared_db.put_vector(aggregate_key, running_mean(grads), clock)
        world.barrier.barrier_add(ctx.round, me, phase=AGGREGATE_PHASE, clock=clock)
    else:
        yield from await_registrations(
            world.barrier, ctx.round, me, 1, ctx.poll_budget, clock=clock, phase=AGGREGATE_PHASE
        )

    return GradientVector(values=fetch_vector(world.shared_db, aggregate_key, me, clock), dims=params.dims)


def run_allreduce_round(workers: list[WorkerState], world: SubstrateWorld, ctx: RoundContext) -> RoundOutcome:
    return execute_round(workers, world, ctx, allreduce_worker)
