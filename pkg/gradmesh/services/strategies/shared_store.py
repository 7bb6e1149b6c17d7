from gradmesh.core.constants import OBJECT_KEY, OBJECT_PREFIX, UPLOADS_PHASE
from gradmesh.core.exceptions import KeyNotFound, ProtocolError
from gradmesh.services.sgd.engine import GradientVector, compute_gradient
from gradmesh.services.strategies.base import (
    Protocol,
    RoundContext,
    RoundOutcome,
    WorkerState,
    barrier_wait,
    execute_round,
)
from gradmesh.services.substrate.codec import decode_vector, encode_vector
from gradmesh.services.substrate.world import SubstrateWorld
from gradmesh.utils.numeric import running_mean


def shared_store_worker(state: WorkerState, world: SubstrateWorld, ctx: RoundContext) -> Protocol:
    """GPU-cluster pattern: upload to a shared bucket, download the peers' gradients, average locally."""
    me = state.worker_id
    clock = state.clock
    params = state.require_params()
    (batch,) = state.next_batches(1)
    grad = compute_gradient(params, batch)
    ctx.charge_compute(clock, 1)

    keys = [OBJECT_KEY.format(strategy=ctx.label, round=ctx.round, worker=w) for w in range(world.workers)]
    world.bucket.put(keys[me], encode_vector(grad.values), clock)
    world.barrier.barrier_add(ctx.round, me, phase=UPLOADS_PHASE, clock=clock)
    yield from barrier_wait(
        world.barrier, ctx.round, me, world.workers, ctx.poll_budget, clock=clock, phase=UPLOADS_PHASE
    )
    if world.workers == 1:
        return grad

    listed = set(world.bucket.list(OBJECT_PREFIX.format(strategy=ctx.label, round=ctx.round), clock))
    missing = [key for key in keys if key not in listed]
    if missing:
        raise ProtocolError("gradients missing from the shared bucket", worker=me, missing=missing)

    contributions = []
    for w, key in enumerate(keys):
        if w == me:
            contributions.append(grad.values)
            continue
        try:
            contributions.append(decode_vector(world.bucket.get(key, clock)))
        except KeyNotFound as exc:
            raise ProtocolError("gradient object vanished after listing", worker=me, missing=[key]) from exc
    return GradientVector(values=running_mean(contributions), dims=params.dims)


def run_sharedstore_round(workers: list[WorkerState], world: SubstrateWorld, ctx: RoundContext) -> RoundOutcome:
    return execute_round(workers, world, ctx, shared_store_worker)
