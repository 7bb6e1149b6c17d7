from typing import Generator

import numpy as np
from loguru import logger

from gradmesh.core.constants import SUPERVISOR_ID, UPDATE_KEY
from gradmesh.core.exceptions import ProtocolError
from gradmesh.models.traffic import MessageKind, QueueMessage, SubstrateClass
from gradmesh.services.sgd.engine import GradientVector, compute_gradient
from gradmesh.services.strategies.base import (
    Protocol,
    RoundContext,
    RoundOutcome,
    WorkerState,
    execute_round,
    fetch_vector,
    significance_test,
)
from gradmesh.services.substrate.clock import LogicalClock
from gradmesh.services.substrate.message_queue import MessageQueue
from gradmesh.services.substrate.world import SubstrateWorld
from gradmesh.utils.numeric import running_mean


def _receive(
    queue: MessageQueue, ctx: RoundContext, who: int, clock: LogicalClock
) -> Generator[None, None, QueueMessage]:
    """Poll `queue` until a message for this round arrives; unmet polls cost one queue tick each."""
    tick = clock.tick(SubstrateClass.QUEUE)
    for _ in range(ctx.poll_budget):
        msg = queue.poll(clock=clock)
        if msg is not None:
            if msg.round != ctx.round:
                raise ProtocolError(
                    f"{msg.kind.value} from {msg.sender} belongs to round {msg.round}", round=ctx.round, worker=who
                )
            return msg
        clock.advance_wait(tick)
        yield
    raise ProtocolError(f"no message on {queue.name} within {ctx.poll_budget} polls", round=ctx.round, worker=who)


def supervisor(world: SubstrateWorld, ctx: RoundContext) -> Generator[None, None, None]:
    """Collect one UpdateKey or Done from every worker, then release them all with Proceed."""
    clock = world.new_clock(owner=SUPERVISOR_ID)
    heard: set[int] = set()
    try:
        while len(heard) < world.workers:
            msg = yield from _receive(world.supervisor_queue, ctx, SUPERVISOR_ID, clock)
            heard.add(msg.sender)
    except ProtocolError as exc:
        exc.missing = [w for w in range(world.workers) if w not in heard]
        raise
    for worker_queue in world.worker_queues:
        worker_queue.push(QueueMessage(sender=SUPERVISOR_ID, round=ctx.round, kind=MessageKind.PROCEED), clock)


def mlless_worker(state: WorkerState, world: SubstrateWorld, ctx: RoundContext) -> Protocol:
    """
    Significance-filtered parameter-server round.

    The candidate update is the fresh gradient plus the residual of held-back updates.
    Significant candidates are stored in the SharedDB and announced to every peer and the
    supervisor; the residual resets. Otherwise the candidate becomes the new residual and
    only a Done reaches the supervisor. After Proceed the worker averages its own
    contribution with every announced peer update, ascending by worker id.
    """
    me = state.worker_id
    clock = state.clock
    params = state.require_params()
    (batch,) = state.next_batches(1)
    grad = compute_gradient(params, batch)
    ctx.charge_compute(clock, 1)
    residual = state.residual.values if state.residual is not None else np.zeros(len(grad))
    candidate = grad.values + residual

    if significance_test(candidate, params, ctx.tau):
        key = UPDATE_KEY.format(strategy=ctx.label, round=ctx.round, worker=me)
        world.shared_db.put_vector(key, candidate, clock)
        announcement = QueueMessage(sender=me, round=ctx.round, kind=MessageKind.UPDATE_KEY, payload_key=key)
        for peer, peer_queue in enumerate(world.worker_queues):
            if peer != me:
                peer_queue.push(announcement, clock)
        world.supervisor_queue.push(announcement, clock)
        state.residual = GradientVector.zeros(params.dims)
        own = candidate
    else:
        state.residual = GradientVector(values=candidate, dims=params.dims)
        world.supervisor_queue.push(QueueMessage(sender=me, round=ctx.round, kind=MessageKind.DONE), clock)
        own = grad.values

    announced: dict[int, str] = {}
    while True:
        msg = yield from _receive(world.worker_queues[me], ctx, me, clock)
        if msg.kind == MessageKind.PROCEED:
            break
        if msg.kind == MessageKind.UPDATE_KEY:
            announced[msg.sender] = msg.payload_key

    contributions = [
        own if w == me else fetch_vector(world.shared_db, announced[w], me, clock)
        for w in range(world.workers)
        if w == me or w in announced
    ]
    logger.trace(f"[{ctx.label}] worker {me} aggregates {len(contributions)} updates in round {ctx.round}")
    return GradientVector(values=running_mean(contributions), dims=params.dims)


def run_mlless_round(workers: list[WorkerState], world: SubstrateWorld, ctx: RoundContext) -> RoundOutcome:
    return execute_round(workers, world, ctx, mlless_worker, extra_tasks={"supervisor": supervisor(world, ctx)})
