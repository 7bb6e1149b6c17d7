"""Round-boundary persistence: stateless workers keep nothing in memory between rounds."""

from loguru import logger

from gradmesh.core.constants import PARAMS_STATE_KEY, RESIDUAL_STATE_KEY
from gradmesh.core.exceptions import ContractError, KeyNotFound, ProtocolError
from gradmesh.services.sgd.engine import Dims, GradientVector, ModelParams
from gradmesh.services.strategies.base import WorkerState


def persist_state(state: WorkerState, verify: bool = True) -> None:
    """Write params (and the residual, when the protocol carries one) to the durable store, then drop them.

    With `verify`, the stored bytes are re-read and must equal what was written.
    """
    store = state.state_store
    params_key = PARAMS_STATE_KEY.format(worker=state.worker_id)
    params = state.require_params()
    store.put_vector(params_key, params.flat())
    if state.residual is not None:
        store.put_vector(RESIDUAL_STATE_KEY.format(worker=state.worker_id), state.residual.values)
    if verify and store.peek_vector(params_key).tobytes() != params.flat().tobytes():
        raise ContractError(f"worker {state.worker_id}: persisted params do not reload bitwise")
    state.params = None
    state.residual = None


def restore_state(state: WorkerState, dims: Dims, with_residual: bool = False) -> None:
    """Load the worker's params (and residual) from its durable store at the start of a round."""
    if state.params is not None or state.residual is not None:
        raise ProtocolError("in-memory state survived a round boundary", worker=state.worker_id)
    store = state.state_store
    try:
        state.params = ModelParams.from_flat(
            store.get_vector(PARAMS_STATE_KEY.format(worker=state.worker_id), reader=state.worker_id), dims
        )
        if with_residual:
            values = store.get_vector(RESIDUAL_STATE_KEY.format(worker=state.worker_id), reader=state.worker_id)
            state.residual = GradientVector(values=values, dims=dims)
    except KeyNotFound as exc:
        raise ProtocolError("worker state was never persisted", worker=state.worker_id, missing=[exc.key]) from exc
    logger.trace(f"Restored worker {state.worker_id} state")


def persisted_params(state: WorkerState, dims: Dims) -> ModelParams:
    """Uncounted view of the worker's stored params, for evaluation and digests."""
    return ModelParams.from_flat(state.state_store.peek_vector(PARAMS_STATE_KEY.format(worker=state.worker_id)), dims)
