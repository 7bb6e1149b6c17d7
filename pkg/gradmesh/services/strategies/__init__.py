from typing import Callable

from gradmesh.models.experiment import StrategyKind
from gradmesh.services.substrate.world import SubstrateWorld

from .allreduce import run_allreduce_round
from .base import (
    ChunkAssignment,
    RoundContext,
    RoundOutcome,
    WorkerState,
    barrier_wait,
    chunk_concat,
    chunk_split,
    significance_test,
)
from .mlless import run_mlless_round
from .scatter_reduce import run_scatterreduce_round
from .scheduler import run_concurrent, run_deterministic, run_tasks
from .shared_store import run_sharedstore_round
from .spirt import run_spirt_round

RoundRunner = Callable[[list[WorkerState], SubstrateWorld, RoundContext], RoundOutcome]

STRATEGY_RUNNERS: dict[StrategyKind, RoundRunner] = {
    StrategyKind.SPIRT_P2P: run_spirt_round,
    StrategyKind.MLLESS_PS: run_mlless_round,
    StrategyKind.SCATTER_REDUCE: run_scatterreduce_round,
    StrategyKind.ALL_REDUCE: run_allreduce_round,
    StrategyKind.SHARED_STORE_BASELINE: run_sharedstore_round,
}

__all__ = [
    "STRATEGY_RUNNERS",
    "ChunkAssignment",
    "RoundContext",
    "RoundOutcome",
    "WorkerState",
    "barrier_wait",
    "chunk_concat",
    "chunk_split",
    "run_allreduce_round",
    "run_concurrent",
    "run_deterministic",
    "run_mlless_round",
    "run_scatterreduce_round",
    "run_sharedstore_round",
    "run_spirt_round",
    "run_tasks",
    "significance_test",
]
