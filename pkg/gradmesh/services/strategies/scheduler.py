"""
Stepping of protocol generators.

deterministic: one thread, round-robin in insertion order (workers by id, supervisor last).
concurrent: one asyncio task per protocol, every step executed in a worker thread.
"""

import asyncio
from typing import Any, Generator

from loguru import logger

from gradmesh.core.config import settings
from gradmesh.models.experiment import SchedulerMode


def _step(gen: Generator) -> tuple[bool, Any]:
    try:
        next(gen)
    except StopIteration as stop:
        return True, stop.value
    return False, None


def run_deterministic(tasks: dict[str, Generator]) -> dict[str, Any]:
    pending = dict(tasks)
    results: dict[str, Any] = {}
    sweeps = 0
    while pending:
        sweeps += 1
        for name, gen in list(pending.items()):
            done, value = _step(gen)
            if done:
                results[name] = value
                del pending[name]
    logger.trace(f"Deterministic scheduler finished {len(tasks)} tasks in {sweeps} sweeps")
    return results


async def _drive(gen: Generator, backoff: float) -> Any:
    while True:
        done, value = await asyncio.to_thread(_step, gen)
        if done:
            return value
        await asyncio.sleep(backoff)


async def _gather(tasks: dict[str, Generator], backoff: float) -> dict[str, Any]:
    values = await asyncio.gather(*(_drive(gen, backoff) for gen in tasks.values()))
    return dict(zip(tasks.keys(), values))


def run_concurrent(tasks: dict[str, Generator], backoff: float | None = None) -> dict[str, Any]:
    backoff = settings.CONCURRENT_POLL_BACKOFF if backoff is None else backoff
    return asyncio.run(_gather(tasks, backoff))


def run_tasks(tasks: dict[str, Generator], mode: SchedulerMode = SchedulerMode.DETERMINISTIC) -> dict[str, Any]:
    """Run every protocol to completion and return name -> return value."""
    if mode == SchedulerMode.CONCURRENT:
        return run_concurrent(tasks)
    return run_deterministic(tasks)
