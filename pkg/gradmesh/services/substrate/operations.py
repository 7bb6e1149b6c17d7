"""
Functional surface over the substrate objects.

Each helper forwards to the store method of the same meaning, so callers can write
`kv_put(store, key, value)` the way the protocol descriptions read.
"""

from gradmesh.core.constants import DEFAULT_BARRIER_PHASE
from gradmesh.models.traffic import QueueMessage, TrafficCounters
from gradmesh.services.substrate.clock import LogicalClock, charge_latency
from gradmesh.services.substrate.kv_store import KVStore
from gradmesh.services.substrate.message_queue import MessageQueue
from gradmesh.services.substrate.object_store import ObjectStore
from gradmesh.services.substrate.world import SubstrateWorld

__all__ = [
    "charge_latency",
    "kv_barrier_add",
    "kv_barrier_count",
    "kv_delete",
    "kv_exists",
    "kv_get",
    "kv_put",
    "kv_server_average",
    "kv_server_sgd_step",
    "object_get",
    "object_list",
    "object_put",
    "queue_poll",
    "queue_push",
    "traffic_snapshot",
]


def kv_put(store: KVStore, key: str, value: bytes, clock: LogicalClock | None = None) -> bool:
    return store.put(key, value, clock=clock)


def kv_get(store: KVStore, key: str, clock: LogicalClock | None = None, reader: int | None = None) -> bytes:
    return store.get(key, clock=clock, reader=reader)


def kv_exists(store: KVStore, key: str) -> bool:
    return store.exists(key)


def kv_delete(store: KVStore, key: str) -> bool:
    return store.delete(key)


def kv_server_average(
    store: KVStore, input_keys: list[str], output_key: str, clock: LogicalClock | None = None
) -> bool:
    return store.server_average(input_keys, output_key, clock=clock)


def kv_server_sgd_step(
    store: KVStore, params_key: str, grad_key: str, lr: float, clock: LogicalClock | None = None
) -> bool:
    return store.server_sgd_step(params_key, grad_key, lr, clock=clock)


def kv_barrier_add(
    store: KVStore,
    round: int,
    worker: int,
    phase: str = DEFAULT_BARRIER_PHASE,
    clock: LogicalClock | None = None,
) -> int:
    return store.barrier_add(round, worker, phase=phase, clock=clock)


def kv_barrier_count(store: KVStore, round: int, phase: str = DEFAULT_BARRIER_PHASE) -> int:
    return store.barrier_count(round, phase=phase)


def queue_push(q: MessageQueue, msg: QueueMessage, clock: LogicalClock | None = None) -> bool:
    return q.push(msg, clock=clock)


def queue_poll(q: MessageQueue, max_wait: float = 0.0, clock: LogicalClock | None = None) -> QueueMessage | None:
    return q.poll(max_wait=max_wait, clock=clock)


def object_put(bucket: ObjectStore, key: str, value: bytes, clock: LogicalClock | None = None) -> bool:
    return bucket.put(key, value, clock=clock)


def object_get(bucket: ObjectStore, key: str, clock: LogicalClock | None = None) -> bytes:
    return bucket.get(key, clock=clock)


def object_list(bucket: ObjectStore, prefix: str = "", clock: LogicalClock | None = None) -> list[str]:
    return bucket.list(prefix, clock=clock)


def traffic_snapshot(world: SubstrateWorld) -> TrafficCounters:
    return world.snapshot()
