from .clock import LogicalClock, charge_latency
from .codec import decode_vector, encode_vector, frame_body_size
from .kv_store import KVStore
from .message_queue import MessageQueue
from .object_store import ObjectStore
from .operations import (
    kv_barrier_add,
    kv_barrier_count,
    kv_delete,
    kv_exists,
    kv_get,
    kv_put,
    kv_server_average,
    kv_server_sgd_step,
    object_get,
    object_list,
    object_put,
    queue_poll,
    queue_push,
    traffic_snapshot,
)
from .recorder import TrafficRecorder
from .world import SubstrateWorld

__all__ = [
    "KVStore",
    "LogicalClock",
    "MessageQueue",
    "ObjectStore",
    "SubstrateWorld",
    "TrafficRecorder",
    "charge_latency",
    "decode_vector",
    "encode_vector",
    "frame_body_size",
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
