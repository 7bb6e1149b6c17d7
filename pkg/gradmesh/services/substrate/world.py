import json

from loguru import logger

from gradmesh.core.config import settings
from gradmesh.core.exceptions import ConfigurationError
from gradmesh.models.experiment import LatencyModel
from gradmesh.models.traffic import SubstrateClass, TrafficCounters
from gradmesh.services.substrate.clock import LogicalClock
from gradmesh.services.substrate.kv_store import KVStore
from gradmesh.services.substrate.message_queue import MessageQueue
from gradmesh.services.substrate.object_store import ObjectStore
from gradmesh.services.substrate.recorder import TrafficRecorder


class SubstrateWorld:
    """
    Every communication backend of one experiment, sharing one traffic recorder.

    - one LocalDB per worker (also the worker's durable state store)
    - one SharedDB
    - one Queue-class barrier store for phase synchronization
    - one inbound queue per worker plus a supervisor queue
    - one object-store bucket
    """

    def __init__(
        self,
        workers: int,
        latency: LatencyModel | None = None,
        event_log_limit: int | None = None,
    ) -> None:
        if workers < 1:
            raise ConfigurationError(f"a world needs at least one worker, got {workers}")
        self.workers = workers
        self.latency = latency or LatencyModel()
        limit = settings.EVENT_LOG_LIMIT if event_log_limit is None else event_log_limit
        self.recorder = TrafficRecorder(event_log_limit=limit)

        self.local_dbs = [
            KVStore(f"local-db-{w}", SubstrateClass.LOCAL_DB, self.recorder, owner=w) for w in range(workers)
        ]
        self.shared_db = KVStore("shared-db", SubstrateClass.SHARED_DB, self.recorder)
        self.barrier = KVStore("sync-barrier", SubstrateClass.QUEUE, self.recorder)
        self.worker_queues = [MessageQueue(f"queue-w{w}", self.recorder) for w in range(workers)]
        self.supervisor_queue = MessageQueue("queue-supervisor", self.recorder)
        self.bucket = ObjectStore("gradient-bucket", self.recorder)
        logger.debug(f"Built substrate world for {workers} workers")

    def new_clock(self, owner: int | None = None) -> LogicalClock:
        return LogicalClock(latency=self.latency, owner=owner)

    def snapshot(self) -> TrafficCounters:
        return self.recorder.snapshot()

    def worker_snapshot(self, worker: int) -> TrafficCounters:
        return self.recorder.worker_snapshot(worker)

    def dump_counters_json(self) -> str:
        """class -> {bytes_read, bytes_written, op_count, ...} as sorted JSON."""
        return json.dumps(self.snapshot().to_dump(), indent=2, sort_keys=True)

    def events_jsonl(self) -> str:
        return self.recorder.events_jsonl()
