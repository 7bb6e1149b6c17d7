import json
import threading
from collections import deque

from gradmesh.models.traffic import ClassCounters, OpEvent, SubstrateClass, TrafficCounters


def _empty_counters() -> dict[SubstrateClass, ClassCounters]:
    return {cls: ClassCounters() for cls in SubstrateClass}


class TrafficRecorder:
    """
    Shared, lock-protected byte/op tallies for every substrate in one world.

    Substrates call `record` while holding their own lock, so a counter update is atomic
    with the operation it describes. Operations issued with a known worker are also
    tallied per worker.
    """

    def __init__(self, event_log_limit: int = 0) -> None:
        self._lock = threading.Lock()
        self._counters = _empty_counters()
        self._by_worker: dict[int, dict[SubstrateClass, ClassCounters]] = {}
        self._events: deque[OpEvent] | None = deque(maxlen=event_log_limit) if event_log_limit > 0 else None
        self._seq = 0

    def record(
        self,
        substrate: str,
        cls: SubstrateClass,
        op: str,
        key: str = "",
        written: int = 0,
        read: int = 0,
        envelope: int = 0,
        peer_read: int = 0,
        worker: int | None = None,
    ) -> None:
        with self._lock:
            tallies = [self._counters[cls]]
            if worker is not None:
                tallies.append(self._by_worker.setdefault(worker, _empty_counters())[cls])
            for entry in tallies:
                entry.bytes_written += written
                entry.bytes_read += read
                entry.envelope_bytes += envelope
                entry.peer_read_bytes += peer_read
                entry.op_count += 1
            self._seq += 1
            if self._events is not None:
                self._events.append(
                    OpEvent(
                        seq=self._seq,
                        substrate=substrate,
                        cls=cls,
                        op=op,
                        key=key,
                        worker=worker,
                        bytes_written=written,
                        bytes_read=read,
                    )
                )

    def snapshot(self) -> TrafficCounters:
        with self._lock:
            return TrafficCounters(classes={cls: c.model_copy() for cls, c in self._counters.items()})

    def worker_snapshot(self, worker: int) -> TrafficCounters:
        """Traffic issued by one worker so far; zero for a worker that never issued an op."""
        with self._lock:
            counters = self._by_worker.get(worker, {})
            return TrafficCounters(classes={cls: c.model_copy() for cls, c in counters.items()})

    def events(self) -> list[OpEvent]:
        with self._lock:
            return list(self._events or [])

    def events_jsonl(self) -> str:
        return "".join(json.dumps(event.model_dump(mode="json")) + "\n" for event in self.events())
