import threading
from collections import deque

from loguru import logger

from gradmesh.core.constants import QUEUE_ENVELOPE_BYTES
from gradmesh.models.traffic import QueueMessage, SubstrateClass
from gradmesh.services.substrate.clock import LogicalClock, charge_latency, clock_owner
from gradmesh.services.substrate.recorder import TrafficRecorder


class MessageQueue:
    """FIFO control queue (the RabbitMQ/SQS role). Only envelopes travel here, never payloads."""

    cls = SubstrateClass.QUEUE

    def __init__(self, name: str, recorder: TrafficRecorder) -> None:
        self.name = name
        self._recorder = recorder
        self._messages: deque[QueueMessage] = deque()
        self._ready = threading.Condition()

    def __repr__(self) -> str:
        return f"MessageQueue({self.name!r}, depth={len(self)})"

    def __len__(self) -> int:
        with self._ready:
            return len(self._messages)

    def push(self, msg: QueueMessage, clock: LogicalClock | None = None) -> bool:
        size = msg.wire_size(QUEUE_ENVELOPE_BYTES)
        with self._ready:
            self._messages.append(msg)
            self._recorder.record(
                self.name, self.cls, "push", msg.payload_key or msg.kind.value, envelope=size, worker=clock_owner(clock)
            )
            self._ready.notify_all()
        charge_latency(clock, self.cls, size)
        return True

    def poll(self, max_wait: float = 0.0, clock: LogicalClock | None = None) -> QueueMessage | None:
        """Remove and return the oldest message, waiting up to max_wait real seconds.

        An empty poll is not an error: it returns None and still counts as one op.
        """
        with self._ready:
            if not self._messages and max_wait > 0:
                self._ready.wait_for(lambda: bool(self._messages), timeout=max_wait)
            if not self._messages:
                self._recorder.record(self.name, self.cls, "poll", worker=clock_owner(clock))
                return None
            msg = self._messages.popleft()
            size = msg.wire_size(QUEUE_ENVELOPE_BYTES)
            self._recorder.record(
                self.name, self.cls, "poll", msg.payload_key or msg.kind.value, envelope=size, worker=clock_owner(clock)
            )
        charge_latency(clock, self.cls, size)
        logger.trace(f"[{self.name}] delivered {msg.kind.value} from {msg.sender} (round {msg.round})")
        return msg
