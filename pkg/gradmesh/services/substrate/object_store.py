import threading

from gradmesh.core.constants import FRAME_HEADER_BYTES
from gradmesh.core.exceptions import ContractError, KeyNotFound
from gradmesh.models.traffic import SubstrateClass
from gradmesh.services.substrate.clock import LogicalClock, charge_latency, clock_owner
from gradmesh.services.substrate.codec import frame_body_size
from gradmesh.services.substrate.recorder import TrafficRecorder


class ObjectStore:
    """Flat bucket of framed objects (the S3 role)."""

    cls = SubstrateClass.OBJECT_STORE

    def __init__(self, name: str, recorder: TrafficRecorder) -> None:
        self.name = name
        self._recorder = recorder
        self._lock = threading.Lock()
        self._objects: dict[str, bytes] = {}

    def __repr__(self) -> str:
        return f"ObjectStore({self.name!r})"

    def put(self, key: str, value: bytes, clock: LogicalClock | None = None) -> bool:
        if not key:
            raise ContractError("object keys must be non-empty")
        body = frame_body_size(value)
        with self._lock:
            self._objects[key] = bytes(value)
            self._recorder.record(
                self.name, self.cls, "put", key, written=body, envelope=FRAME_HEADER_BYTES, worker=clock_owner(clock)
            )
        charge_latency(clock, self.cls, body)
        return True

    def get(self, key: str, clock: LogicalClock | None = None) -> bytes:
        with self._lock:
            try:
                value = self._objects[key]
            except KeyError:
                raise KeyNotFound(key, self.name) from None
            body = len(value) - FRAME_HEADER_BYTES
            self._recorder.record(
                self.name, self.cls, "get", key, read=body, envelope=FRAME_HEADER_BYTES, worker=clock_owner(clock)
            )
        charge_latency(clock, self.cls, body)
        return value

    def list(self, prefix: str = "", clock: LogicalClock | None = None) -> list[str]:
        """Keys under prefix, sorted. Listing moves metadata only, so it carries no payload bytes."""
        with self._lock:
            keys = sorted(key for key in self._objects if key.startswith(prefix))
            self._recorder.record(
                self.name, self.cls, "list", prefix, envelope=sum(len(key) for key in keys), worker=clock_owner(clock)
            )
        charge_latency(clock, self.cls, 0)
        return keys
