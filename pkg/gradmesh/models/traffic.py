from enum import Enum

from pydantic import BaseModel, Field, model_validator


class SubstrateClass(str, Enum):
    LOCAL_DB = "local_db"
    SHARED_DB = "shared_db"
    QUEUE = "queue"
    OBJECT_STORE = "object_store"


# Classes that carry gradient/params payloads; Queue only moves control envelopes
PAYLOAD_CLASSES: tuple[SubstrateClass, ...] = (
    SubstrateClass.LOCAL_DB,
    SubstrateClass.SHARED_DB,
    SubstrateClass.OBJECT_STORE,
)


class ClassCounters(BaseModel):
    """Byte/op tallies for one substrate class."""

    bytes_written: int = 0
    bytes_read: int = 0
    op_count: int = 0
    envelope_bytes: int = Field(default=0, description="Frame headers, queue envelopes, barrier registrations")
    peer_read_bytes: int = Field(default=0, description="Payload bytes read from another worker's LocalDB")

    def minus(self, other: "ClassCounters") -> "ClassCounters":
        return ClassCounters(
            bytes_written=self.bytes_written - other.bytes_written,
            bytes_read=self.bytes_read - other.bytes_read,
            op_count=self.op_count - other.op_count,
            envelope_bytes=self.envelope_bytes - other.envelope_bytes,
            peer_read_bytes=self.peer_read_bytes - other.peer_read_bytes,
        )

    def plus(self, other: "ClassCounters") -> "ClassCounters":
        return ClassCounters(
            bytes_written=self.bytes_written + other.bytes_written,
            bytes_read=self.bytes_read + other.bytes_read,
            op_count=self.op_count + other.op_count,
            envelope_bytes=self.envelope_bytes + other.envelope_bytes,
            peer_read_bytes=self.peer_read_bytes + other.peer_read_bytes,
        )


class TrafficCounters(BaseModel):
    """Point-in-time copy of per-class traffic; every class is always present."""

    classes: dict[SubstrateClass, ClassCounters] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _fill_classes(self):
        for cls in SubstrateClass:
            self.classes.setdefault(cls, ClassCounters())
        return self

    def __getitem__(self, cls: SubstrateClass) -> ClassCounters:
        return self.classes[cls]

    def delta(self, earlier: "TrafficCounters") -> "TrafficCounters":
        """Counters accumulated since `earlier`."""
        return TrafficCounters(classes={cls: self.classes[cls].minus(earlier.classes[cls]) for cls in SubstrateClass})

    def merged(self, other: "TrafficCounters") -> "TrafficCounters":
        return TrafficCounters(classes={cls: self.classes[cls].plus(other.classes[cls]) for cls in SubstrateClass})

    def payload_view(self) -> dict[str, tuple[int, int]]:
        """(bytes_written, bytes_read) for payload-carrying classes only."""
        return {cls.value: (self.classes[cls].bytes_written, self.classes[cls].bytes_read) for cls in PAYLOAD_CLASSES}

    def total_payload_bytes(self) -> int:
        return sum(self.classes[cls].bytes_written + self.classes[cls].bytes_read for cls in PAYLOAD_CLASSES)

    def to_dump(self) -> dict[str, dict[str, int]]:
        """JSON-friendly dump: class -> {bytes_read, bytes_written, op_count, ...}."""
        return {cls.value: self.classes[cls].model_dump() for cls in SubstrateClass}


class MessageKind(str, Enum):
    UPDATE_KEY = "update_key"
    PROCEED = "proceed"
    DONE = "done"


class QueueMessage(BaseModel):
    sender: int = Field(description="Worker id, or -1 for the supervisor")
    round: int = Field(ge=0)
    kind: MessageKind
    payload_key: str | None = None

    @model_validator(mode="after")
    def _check_payload_key(self):
        if self.kind == MessageKind.UPDATE_KEY and not self.payload_key:
            raise ValueError("update_key messages must carry a payload_key")
        if self.kind == MessageKind.PROCEED and self.payload_key:
            raise ValueError("proceed messages carry no payload_key")
        return self

    def wire_size(self, envelope: int) -> int:
        return envelope + len(self.payload_key or "")


class OpEvent(BaseModel):
    """One entry of the optional per-op event log."""

    seq: int
    substrate: str
    cls: SubstrateClass
    op: str
    key: str
    worker: int | None = Field(default=None, description="Issuing worker, when the op carried one")
    bytes_written: int = 0
    bytes_read: int = 0
