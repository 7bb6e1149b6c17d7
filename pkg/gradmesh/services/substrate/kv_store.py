import threading

import numpy as np
from loguru import logger

from gradmesh.core.constants import BARRIER_KEY, DEFAULT_BARRIER_PHASE, FRAME_HEADER_BYTES, QUEUE_ENVELOPE_BYTES
from gradmesh.core.exceptions import ContractError, KeyNotFound
from gradmesh.models.traffic import SubstrateClass
from gradmesh.services.substrate.clock import LogicalClock, charge_latency, clock_owner
from gradmesh.services.substrate.codec import decode_vector, encode_vector, frame_body_size
from gradmesh.services.substrate.recorder import TrafficRecorder
from gradmesh.utils.numeric import running_mean


class KVStore:
    """
    In-process key-value store with server-side aggregation (the RedisAI role).

    Values are framed float64 vectors (see codec). Every operation is atomic under the
    store lock and is recorded against the store's substrate class, and against the
    calling worker when the caller's clock names one.

    Payload counters hold the float64 body only (8 bytes per element). The 8-byte count
    header of every frame is tallied separately as envelope bytes.
    """

    def __init__(
        self,
        name: str,
        cls: SubstrateClass,
        recorder: TrafficRecorder,
        owner: int | None = None,
    ) -> None:
        self.name = name
        self.cls = cls
        self.owner = owner
        self._recorder = recorder
        self._lock = threading.RLock()
        self._data: dict[str, bytes] = {}
        self._sets: dict[str, set[int]] = {}

    def __repr__(self) -> str:
        return f"KVStore({self.name!r}, {self.cls.value})"

    @staticmethod
    def _check_key(key: str) -> None:
        if not key:
            raise ContractError("substrate keys must be non-empty")

    def _read(self, key: str) -> bytes:
        try:
            return self._data[key]
        except KeyError:
            raise KeyNotFound(key, self.name) from None

    def put(self, key: str, value: bytes, clock: LogicalClock | None = None) -> bool:
        """Store a framed value under key (last writer wins).

        Args:
            key: Non-empty key, namespaced strategy/round/worker/part by callers
            value: Framed float64 vector
            clock: Caller's simulated clock, charged for the transfer

        Returns:
            True once the value is stored
        """
        self._check_key(key)
        body = frame_body_size(value)
        with self._lock:
            self._data[key] = bytes(value)
            self._recorder.record(
                self.name, self.cls, "put", key, written=body, envelope=FRAME_HEADER_BYTES, worker=clock_owner(clock)
            )
        charge_latency(clock, self.cls, body)
        return True

    def get(self, key: str, clock: LogicalClock | None = None, reader: int | None = None) -> bytes:
        """Fetch the stored frame for key.

        Args:
            key: The key to retrieve
            clock: Caller's simulated clock
            reader: Worker id issuing the read; reads of another worker's LocalDB count as peer reads

        Raises:
            KeyNotFound: if the key was never written
        """
        self._check_key(key)
        with self._lock:
            value = self._read(key)
            body = len(value) - FRAME_HEADER_BYTES
            who = reader if reader is not None else clock_owner(clock)
            peer = body if (reader is not None and self.owner is not None and reader != self.owner) else 0
            self._recorder.record(
                self.name, self.cls, "get", key, read=body, envelope=FRAME_HEADER_BYTES, peer_read=peer, worker=who
            )
        charge_latency(clock, self.cls, body)
        return value

    def get_vector(self, key: str, clock: LogicalClock | None = None, reader: int | None = None) -> np.ndarray:
        return decode_vector(self.get(key, clock=clock, reader=reader))

    def put_vector(self, key: str, values: np.ndarray, clock: LogicalClock | None = None) -> bool:
        return self.put(key, encode_vector(values), clock=clock)

    def exists(self, key: str) -> bool:
        with self._lock:
            self._recorder.record(self.name, self.cls, "exists", key)
            return key in self._data

    def delete(self, key: str) -> bool:
        with self._lock:
            self._recorder.record(self.name, self.cls, "delete", key)
            return self._data.pop(key, None) is not None

    def server_average(self, input_keys: list[str], output_key: str, clock: LogicalClock | None = None) -> bool:
        """Average stored vectors inside the store; no payload crosses the client boundary.

        Counted as one op writing one vector and reading nothing client-side.

        Raises:
            KeyNotFound: if any input key is missing
            ContractError: if inputs have different lengths or the list is empty
        """
        self._check_key(output_key)
        if not input_keys:
            raise ContractError("server_average needs at least one input key")
        with self._lock:
            frames = [self._read(key) for key in input_keys]
            lengths = {len(frame) for frame in frames}
            if len(lengths) != 1:
                raise ContractError(f"server_average inputs have mismatched lengths: {sorted(lengths)}")
            result = encode_vector(running_mean(decode_vector(frame) for frame in frames))
            self._data[output_key] = result
            body = len(result) - FRAME_HEADER_BYTES
            self._recorder.record(
                self.name, self.cls, "server_average", output_key, written=body, worker=clock_owner(clock)
            )
        charge_latency(clock, self.cls, 0)
        logger.trace(f"[{self.name}] averaged {len(input_keys)} keys into {output_key}")
        return True

    def server_sgd_step(self, params_key: str, grad_key: str, lr: float, clock: LogicalClock | None = None) -> bool:
        """In-database model update: params <- params - lr * grad, one op, no client reads."""
        with self._lock:
            params = decode_vector(self._read(params_key))
            grad = decode_vector(self._read(grad_key))
            if params.shape != grad.shape:
                raise ContractError(f"params ({params.size}) and gradient ({grad.size}) lengths differ")
            result = encode_vector(params - lr * grad)
            self._data[params_key] = result
            self._recorder.record(
                self.name,
                self.cls,
                "server_sgd_step",
                params_key,
                written=len(result) - FRAME_HEADER_BYTES,
                worker=clock_owner(clock),
            )
        charge_latency(clock, self.cls, 0)
        return True

    def barrier_add(
        self, round: int, worker: int, phase: str = DEFAULT_BARRIER_PHASE, clock: LogicalClock | None = None
    ) -> int:
        """Atomic set-add of worker into the (round, phase) barrier; returns the current cardinality."""
        key = BARRIER_KEY.format(round=round, phase=phase)
        with self._lock:
            members = self._sets.setdefault(key, set())
            members.add(worker)
            count = len(members)
            self._recorder.record(
                self.name, self.cls, "barrier_add", key, envelope=QUEUE_ENVELOPE_BYTES + len(key), worker=worker
            )
        charge_latency(clock, self.cls, 0)
        return count

    def barrier_count(self, round: int, phase: str = DEFAULT_BARRIER_PHASE) -> int:
        """One poll of the barrier; counted as an op, carries no bytes."""
        key = BARRIER_KEY.format(round=round, phase=phase)
        with self._lock:
            self._recorder.record(self.name, self.cls, "barrier_poll", key)
            return len(self._sets.get(key, ()))

    def barrier_members(self, round: int, phase: str = DEFAULT_BARRIER_PHASE) -> set[int]:
        """Uncounted view of the registered workers, for diagnostics."""
        with self._lock:
            return set(self._sets.get(BARRIER_KEY.format(round=round, phase=phase), ()))

    def peek_vector(self, key: str) -> np.ndarray:
        """Uncounted read for harness bookkeeping (metrics, digests); protocols never call it."""
        with self._lock:
            return decode_vector(self._read(key))

    def keys(self) -> list[str]:
        with self._lock:
            return sorted(self._data)
