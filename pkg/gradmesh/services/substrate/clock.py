from dataclasses import dataclass, field

from gradmesh.models.experiment import LatencyModel
from gradmesh.models.traffic import SubstrateClass


@dataclass
class LogicalClock:
    """Simulated time of one worker invocation, split by what it was spent on."""

    latency: LatencyModel = field(default_factory=LatencyModel)
    owner: int | None = None
    now: float = 0.0
    compute_s: float = 0.0
    transfer_s: float = 0.0
    sync_wait_s: float = 0.0

    def advance_compute(self, seconds: float) -> None:
        self.now += seconds
        self.compute_s += seconds

    def advance_wait(self, seconds: float) -> None:
        self.now += seconds
        self.sync_wait_s += seconds

    def tick(self, cls: SubstrateClass) -> float:
        return self.latency.tick(cls)


def clock_owner(clock: LogicalClock | None) -> int | None:
    return clock.owner if clock is not None else None


def charge_latency(clock: LogicalClock | None, cls: SubstrateClass, nbytes: int) -> float:
    """Charge fixed_latency + nbytes / bandwidth to the caller's clock and return it."""
    if clock is None:
        return 0.0
    elapsed = clock.latency.charge(cls, nbytes)
    clock.now += elapsed
    clock.transfer_s += elapsed
    return elapsed
