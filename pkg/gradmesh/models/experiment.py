from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from gradmesh.core.constants import DEFAULT_MIN_DELTA, DEFAULT_PATIENCE, DEFAULT_POLL_BUDGET
from gradmesh.models.traffic import SubstrateClass


class StrategyKind(str, Enum):
    SPIRT_P2P = "SpirtP2P"
    MLLESS_PS = "MLLessPS"
    SCATTER_REDUCE = "ScatterReduce"
    ALL_REDUCE = "AllReduce"
    SHARED_STORE_BASELINE = "SharedStoreBaseline"


STRATEGY_ALIASES: dict[str, StrategyKind] = {
    "spirt": StrategyKind.SPIRT_P2P,
    "spirtp2p": StrategyKind.SPIRT_P2P,
    "mlless": StrategyKind.MLLESS_PS,
    "mllessps": StrategyKind.MLLESS_PS,
    "scatterreduce": StrategyKind.SCATTER_REDUCE,
    "allreduce": StrategyKind.ALL_REDUCE,
    "sharedstore": StrategyKind.SHARED_STORE_BASELINE,
    "sharedstorebaseline": StrategyKind.SHARED_STORE_BASELINE,
    "gpu": StrategyKind.SHARED_STORE_BASELINE,
}


def parse_strategy(value: str | StrategyKind) -> StrategyKind:
    """Resolve a strategy name case-insensitively; raises ValueError for unknown names."""
    if isinstance(value, StrategyKind):
        return value
    normalized = str(value).strip().lower().replace("-", "").replace("_", "")
    if normalized in STRATEGY_ALIASES:
        return STRATEGY_ALIASES[normalized]
    raise ValueError(f"unknown strategy '{value}' (expected one of {', '.join(sorted(STRATEGY_ALIASES))})")


class SchedulerMode(str, Enum):
    DETERMINISTIC = "deterministic"
    CONCURRENT = "concurrent"


class InvocationMode(str, Enum):
    SERIAL = "serial"
    PARALLEL = "parallel"


class Deployment(str, Enum):
    SERVERLESS = "serverless"
    GPU = "gpu"


class PricingConfig(BaseModel):
    """AWS prices used by the cost model."""

    lambda_gb_second_usd: float = Field(default=0.0000166667, gt=0, description="Lambda x86 price per GB-second")
    gpu_hourly_usd: float = Field(default=0.526, gt=0, description="g4dn.xlarge on-demand hourly price")
    mb_per_gb: float = Field(default=1000.0, gt=0, description="MB→GB divisor applied to allocated RAM")


class ClassLatency(BaseModel):
    fixed_latency: float = Field(default=0.0, ge=0, description="Seconds charged per operation")
    bandwidth: float = Field(default=1e9, gt=0, description="Bytes per second")


class LatencyModel(BaseModel):
    """Per-substrate-class latency used in simulated-time mode."""

    local_db: ClassLatency = Field(default_factory=lambda: ClassLatency(fixed_latency=0.0002, bandwidth=2e9))
    shared_db: ClassLatency = Field(default_factory=lambda: ClassLatency(fixed_latency=0.002, bandwidth=1.25e8))
    queue: ClassLatency = Field(default_factory=lambda: ClassLatency(fixed_latency=0.001, bandwidth=1e8))
    object_store: ClassLatency = Field(default_factory=lambda: ClassLatency(fixed_latency=0.02, bandwidth=8e7))

    @classmethod
    def zero(cls) -> "LatencyModel":
        """A model that charges nothing (pure compute time)."""
        free = ClassLatency(fixed_latency=0.0, bandwidth=1e30)
        return cls(local_db=free, shared_db=free, queue=free, object_store=free)

    def for_class(self, cls: SubstrateClass) -> ClassLatency:
        return getattr(self, cls.value)

    def charge(self, cls: SubstrateClass, nbytes: int) -> float:
        entry = self.for_class(cls)
        return entry.fixed_latency + nbytes / entry.bandwidth

    def tick(self, cls: SubstrateClass) -> float:
        """One poll interval for a store of class `cls`."""
        return self.for_class(cls).fixed_latency


class ExperimentConfig(BaseModel):
    """Everything needed to reproduce one experiment."""

    model_config = ConfigDict(ser_json_inf_nan="strings", validate_assignment=True, extra="forbid")

    strategy: StrategyKind = StrategyKind.ALL_REDUCE
    workers: int = Field(default=4, ge=1)
    batches_per_worker: int = Field(default=32, ge=1)
    batch_size: int = Field(default=16, ge=1)
    epochs: int = Field(default=5, ge=1)
    lr: float = Field(default=0.5, gt=0)
    tau: float = Field(default=0.0, ge=0, description="MLLess significance threshold")
    minibatches_per_round: int = Field(default=1, ge=1, description="SPIRT minibatches per round")

    classes: int = Field(default=3, ge=2)
    features: int = Field(default=16, ge=1)
    n_examples: int = Field(default=2048, ge=2)
    separation: float = Field(default=5.0, ge=0)

    pricing: PricingConfig = Field(default_factory=PricingConfig)
    latency: LatencyModel = Field(default_factory=LatencyModel)
    ram_mb_assumed: float = Field(default=2048.0, gt=0, description="Allocated memory per function")
    compute_flops_per_second: float = Field(default=1e9, gt=0)
    invocation_mode: InvocationMode = InvocationMode.SERIAL
    deployment: Deployment | None = Field(default=None, description="None: GPU for SharedStoreBaseline")

    seed: int = Field(default=0, ge=0)
    scheduler: SchedulerMode = SchedulerMode.DETERMINISTIC
    spirt_in_database: bool = True
    poll_budget: int = Field(default=DEFAULT_POLL_BUDGET, ge=1)

    early_stopping: bool = False
    patience: int = Field(default=DEFAULT_PATIENCE, ge=1)
    min_delta: float = Field(default=DEFAULT_MIN_DELTA, ge=0)
    target_accuracy: float = Field(default=0.95, ge=0, le=1)
    compare_oracle: bool = True

    @field_validator("strategy", mode="before")
    @classmethod
    def _parse_strategy(cls, v):
        return parse_strategy(v)

    @model_validator(mode="after")
    def _check_protocol_constraints(self):
        if self.minibatches_per_round > 1 and self.strategy != StrategyKind.SPIRT_P2P:
            raise ValueError("minibatches_per_round > 1 is only supported by SpirtP2P")
        if self.batches_per_worker % self.minibatches_per_round:
            raise ValueError(
                f"batches_per_worker ({self.batches_per_worker}) must be divisible by "
                f"minibatches_per_round ({self.minibatches_per_round})"
            )
        if self.strategy == StrategyKind.SCATTER_REDUCE and self.workers > self.param_count:
            raise ValueError(f"ScatterReduce needs workers <= parameter count ({self.param_count}), got {self.workers}")
        return self

    @property
    def dims(self) -> tuple[int, int]:
        return self.classes, self.features

    @property
    def param_count(self) -> int:
        return self.classes * (self.features + 1)

    @property
    def rounds_per_epoch(self) -> int:
        return self.batches_per_worker // self.minibatches_per_round

    @property
    def resolved_deployment(self) -> Deployment:
        if self.deployment is not None:
            return self.deployment
        return Deployment.GPU if self.strategy == StrategyKind.SHARED_STORE_BASELINE else Deployment.SERVERLESS

    @property
    def is_exact(self) -> bool:
        """Exact configurations must reproduce the sequential oracle."""
        return self.strategy != StrategyKind.MLLESS_PS or self.tau == 0
