from enum import Enum

from pydantic import BaseModel, Field

from gradmesh.models.experiment import Deployment, ExperimentConfig, StrategyKind
from gradmesh.models.traffic import TrafficCounters


class CostRecord(BaseModel):
    """Monetary cost of one epoch (or one published cost row)."""

    deployment: Deployment = Deployment.SERVERLESS
    per_invocation_usd: float = 0.0
    invocations_per_worker: int = 0
    cost_per_worker_usd: float = 0.0
    workers: int = 0
    total_usd: float = 0.0
    duration_s: float = Field(default=0.0, description="Per-invocation seconds (serverless) or wall seconds (gpu)")
    ram_mb: float | None = Field(default=None, description="Allocated RAM; None for GPU deployments")


class EpochMetrics(BaseModel):
    epoch: int
    train_accuracy: float = Field(ge=0, le=1)
    mean_loss: float
    rounds: int
    invocations_per_worker: int
    mean_invocation_s: float = Field(ge=0, description="Mean simulated duration of one invocation")
    total_time_s: float = Field(ge=0, description="Simulated epoch time: sum over rounds of the slowest worker")
    serial_time_s: float = Field(ge=0, description="Back-to-back billing: mean invocation × invocations")
    sync_wait_s: float = Field(ge=0, description="Barrier/supervisor wait, slowest worker summed over rounds")
    transfer_s: float = Field(ge=0, description="Simulated substrate transfer time, slowest worker")
    traffic: TrafficCounters
    cost: CostRecord
    cumulative_cost_usd: float = 0.0


class ExperimentResult(BaseModel):
    config: ExperimentConfig
    epochs: list[EpochMetrics] = Field(default_factory=list)
    early_stopped: bool = False
    params_digest: str = ""
    workers_agree: bool = True
    oracle_divergence: float | None = Field(default=None, ge=0)
    epochs_to_target: int | None = None
    time_to_target_s: float | None = None

    @property
    def final_accuracy(self) -> float:
        return self.epochs[-1].train_accuracy if self.epochs else 0.0

    @property
    def total_cost_usd(self) -> float:
        return self.epochs[-1].cumulative_cost_usd if self.epochs else 0.0


class ReportFormat(str, Enum):
    JSON = "json"
    CSV = "csv"
    MARKDOWN = "md"


class ReportRow(BaseModel):
    """One line of the cost summary table."""

    framework: str
    total_time_s: float = Field(description="Back-to-back invocation time per worker (serverless) or wall time (gpu)")
    ram_mb: float | None = None
    cost_per_worker_usd: float
    total_cost_usd: float
    final_accuracy: float
    epochs: int


class SweepRow(BaseModel):
    key: str
    value: str
    strategy: StrategyKind
    workers: int
    tau: float
    final_accuracy: float
    oracle_divergence: float | None = None
    upload_bytes_per_worker_round: float = Field(description="SharedDB + ObjectStore payload written")
    download_bytes_per_worker_round: float = Field(description="SharedDB + ObjectStore payload read")
    local_db_bytes_per_epoch: float
    shared_db_bytes_written_per_epoch: float
    sync_wait_s: float
    total_cost_usd: float
    params_digest: str
