"""
Monetary accounting: AWS Lambda GB-second billing and GPU hourly pricing.

Full precision everywhere; `format_usd` rounds for display only.
"""

from dataclasses import dataclass
from enum import Enum

from loguru import logger
from pydantic import BaseModel, Field

from gradmesh.core.constants import COST_MATCH_TOLERANCE, COST_MISMATCH_THRESHOLD, DISPLAY_SIGNIFICANT_FIGURES
from gradmesh.core.exceptions import ContractError
from gradmesh.models.experiment import Deployment, PricingConfig
from gradmesh.models.metrics import CostRecord

SECONDS_PER_HOUR = 3600.0


def _pricing(pricing: PricingConfig | None) -> PricingConfig:
    return pricing if pricing is not None else PricingConfig()


def lambda_invocation_cost(duration_s: float, ram_mb: float, pricing: PricingConfig | None = None) -> float:
    """Cost = seconds × (ram_mb / mb_per_gb) × price per GB-second.

    Args:
        duration_s: Billed duration of one invocation
        ram_mb: Allocated memory of the function

    Raises:
        ContractError: negative duration or non-positive memory
    """
    if duration_s < 0:
        raise ContractError(f"duration must be non-negative, got {duration_s}")
    if not ram_mb > 0:
        raise ContractError(f"ram_mb must be positive, got {ram_mb}")
    pricing = _pricing(pricing)
    return duration_s * (ram_mb / pricing.mb_per_gb) * pricing.lambda_gb_second_usd


def worker_epoch_cost(per_invocation: float, invocations: int) -> float:
    if invocations < 0:
        raise ContractError(f"invocation count must be non-negative, got {invocations}")
    return per_invocation * invocations


def total_cost(per_worker: float, workers: int) -> float:
    if workers < 0:
        raise ContractError(f"worker count must be non-negative, got {workers}")
    return per_worker * workers


def gpu_cost(duration_s: float, instances: int = 1, pricing: PricingConfig | None = None) -> float:
    """instances × hours × hourly price."""
    if duration_s < 0:
        raise ContractError(f"duration must be non-negative, got {duration_s}")
    return instances * duration_s / SECONDS_PER_HOUR * _pricing(pricing).gpu_hourly_usd


def serial_total_time(per_invocation_s: float, invocations: int) -> float:
    """Table-style total time: invocations run back to back on one worker."""
    return per_invocation_s * invocations


@dataclass(frozen=True)
class CostInputs:
    """What the cost report needs from an epoch.

    duration_s is the per-invocation duration for serverless deployments and the
    per-instance wall time for GPU deployments.
    """

    workers: int
    duration_s: float | None
    invocations_per_worker: int = 0
    ram_mb: float | None = None


def build_cost_report(
    usage: CostInputs, pricing: PricingConfig | None = None, deployment: Deployment = Deployment.SERVERLESS
) -> CostRecord:
    if usage.duration_s is None:
        raise ContractError("cost report needs a duration")
    pricing = _pricing(pricing)
    if deployment == Deployment.GPU:
        per_worker = gpu_cost(usage.duration_s, 1, pricing)
        return CostRecord(
            deployment=deployment,
            per_invocation_usd=per_worker,
            invocations_per_worker=1,
            cost_per_worker_usd=per_worker,
            workers=usage.workers,
            total_usd=total_cost(per_worker, usage.workers),
            duration_s=usage.duration_s,
            ram_mb=None,
        )
    if usage.ram_mb is None:
        raise ContractError("serverless cost report needs the allocated ram_mb")
    per_invocation = lambda_invocation_cost(usage.duration_s, usage.ram_mb, pricing)
    per_worker = worker_epoch_cost(per_invocation, usage.invocations_per_worker)
    return CostRecord(
        deployment=deployment,
        per_invocation_usd=per_invocation,
        invocations_per_worker=usage.invocations_per_worker,
        cost_per_worker_usd=per_worker,
        workers=usage.workers,
        total_usd=total_cost(per_worker, usage.workers),
        duration_s=usage.duration_s,
        ram_mb=usage.ram_mb,
    )


def relative_error(published: float, model: float) -> float:
    """|published - model| / |model|; the formula's own value is the reference."""
    if model == 0:
        return 0.0 if published == 0 else float("inf")
    return abs(published - model) / abs(model)


def cheaper_deployment(serverless_total: float, gpu_total: float) -> Deployment:
    return Deployment.SERVERLESS if serverless_total < gpu_total else Deployment.GPU


def format_usd(value: float) -> str:
    return f"{value:.{DISPLAY_SIGNIFICANT_FIGURES}g}"


class Verdict(str, Enum):
    CONSISTENT = "CONSISTENT"
    INCONSISTENT = "INCONSISTENT"


class TableRow(BaseModel):
    """One published cost row: the inputs and the values printed next to them."""

    framework: str
    model: str
    deployment: Deployment = Deployment.SERVERLESS
    duration_s: float = Field(description="Seconds per invocation (serverless) or per instance (gpu)")
    ram_mb: float | None = None
    invocations: int = 24
    workers: int = 4
    published_per_invocation: float | None = None
    published_per_worker: float
    published_total: float
    published_total_time: float
    consistent: bool = Field(description="Whether the printed values follow from the stated inputs")


class QuantityCheck(BaseModel):
    name: str
    model: float
    published: float
    rel_error: float


class RowCheck(BaseModel):
    row: TableRow
    quantities: list[QuantityCheck]
    verdict: Verdict

    @property
    def max_rel_error(self) -> float:
        return max((q.rel_error for q in self.quantities), default=0.0)

    @property
    def as_expected(self) -> bool:
        """Consistent rows must match within tolerance; inconsistent ones must be off by more than 1%."""
        if self.row.consistent:
            return self.verdict == Verdict.CONSISTENT
        return self.max_rel_error > COST_MISMATCH_THRESHOLD


def _serverless(framework, model, seconds, ram, per_invocation, per_worker, total, total_time, consistent=True):
    return TableRow(
        framework=framework,
        model=model,
        duration_s=seconds,
        ram_mb=ram,
        published_per_invocation=per_invocation,
        published_per_worker=per_worker,
        published_total=total,
        published_total_time=total_time,
        consistent=consistent,
    )


def _gpu(model, seconds, per_worker, total):
    return TableRow(
        framework="GPU",
        model=model,
        deployment=Deployment.GPU,
        duration_s=seconds,
        invocations=1,
        published_per_worker=per_worker,
        published_total=total,
        published_total_time=seconds,
        consistent=True,
    )


PUBLISHED_COST_ROWS: list[TableRow] = [
    _serverless("SPIRT", "MobileNet", 15.44, 2685, 0.000689, 0.0165, 0.0660, 370.56),
    _serverless("ScatterReduce", "MobileNet", 14.343, 2048, 0.000442, 0.0106, 0.0422, 344.23, consistent=False),
    _serverless("AllReduce", "MobileNet", 14.382, 2048, 0.000445, 0.0107, 0.0427, 345.17, consistent=False),
    _serverless("MLLess", "MobileNet", 69.425, 3024, 0.003496, 0.0839, 0.3356, 1666.20),
    _gpu("MobileNet", 92.0, 0.01344, 0.0538),
    _serverless("SPIRT", "ResNet-18", 28.55, 3200, 0.001523, 0.0365, 0.1460, 685.20),
    _serverless("ScatterReduce", "ResNet-18", 27.17, 2880, 0.001302, 0.0312, 0.1249, 652.08),
    _serverless("AllReduce", "ResNet-18", 26.79, 2986, 0.001382, 0.0332, 0.1328, 642.96, consistent=False),
    _serverless("MLLess", "ResNet-18", 78.39, 3630, 0.004737, 0.1137, 0.4548, 1881.36),
    _gpu("ResNet-18", 139.0, 0.0203, 0.0812),
]


def evaluate_table_row(row: TableRow, pricing: PricingConfig | None = None) -> RowCheck:
    """Recompute a published row from its inputs and compare quantity by quantity."""
    record = build_cost_report(
        CostInputs(
            workers=row.workers, duration_s=row.duration_s, invocations_per_worker=row.invocations, ram_mb=row.ram_mb
        ),
        pricing,
        row.deployment,
    )
    pairs = []
    if row.published_per_invocation is not None:
        pairs.append(("per_invocation_usd", record.per_invocation_usd, row.published_per_invocation))
    pairs.append(("cost_per_worker_usd", record.cost_per_worker_usd, row.published_per_worker))
    pairs.append(("total_usd", record.total_usd, row.published_total))
    if row.deployment == Deployment.GPU:
        model_time = row.duration_s
    else:
        model_time = serial_total_time(row.duration_s, row.invocations)
    pairs.append(("total_time_s", model_time, row.published_total_time))

    quantities = [
        QuantityCheck(name=name, model=model, published=published, rel_error=relative_error(published, model))
        for name, model, published in pairs
    ]
    verdict = (
        Verdict.CONSISTENT if all(q.rel_error <= COST_MATCH_TOLERANCE for q in quantities) else Verdict.INCONSISTENT
    )
    check = RowCheck(row=row, quantities=quantities, verdict=verdict)
    if not check.as_expected:
        logger.warning(f"{row.framework} {row.model}: verdict {verdict.value} contradicts the expected flag")
    return check


def run_cost_regression(pricing: PricingConfig | None = None) -> list[RowCheck]:
    return [evaluate_table_row(row, pricing) for row in PUBLISHED_COST_ROWS]
