from .experiment import (
    ClassLatency,
    Deployment,
    ExperimentConfig,
    InvocationMode,
    LatencyModel,
    PricingConfig,
    SchedulerMode,
    StrategyKind,
    parse_strategy,
)
from .metrics import CostRecord, EpochMetrics, ExperimentResult, ReportFormat, ReportRow, SweepRow
from .traffic import ClassCounters, MessageKind, OpEvent, QueueMessage, SubstrateClass, TrafficCounters

__all__ = [
    "ClassCounters",
    "ClassLatency",
    "CostRecord",
    "Deployment",
    "EpochMetrics",
    "ExperimentConfig",
    "ExperimentResult",
    "InvocationMode",
    "LatencyModel",
    "MessageKind",
    "OpEvent",
    "PricingConfig",
    "QueueMessage",
    "ReportFormat",
    "ReportRow",
    "SchedulerMode",
    "StrategyKind",
    "SubstrateClass",
    "SweepRow",
    "TrafficCounters",
    "parse_strategy",
]
