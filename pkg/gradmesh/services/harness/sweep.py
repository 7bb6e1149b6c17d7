from typing import Any

from loguru import logger

from gradmesh.core.exceptions import ConfigurationError
from gradmesh.models.experiment import ExperimentConfig
from gradmesh.models.metrics import ExperimentResult, SweepRow
from gradmesh.models.traffic import SubstrateClass
from gradmesh.services.harness.config_loader import build_config, parse_value
from gradmesh.services.harness.runner import run_experiment

SWEEP_KEYS = ("workers", "tau", "strategy")
EXTERNAL_CLASSES = (SubstrateClass.SHARED_DB, SubstrateClass.OBJECT_STORE)


def sweep_row(key: str, value: Any, result: ExperimentResult) -> SweepRow:
    cfg = result.config
    rounds = sum(m.rounds for m in result.epochs) or 1
    epochs = len(result.epochs) or 1
    written = sum(m.traffic[cls].bytes_written for m in result.epochs for cls in EXTERNAL_CLASSES)
    read = sum(m.traffic[cls].bytes_read for m in result.epochs for cls in EXTERNAL_CLASSES)
    local = sum(
        m.traffic[SubstrateClass.LOCAL_DB].bytes_written + m.traffic[SubstrateClass.LOCAL_DB].bytes_read
        for m in result.epochs
    )
    shared_written = sum(m.traffic[SubstrateClass.SHARED_DB].bytes_written for m in result.epochs)
    return SweepRow(
        key=key,
        value=str(value),
        strategy=cfg.strategy,
        workers=cfg.workers,
        tau=cfg.tau,
        final_accuracy=result.final_accuracy,
        oracle_divergence=result.oracle_divergence,
        upload_bytes_per_worker_round=written / (rounds * cfg.workers),
        download_bytes_per_worker_round=read / (rounds * cfg.workers),
        local_db_bytes_per_epoch=local / epochs,
        shared_db_bytes_written_per_epoch=shared_written / epochs,
        sync_wait_s=sum(m.sync_wait_s for m in result.epochs),
        total_cost_usd=result.total_cost_usd,
        params_digest=result.params_digest,
    )


def run_sweep(base: ExperimentConfig, key: str, values: list[str]) -> tuple[list[SweepRow], list[ExperimentResult]]:
    """Re-run `base` once per value of `key`; every run shares the base seed."""
    if key not in SWEEP_KEYS:
        raise ConfigurationError(f"cannot sweep '{key}' (expected one of {', '.join(SWEEP_KEYS)})")
    if not values:
        raise ConfigurationError("a sweep needs at least one value")
    rows: list[SweepRow] = []
    results: list[ExperimentResult] = []
    for raw in values:
        value = parse_value(str(raw))
        cfg = build_config({**base.model_dump(), key: value})
        logger.info(f"Sweep {key}={value}")
        result = run_experiment(cfg)
        rows.append(sweep_row(key, value, result))
        results.append(result)
    return rows, results
