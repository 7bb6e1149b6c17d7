import csv
import io

from gradmesh.models.metrics import ExperimentResult
from gradmesh.models.traffic import SubstrateClass

EPOCH_COLUMNS = [
    "epoch",
    "train_accuracy",
    "mean_loss",
    "rounds",
    "invocations_per_worker",
    "mean_invocation_s",
    "total_time_s",
    "serial_time_s",
    "sync_wait_s",
    "transfer_s",
    *(f"{cls.value}_{field}" for cls in SubstrateClass for field in ("bytes_written", "bytes_read", "op_count")),
    "per_invocation_usd",
    "cost_per_worker_usd",
    "total_usd",
    "cumulative_cost_usd",
]


def result_to_json(result: ExperimentResult) -> str:
    return result.model_dump_json(indent=2) + "\n"


def result_from_json(text: str) -> ExperimentResult:
    return ExperimentResult.model_validate_json(text)


def write_csv(header: list[str], rows: list[list]) -> str:
    """RFC-4180 style: header row, CRLF line endings, minimal quoting."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def epochs_to_csv(result: ExperimentResult) -> str:
    rows = []
    for m in result.epochs:
        traffic = [
            getattr(m.traffic[cls], field)
            for cls in SubstrateClass
            for field in ("bytes_written", "bytes_read", "op_count")
        ]
        rows.append(
            [
                m.epoch,
                repr(m.train_accuracy),
                repr(m.mean_loss),
                m.rounds,
                m.invocations_per_worker,
                repr(m.mean_invocation_s),
                repr(m.total_time_s),
                repr(m.serial_time_s),
                repr(m.sync_wait_s),
                repr(m.transfer_s),
                *traffic,
                repr(m.cost.per_invocation_usd),
                repr(m.cost.cost_per_worker_usd),
                repr(m.cost.total_usd),
                repr(m.cumulative_cost_usd),
            ]
        )
    return write_csv(EPOCH_COLUMNS, rows)
