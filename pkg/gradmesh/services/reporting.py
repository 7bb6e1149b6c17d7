import json
from enum import Enum
from pathlib import Path

from jinja2 import Environment, FileSystemLoader, StrictUndefined
from loguru import logger

from gradmesh.models.experiment import Deployment
from gradmesh.models.metrics import ExperimentResult, ReportFormat, ReportRow, SweepRow
from gradmesh.services.cost import RowCheck, cheaper_deployment, format_usd
from gradmesh.services.harness.serialization import write_csv

templates_dir = Path(__file__).resolve().parent.parent / "templates"

jinja_env = Environment(
    loader=FileSystemLoader(str(templates_dir)), undefined=StrictUndefined, keep_trailing_newline=True
)
jinja_env.filters["usd"] = format_usd
jinja_env.filters["sig"] = format_usd


def report_row(result: ExperimentResult) -> ReportRow:
    cfg = result.config
    deployment = cfg.resolved_deployment
    epochs = result.epochs
    count = len(epochs) or 1
    if deployment == Deployment.GPU:
        time_s = sum(m.total_time_s for m in epochs) / count
        ram = None
    else:
        time_s = sum(m.serial_time_s for m in epochs) / count
        ram = cfg.ram_mb_assumed
    label = cfg.strategy.value if deployment == Deployment.SERVERLESS else f"{cfg.strategy.value} (gpu)"
    return ReportRow(
        framework=label,
        total_time_s=time_s,
        ram_mb=ram,
        cost_per_worker_usd=sum(m.cost.cost_per_worker_usd for m in epochs) / count,
        total_cost_usd=sum(m.cost.total_usd for m in epochs) / count,
        final_accuracy=result.final_accuracy,
        epochs=len(epochs),
    )


def deployment_verdict(rows: list[ReportRow], results: list[ExperimentResult]) -> str | None:
    """Compare the cheapest serverless and gpu rows when both are present."""
    by_deployment: dict[Deployment, list[float]] = {Deployment.SERVERLESS: [], Deployment.GPU: []}
    for row, result in zip(rows, results):
        by_deployment[result.config.resolved_deployment].append(row.total_cost_usd)
    serverless, gpu = by_deployment[Deployment.SERVERLESS], by_deployment[Deployment.GPU]
    if not serverless or not gpu:
        return None
    return cheaper_deployment(min(serverless), min(gpu)).value


def render_markdown(rows: list[ReportRow], verdict: str | None = None) -> str:
    return jinja_env.get_template("report.md.j2").render(rows=rows, verdict=verdict)


def render_costcheck(checks: list[RowCheck]) -> str:
    passed = sum(1 for check in checks if check.as_expected)
    return jinja_env.get_template("costcheck.md.j2").render(checks=checks, passed=passed)


def costcheck_csv(checks: list[RowCheck]) -> str:
    header = ["framework", "model", "quantity", "formula", "published", "rel_error", "verdict"]
    rows = [
        [c.row.framework, c.row.model, q.name, repr(q.model), repr(q.published), repr(q.rel_error), c.verdict.value]
        for c in checks
        for q in c.quantities
    ]
    return write_csv(header, rows)


def costcheck_json(checks: list[RowCheck]) -> str:
    return json.dumps([check.model_dump(mode="json") for check in checks], indent=2) + "\n"


def render_report(results: list[ExperimentResult], fmt: ReportFormat) -> str:
    rows = [report_row(result) for result in results]
    if fmt == ReportFormat.JSON:
        return json.dumps([row.model_dump(mode="json") for row in rows], indent=2) + "\n"
    if fmt == ReportFormat.CSV:
        header = list(ReportRow.model_fields)
        return write_csv(header, [[_cell(getattr(row, name)) for name in header] for row in rows])
    return render_markdown(rows, deployment_verdict(rows, results))


def sweep_csv(rows: list[SweepRow]) -> str:
    header = list(SweepRow.model_fields)
    return write_csv(header, [[_cell(getattr(row, name)) for name in header] for row in rows])


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_text(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text, encoding="utf-8", newline="")
    logger.debug(f"Wrote {path}")
    return path
