"""
Report emission: nested JSON or one flat CSV row per run.
"""
import json
import logging
import os
from typing import Optional

import pandas as pd

from .models import ExperimentReport

logger = logging.getLogger(__name__)

# Documented in data/report_schema.md; plot-ready columns come first.
CSV_COLUMNS = [
    "scenario_id",
    "experiment",
    "index",
    "sweep_parameter",
    "sweep_value",
    "lhs",
    "rhs",
    "holds",
    "tv_jump",
    "failed",
    "error",
    "parameters",
]

FORMATS = ("json", "csv")


def report_to_frame(report: ExperimentReport) -> pd.DataFrame:
    rows = [
        {
            "scenario_id": report.scenario_id,
            "experiment": report.experiment,
            "index": record.index,
            "sweep_parameter": record.sweep_parameter,
            "sweep_value": record.sweep_value,
            "lhs": record.lhs,
            "rhs": record.rhs,
            "holds": record.holds,
            "tv_jump": record.tv_jump,
            "failed": record.failed,
            "error": record.error,
            "parameters": json.dumps(record.parameters, sort_keys=True),
        }
        for record in report.records
    ]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def render_report(report: ExperimentReport, fmt: str = "json") -> str:
    """Serialize a report to text in the given format."""
    if fmt == "json":
        return report.model_dump_json(indent=2) + "\n"
    if fmt == "csv":
        return report_to_frame(report).to_csv(index=False)
    raise ValueError(f"Unknown report format {fmt!r}; expected one of {FORMATS}")


def write_report(report: ExperimentReport, fmt: str, path: Optional[str]) -> None:
    """
    Write a report to path (stdout when path is None).

    An empty sweep produces a header-only CSV.
    """
    text = render_report(report, fmt)
    if path is None:
        print(text, end="")
        return

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.info(f"Wrote {fmt} report for {report.scenario_id} to {path}")


def load_report(path: str) -> ExperimentReport:
    """Read back a JSON report written by write_report."""
    with open(path, "r", encoding="utf-8") as f:
        return ExperimentReport.model_validate_json(f.read())
