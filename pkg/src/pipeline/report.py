"""Run reports: machine-readable JSON plus a fixed-column text table."""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from src.pipeline.evaluation import EvalReport, OracleReport

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["Acc", "DP", "EOpp", "PEq", "PP", "FOR", "Interv."]


class GuardSummary(BaseModel):
    alpha: float
    triggered: bool
    alpha_hi: float
    searches: int
    baseline_gaps: dict[str, float | None]
    deltas: dict[str, float]


class GroupTarget(BaseModel):
    name: str
    tpr: float
    fpr: float


class RunReport(BaseModel):
    seed: int
    config_hash: str
    mechanism: str
    group_names: list[str]
    post_objective: float
    post_expected_intervention: float
    guard: GuardSummary
    targets: list[GroupTarget]
    results: dict[str, EvalReport] = Field(default_factory=dict)
    oracle: OracleReport | None = None


def table_row(report: EvalReport) -> dict[str, float]:
    row = {"Acc": report.accuracy}
    for metric in ("DP", "EOpp", "PEq", "PP", "FOR"):
        gap = report.gaps.get(metric)
        row[metric] = np.nan if gap is None else gap
    row["Interv."] = report.intervention_sampled
    return row


def format_table(results: Mapping[str, EvalReport]) -> str:
    frame = pd.DataFrame([table_row(r) for r in results.values()], index=list(results), columns=TABLE_COLUMNS)
    return frame.to_string(float_format=lambda v: f"{v:.4f}", na_rep="n/a")


def render_text(report: RunReport) -> str:
    lines = [
        f"seed: {report.seed}",
        f"config_hash: {report.config_hash}",
        f"mechanism: {report.mechanism}",
        f"alpha: {report.guard.alpha:.6g} (triggered: {report.guard.triggered})",
        f"post objective: {report.post_objective:.6f}",
        f"post expected intervention: {report.post_expected_intervention:.6f}",
        "",
        format_table(report.results),
    ]
    if report.oracle is not None:
        lines += ["", f"oracle accuracy: {report.oracle.accuracy:.4f} (alpha {report.oracle.alpha:.6g})"]
    flagged = sorted({flag for r in report.results.values() for flag in r.undefined})
    if flagged:
        lines += ["", "undefined on test: " + ", ".join(flagged)]
    return "\n".join(lines) + "\n"


def write_report(report: RunReport, out_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    text_path = out_dir / "report.txt"
    json_path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    text_path.write_text(render_text(report), encoding="utf-8")
    logger.info("Wrote %s and %s", json_path, text_path)
    return json_path, text_path


def aggregate_seeds(
    reports: Sequence[EvalReport], deltas: Mapping[str, float] | None = None
) -> pd.DataFrame:
    """Mean and sd per table column across seeds.

    A constrained column is marked ``within_2sd`` when its mean gap is at most
    delta + 2 sd.
    """
    frame = pd.DataFrame([table_row(r) for r in reports], columns=TABLE_COLUMNS)
    summary = pd.DataFrame({"mean": frame.mean(), "sd": frame.std(ddof=1) if len(frame) > 1 else 0.0})
    summary["delta"] = [np.nan if deltas is None else deltas.get(col, np.nan) for col in summary.index]
    summary["within_2sd"] = [
        bool(row["mean"] <= row["delta"] + 2 * row["sd"]) if not np.isnan(row["delta"]) else None
        for _, row in summary.iterrows()
    ]
    return summary
