"""Report writer for scenario run records."""

import csv
import io
import json
from pathlib import Path
from typing import Any

from app.config import settings
from app.models.scenario import RunRecord
from app.utils.logger import logger

FORMAT_SUFFIX = {"json": ".json", "markdown": ".md", "csv": ".csv"}
CSV_COLUMNS = [
    "report",
    "triple",
    "degree",
    "level",
    "dim_pi_omega",
    "dim_junk",
    "dim_omega",
    "stabilized",
    "method",
    "formula_dim",
]


def _round_floats(value: Any, digits: int) -> Any:
    if isinstance(value, float):
        return float(f"{value:.{digits}g}")
    if isinstance(value, dict):
        return {k: _round_floats(v, digits) for k, v in value.items()}
    if isinstance(value, list):
        return [_round_floats(v, digits) for v in value]
    return value


def _fmt(value: float, digits: int) -> str:
    return f"{value:.{digits}g}"


def _level_text(level: Any) -> str:
    if isinstance(level, list):
        return "(" + ", ".join(str(x) for x in level) + ")"
    return str(level)


def _dims_reports(record: RunRecord) -> list[tuple[str, dict[str, Any]]]:
    """Reports carrying per-degree dimensions, in key order."""
    return [
        (key, report)
        for key, report in sorted(record.reports.items())
        if isinstance(report, dict) and isinstance(report.get("degrees"), list) and "triple" in report
    ]


class ReportWriter:
    """Render a RunRecord as JSON, markdown or CSV with deterministic bytes."""

    def __init__(self, digits: int | None = None):
        self.digits = settings.float_digits if digits is None else digits

    def to_json(self, record: RunRecord) -> str:
        """Sorted keys, floats at fixed significant digits, stage timings left out."""
        data = record.model_dump(mode="json", exclude={"stage_seconds"})
        return json.dumps(_round_floats(data, self.digits), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def timings_json(self, record: RunRecord) -> str:
        return json.dumps(record.stage_seconds, sort_keys=True, indent=2) + "\n"

    def to_markdown(self, record: RunRecord) -> str:
        """
        Generate the markdown report.

        One table per (report, degree), a section of heat limits (value ± error) and
        the checks table.

        Args:
            record: Completed run record.

        Returns:
            Markdown formatted string.
        """
        lines = []

        lines.append(f"# {record.scenario}")
        lines.append("")
        lines.append(f"- kind: {record.kind}")
        lines.append(f"- scenario hash: `{record.scenario_hash}`")
        lines.append(f"- tool version: {record.tool_version}")
        lines.append("")

        for key, report in _dims_reports(record):
            lines.append(f"## {key}: {report['triple']}")
            lines.append("")
            lines.append(f"Budget: `{json.dumps(report.get('budget', {}), sort_keys=True)}`")
            lines.append("")
            for degree in report["degrees"]:
                lines.append(self._degree_section(key, degree))
                lines.append("")

        heat = self._heat_section(record.reports)
        if heat:
            lines.append("## Heat functionals")
            lines.append("")
            lines.append(heat)
            lines.append("")

        if "comparison" in record.reports:
            lines.append("## Comparison")
            lines.append("")
            lines.append(self._comparison_section(record.reports["comparison"]))
            lines.append("")

        lines.append("## Checks")
        lines.append("")
        lines.append(self._checks_section(record))

        return "\n".join(lines) + "\n"

    def _degree_section(self, key: str, degree: dict[str, Any]) -> str:
        lines = [f"### {key} degree {degree['degree']}", ""]
        if "per_level" in degree:
            formula = degree.get("formula_dim")
            lines.append(
                f"dim = {degree['dim_omega_D']} (method {degree['method']}, stabilized "
                f"{degree['stabilized']}" + (f", decomposition {formula}" if formula is not None else "") + ")"
            )
            lines.append("")
            lines.append("| level | dim pi(Omega) | dim junk | dim Omega_D | marginal |")
            lines.append("|-------|---------------|----------|-------------|----------|")
            for row in degree["per_level"]:
                lines.append(
                    f"| {_level_text(row['level'])} | {row['dim_pi_omega']} | {row['dim_junk']} "
                    f"| {row['dim_omega_D']} | {row['marginal']} |"
                )
        else:
            lines.append("| words | dim pi(Omega) | dim K | dim pi(K) | dim pi(K + dK) | dim Omega~ | marginal |")
            lines.append("|-------|---------------|-------|-----------|----------------|------------|----------|")
            lines.append(
                f"| {degree['word_count']} | {degree['dim_pi_omega']} | {degree['k_dim']} | {degree['dim_pi_k']} "
                f"| {degree['dim_pi_k_plus_dk']} | {degree['dim_omega_tilde']} | {degree['marginal_count']} |"
            )
        return "\n".join(lines)

    def _heat_section(self, reports: dict[str, Any]) -> str:
        lines = []
        for key, report in sorted(reports.items()):
            if not isinstance(report, dict):
                continue
            if "error_estimate" in report:
                schedule = report["schedule"]
                lines.append(
                    f"- {key}: {_fmt(report['real'], self.digits)} ± {_fmt(report['error_estimate'], 3)} "
                    f"(t0 {schedule['t0']}, ratio {schedule['ratio']}, {schedule['nodes']} nodes, "
                    f"order {schedule['extrapolation_order']})"
                )
            elif "p_hat" in report:
                lines.append(f"- {key}: p = {_fmt(report['p_hat'], self.digits)}")
            elif "ratios" in report:
                ratios = ", ".join(f"{k} {_fmt(v, 6)}" for k, v in sorted(report["ratios"].items()))
                lines.append(f"- {key}: {report['verdict']} ({ratios}; excluded {report['excluded']})")
        return "\n".join(lines)

    def _comparison_section(self, report: dict[str, Any]) -> str:
        lines = [f"**{report['verdict']}** (flagged degrees {report['flagged_degrees']})", ""]
        lines.append("| base | Dirac dims | FGR dims |")
        lines.append("|------|------------|----------|")
        for row in report["rows"]:
            lines.append(f"| {row['label']} | {row['dirac']} | {row['fgr']} |")
        return "\n".join(lines)

    def _checks_section(self, record: RunRecord) -> str:
        if not record.checks:
            return "No checks configured."
        lines = ["| check | result | detail |", "|-------|--------|--------|"]
        for check in record.checks:
            lines.append(f"| {check.name} | {'pass' if check.passed else 'FAIL'} | {check.detail} |")
        return "\n".join(lines)

    def to_csv(self, record: RunRecord) -> str:
        """One row per degree and level of every dimension report; FGR degrees get one row each."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for key, report in _dims_reports(record):
            for degree in report["degrees"]:
                if "per_level" in degree:
                    for row in degree["per_level"]:
                        writer.writerow(
                            [
                                key,
                                report["triple"],
                                degree["degree"],
                                _level_text(row["level"]),
                                row["dim_pi_omega"],
                                row["dim_junk"],
                                row["dim_omega_D"],
                                degree["stabilized"],
                                degree["method"],
                                "" if degree["formula_dim"] is None else degree["formula_dim"],
                            ]
                        )
                else:
                    writer.writerow(
                        [
                            key,
                            report["triple"],
                            degree["degree"],
                            "",
                            degree["dim_pi_omega"],
                            degree["dim_pi_k_plus_dk"],
                            degree["dim_omega_tilde"],
                            "",
                            "fgr",
                            "",
                        ]
                    )
        return buffer.getvalue()

    def render(self, record: RunRecord, fmt: str) -> str:
        if fmt == "json":
            return self.to_json(record)
        if fmt == "markdown":
            return self.to_markdown(record)
        if fmt == "csv":
            return self.to_csv(record)
        raise ValueError(f"unknown report format '{fmt}'")

    def write(self, record: RunRecord, out_dir: str | Path, formats: list[str]) -> list[Path]:
        """Write one file per format plus a timings sidecar; returns the written paths."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for fmt in formats:
            path = out_dir / f"{record.scenario}{FORMAT_SUFFIX[fmt]}"
            path.write_text(self.render(record, fmt), encoding="utf-8")
            written.append(path)
        timings = out_dir / f"{record.scenario}.timings.json"
        timings.write_text(self.timings_json(record), encoding="utf-8")
        logger.info(f"Wrote {[p.name for p in written]} to {out_dir}")
        return written
