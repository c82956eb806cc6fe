"""Tests for ReportWriter."""

import json

import pytest

from app.models.reports import (
    DegreeDims,
    DiracDgaReport,
    HeatLimit,
    HeatSchedule,
    KSpaceDegree,
    KSpaceReport,
    LevelDims,
)
from app.models.scenario import CheckResult, RunRecord
from app.services.report_writer import ReportWriter

LEVELS = [24, 32, 48]


@pytest.fixture
def report_writer():
    """Create ReportWriter instance."""
    return ReportWriter()


@pytest.fixture
def schedule():
    """Short heat schedule."""
    return HeatSchedule(
        t0=0.5,
        ratio=2.0,
        nodes=4,
        extrapolation_order=2,
        t_values=[0.5, 0.25, 0.125, 0.0625],
        level_binding=[40, 80, 160, 320],
    )


@pytest.fixture
def sample_record(schedule):
    """Run record with a base dimension report, a heat limit, an FGR report and two checks."""
    dirac = DiracDgaReport(
        triple="circle",
        budget={"cap": 3, "total": None, "symbols": None},
        levels=LEVELS,
        degrees=[
            DegreeDims(
                degree=k,
                dim_pi_omega=d,
                dim_junk=j,
                dim_omega_D=d - j,
                stabilized=True,
                word_count=w,
                per_level=[
                    LevelDims(level=lv, dim_pi_omega=d, dim_junk=j, dim_omega_D=d - j) for lv in LEVELS
                ],
            )
            for k, (d, j, w) in enumerate([(7, 0, 7), (13, 0, 42), (19, 19, 252)])
        ],
    )
    fgr = KSpaceReport(
        triple="Sigma^2(circle)",
        budget={"base_budget": 0, "index_cap": 2, "laurent_cap": 3},
        schedule=schedule,
        degrees=[
            KSpaceDegree(
                degree=0,
                word_count=11,
                dim_pi_omega=11,
                k_dim=4,
                dim_pi_k=4,
                dim_pi_k_plus_dk=4,
                dim_omega_tilde=7,
            )
        ],
    )
    heat = HeatLimit(real=2.0000000000001234, error_estimate=1 / 3 * 1e-9, schedule=schedule)
    record = RunRecord(scenario="circle-baseline", scenario_hash="ab" * 32)
    record.reports = {
        "base_dirac": dirac.model_dump(mode="json"),
        "fgr": fgr.model_dump(mode="json"),
        "heat_identity": heat.model_dump(mode="json"),
    }
    record.checks = [
        CheckResult(name="dirac_dims", passed=True, detail="dims [7, 13, 0]"),
        CheckResult(name="heat_identity", passed=False, detail="off"),
    ]
    record.stage_seconds = {"dirac": 1.25}
    return record


def test_json_is_stable_under_reload(report_writer, sample_record):
    """Writing, parsing and writing again gives identical bytes."""
    first = report_writer.to_json(sample_record)
    again = report_writer.to_json(RunRecord.model_validate_json(first))

    assert first == again
    assert first.endswith("\n")


def test_json_leaves_out_timings_and_rounds_floats(report_writer, sample_record):
    """Stage timings go to the sidecar; floats carry a fixed number of digits."""
    data = json.loads(report_writer.to_json(sample_record))

    assert "stage_seconds" not in data
    assert data["reports"]["heat_identity"]["real"] == 2.0
    assert json.loads(report_writer.timings_json(sample_record)) == {"dirac": 1.25}


def test_markdown_has_one_table_per_report_degree(report_writer, sample_record):
    """Three base degrees and one FGR degree give four degree sections."""
    text = report_writer.to_markdown(sample_record)

    assert text.count("### base_dirac degree") == 3
    assert text.count("### fgr degree") == 1
    assert "## Heat functionals" in text
    assert "| heat_identity | FAIL | off |" in text
    assert "`" + "ab" * 32 + "`" in text


def test_csv_rows_per_degree_and_level(report_writer, sample_record):
    """Nine base rows (three degrees at three levels) plus one FGR row."""
    rows = report_writer.to_csv(sample_record).strip().split("\n")

    assert rows[0].startswith("report,triple,degree,level")
    assert len(rows) == 1 + 9 + 1
    assert sum(r.startswith("base_dirac,") for r in rows) == 9


def test_render_rejects_unknown_format(report_writer, sample_record):
    """Only json, markdown and csv are rendered."""
    with pytest.raises(ValueError):
        report_writer.render(sample_record, "html")


def test_write_creates_files_and_timings(report_writer, sample_record, tmp_path):
    """One file per format and a timings sidecar."""
    written = report_writer.write(sample_record, tmp_path / "out", ["json", "markdown", "csv"])

    assert [p.name for p in written] == [
        "circle-baseline.json",
        "circle-baseline.md",
        "circle-baseline.csv",
    ]
    assert (tmp_path / "out" / "circle-baseline.timings.json").exists()
    assert written[0].read_text(encoding="utf-8") == report_writer.to_json(sample_record)
