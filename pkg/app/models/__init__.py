"""Report, scenario and run-record models."""

from app.models.reports import DiracDgaReport, HeatLimit, HeatSchedule, KSpaceReport
from app.models.scenario import CheckResult, RunRecord, Scenario

__all__ = [
    "CheckResult",
    "DiracDgaReport",
    "HeatLimit",
    "HeatSchedule",
    "KSpaceReport",
    "RunRecord",
    "Scenario",
]
