"""Scenario, check and run-record models."""

from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, Field, field_validator, model_validator

from app.config import settings

CheckName = Literal[
    "dirac_dims",
    "base_cohomology",
    "graded_formula",
    "summability",
    "heat_identity",
    "functional_consistency",
    "factorization",
    "suspended_formula",
    "suspended_graded",
    "delta",
    "cohomology",
    "fgr_collapse",
    "cross_term",
    "j0_in_k",
    "k_ideal",
]

# Stage each check reads from
CHECK_STAGES: dict[str, str] = {
    "dirac_dims": "dirac",
    "base_cohomology": "dirac",
    "graded_formula": "dirac",
    "summability": "heat",
    "heat_identity": "heat",
    "functional_consistency": "heat",
    "factorization": "suspension",
    "suspended_formula": "suspended",
    "suspended_graded": "suspended",
    "delta": "suspended",
    "cohomology": "suspended",
    "fgr_collapse": "fgr",
    "cross_term": "fgr",
    "j0_in_k": "fgr",
    "k_ideal": "fgr",
}


class TripleSpec(BaseModel):
    """Base triple: a registered provider name and its parameters."""

    provider: str = Field(description="circle, two_point, laurent or declarative")
    params: dict[str, Any] = Field(default_factory=dict)


class SuspensionSpec(BaseModel):
    """Quantum double suspension applied count times."""

    count: int = Field(default=1, ge=1)
    cutoffs: list[int] = Field(description="Inner l^2(N) cutoff per suspension")
    index_caps: list[int] | None = Field(default=None, description="Matrix-unit cap per suspension")

    @model_validator(mode="after")
    def check_layers(self) -> "SuspensionSpec":
        if len(self.cutoffs) != self.count:
            raise ValueError(f"need {self.count} cutoffs, got {len(self.cutoffs)}")
        if any(c < 4 for c in self.cutoffs):
            raise ValueError("inner cutoffs must be at least 4")
        if self.index_caps is not None:
            if len(self.index_caps) != self.count:
                raise ValueError(f"need {self.count} index caps, got {len(self.index_caps)}")
            for cap, cutoff in zip(self.index_caps, self.cutoffs, strict=True):
                if not 1 <= cap <= cutoff // 2:
                    raise ValueError(f"index cap {cap} must lie in 1..{cutoff // 2}")
        return self


class DiracStage(BaseModel):
    """Base Dirac dga at a word budget."""

    cap: int = Field(ge=0, description="Per-letter weight cap")
    total: int | None = Field(default=None, ge=0, description="Cap on the summed weight")
    max_degree: int = Field(default=2, ge=0, le=4)
    filtration: list[list[str]] | None = Field(
        default=None, description="Nested generator subsets for graded dimensions"
    )


class SuspendedStage(BaseModel):
    """Dirac dga of the suspension and its decomposed complex."""

    base_budget: int = Field(ge=0)
    index_cap: int = Field(ge=2, description="Matrix-unit cap of the matched budget")
    laurent_cap: int = Field(ge=0)
    max_degree: int = Field(default=2, ge=1, le=3)
    delta_samples: int = Field(default=50, ge=1)
    cohomology: bool = True
    filtration: list[list[str]] | None = Field(
        default=None, description="Nested base generator subsets for the induced filtration"
    )


class FgrStage(BaseModel):
    """FGR dga of the suspension."""

    base_budget: int = Field(default=1, ge=1, description="Base-algebra degree cap of the FGR words")
    index_cap: int = Field(default=2, ge=1)
    laurent_cap: int = Field(default=2, ge=0)
    max_degree: int = Field(default=1, ge=0, le=4)
    samples: int = Field(default=20, ge=1, description="Random forms per sampled check")


class HeatSpec(BaseModel):
    """Schedules of the heat functionals."""

    t0: float = Field(default_factory=lambda: settings.heat_t0, gt=0)
    ratio: float = Field(default_factory=lambda: settings.heat_ratio, gt=1)
    nodes: int = Field(default_factory=lambda: settings.heat_nodes, ge=3)
    order: int = Field(default_factory=lambda: settings.extrapolation_order, ge=1)
    fgr_t0: float = Field(default_factory=lambda: settings.fgr_t0, gt=0)
    summability_t0: float = Field(default_factory=lambda: settings.summability_t0, gt=0)

    @model_validator(mode="after")
    def check_nodes(self) -> "HeatSpec":
        if self.nodes < self.order + 2:
            raise ValueError(f"nodes ({self.nodes}) must be at least order + 2 ({self.order + 2})")
        return self


class Tolerances(BaseModel):
    rank_tol: float = Field(default_factory=lambda: settings.rank_tol, gt=0)
    k_tol: float = Field(default_factory=lambda: settings.k_tol, gt=0)


class Expectations(BaseModel):
    """Reference values the checks compare against."""

    dirac_dims: list[int] | None = None
    cohomology: list[int] | None = Field(default=None, description="Base H^k")
    summability_p: float | None = None
    heat_identity: float | None = Field(default=None, description="oint(I) on the top triple")
    suspended_degree1: int | None = None
    fgr_dims: list[int] | None = Field(default=None, description="Defaults to (2L+1, 2L+1, 0, ...)")


class OutputSpec(BaseModel):
    dir: Path | None = None
    formats: list[Literal["json", "markdown", "csv"]] = Field(default_factory=lambda: ["json", "markdown"])


class Scenario(BaseModel):
    """One reproducible workbench run."""

    name: str = Field(min_length=1)
    description: str = ""
    base: TripleSpec
    levels: list[int | list[int]] = Field(description="Truncation levels of the base, increasing")
    suspension: SuspensionSpec | None = None
    dirac: DiracStage | None = None
    suspended: SuspendedStage | None = None
    fgr: FgrStage | None = None
    heat: HeatSpec = Field(default_factory=HeatSpec)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    expect: Expectations = Field(default_factory=Expectations)
    checks: list[CheckName] = Field(default_factory=list)
    seed: int = 0
    max_dim: int | None = Field(default=None, ge=1)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @field_validator("levels")
    @classmethod
    def check_levels(cls, levels: list) -> list:
        if not levels:
            raise ValueError("levels must not be empty")
        keys = [tuple(x) if isinstance(x, list) else (x,) for x in levels]
        if any(len(k) != len(keys[0]) for k in keys):
            raise ValueError("levels must all have the same shape")
        for a, b in zip(keys, keys[1:], strict=False):
            if not all(y >= x for x, y in zip(a, b, strict=True)) or a == b:
                raise ValueError(f"levels must increase: {list(a)} then {list(b)}")
        return levels

    @model_validator(mode="after")
    def check_stages(self) -> "Scenario":
        present = {
            "dirac": self.dirac is not None,
            "heat": True,
            "suspension": self.suspension is not None,
            "suspended": self.suspended is not None and self.suspension is not None,
            "fgr": self.fgr is not None and self.suspension is not None,
        }
        for check in self.checks:
            stage = CHECK_STAGES[check]
            if not present[stage]:
                raise ValueError(f"check '{check}' needs the '{stage}' stage")
        if (self.suspended is not None or self.fgr is not None) and self.suspension is None:
            raise ValueError("suspended and fgr stages need a suspension")
        if self.dirac is not None and self.dirac.filtration is None and "graded_formula" in self.checks:
            raise ValueError("check 'graded_formula' needs dirac.filtration")
        if "suspended_graded" in self.checks and (self.suspended is None or self.suspended.filtration is None):
            raise ValueError("check 'suspended_graded' needs suspended.filtration")
        return self

    def level_values(self) -> list:
        return [tuple(x) if isinstance(x, list) else x for x in self.levels]


class CheckResult(BaseModel):
    """Outcome of one acceptance check."""

    name: str
    passed: bool
    detail: str = ""
    expected: Any = None
    observed: Any = None


class RunRecord(BaseModel):
    """Everything a run produced."""

    kind: Literal["run", "compare"] = "run"
    scenario: str
    scenario_hash: str = Field(description="sha256 of the canonical scenario JSON")
    tool_version: str = Field(default_factory=lambda: settings.app_version)
    reports: dict[str, Any] = Field(default_factory=dict)
    checks: list[CheckResult] = Field(default_factory=list)
    stage_seconds: dict[str, float] = Field(
        default_factory=dict, description="Wall clock per stage; kept out of the report bytes"
    )

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)
