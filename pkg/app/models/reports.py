"""Report models emitted by the numerical modules."""

from typing import Any

from pydantic import BaseModel, Field


class RankReport(BaseModel):
    """Numerical rank of a span."""

    rank: int = Field(ge=0)
    singular_values: list[float] = Field(description="Descending singular values")
    cutoff_used: float = Field(description="Relative cutoff; absolute threshold is cutoff * scale")
    scale: float = Field(default=1.0, description="max(largest singular value, 1)")
    marginal: bool = Field(default=False, description="A singular value sits near the cutoff")


class DecayReport(BaseModel):
    """Cross-level compactness surrogate for [D,a]F - F[D,a]."""

    generator: str
    levels: list[Any]
    rank_r: int = Field(description="Numerical rank at the smallest level")
    tail_norms: list[float] = Field(description="Distance to the best rank-r approximation per level")
    leading_singular_values: list[list[float]] = Field(default_factory=list)
    verdict: str
    passed: bool


class MorphismReport(BaseModel):
    """Result of checking a unitary morphism between two triples."""

    passed: bool
    levels: list[Any]
    relations: dict[str, bool] = Field(default_factory=dict)
    failures: list[str] = Field(default_factory=list)
    max_residual: float = 0.0


class SummabilityReport(BaseModel):
    """Least-squares fit of log Tr e^{-t|D|} against log t."""

    p_hat: float
    intercept: float
    residual: float
    t_values: list[float]
    traces: list[float]
    levels: list[Any]


class HeatSchedule(BaseModel):
    """Geometric t-schedule with the truncation level bound to each node."""

    t0: float
    ratio: float
    nodes: int
    extrapolation_order: int
    t_values: list[float]
    level_binding: list[Any] = Field(description="Truncation level per t, same order as t_values")
    squared: bool = Field(default=False, description="Levels bound for e^{-tD^2} instead of e^{-t|D|}")


class HeatLimit(BaseModel):
    """Extrapolated t -> 0 limit of a heat functional."""

    real: float
    imag: float = 0.0
    error_estimate: float = Field(ge=0.0)
    schedule: HeatSchedule
    samples: list[float] = Field(default_factory=list, description="Real parts per node")

    @property
    def value(self) -> complex:
        return complex(self.real, self.imag)


class LevelDims(BaseModel):
    """Dimensions of one form degree at one truncation level."""

    level: Any
    dim_pi_omega: int
    dim_junk: int
    dim_omega_D: int
    marginal: bool = False


class DegreeDims(BaseModel):
    """Dirac dga dimensions of one degree across levels."""

    degree: int
    dim_pi_omega: int
    dim_junk: int
    dim_omega_D: int
    stabilized: bool
    method: str = Field(default="span", description="span, window-span or decomposition")
    formula_dim: int | None = Field(default=None, description="Decomposition-side dimension")
    model_dim: int | None = Field(default=None, description="Rank of the decomposition model space")
    union_dim: int | None = Field(default=None, description="Rank of the measured span plus the model space")
    word_count: int = 0
    per_level: list[LevelDims] = Field(default_factory=list)


class DiracDgaReport(BaseModel):
    """Per-degree dimensions of the Dirac dga at a finite budget."""

    triple: str
    budget: dict[str, Any]
    levels: list[Any]
    degrees: list[DegreeDims]

    def dims(self) -> list[int]:
        return [d.dim_omega_D for d in self.degrees]


class BaseComplexReport(BaseModel):
    """Dimensions and differential ranks of a truncated base Dirac complex."""

    dims: list[int]
    ranks: list[int] = Field(description="rank of d^k : Omega_D^k -> Omega_D^(k+1)")
    cohomology: list[int]


class CohomologyDegree(BaseModel):
    degree: int
    computed: int
    corollary: int
    matches: bool


class CohomologyReport(BaseModel):
    """Cohomology of the decomposed suspended complex against the corollary dimensions."""

    matrix_cap: int
    laurent_cap: int
    complex_dims: list[int]
    base: BaseComplexReport
    degrees: list[CohomologyDegree]

    @property
    def matches(self) -> bool:
        return all(d.matches for d in self.degrees)


class GradedEntry(BaseModel):
    step: int
    degree: int
    dim: int
    formula_dim: int | None = None


class GradedDimsReport(BaseModel):
    """Dimensions of the associated graded pieces of a filtered algebra."""

    filtration: list[list[str]]
    entries: list[GradedEntry]


class MembershipReport(BaseModel):
    """K-space membership verdict for one form."""

    member: bool
    marginal: bool
    value: float = Field(description="|oint pi(w)* pi(w)| relative to oint(I)")
    threshold: float
    limit: HeatLimit
    refinements: int = 0


class KSpaceDegree(BaseModel):
    """FGR data of one degree."""

    degree: int
    word_count: int
    dim_pi_omega: int
    k_dim: int = Field(description="Dimension of K inside the word coefficient space")
    dim_pi_k: int
    dim_pi_k_plus_dk: int
    dim_omega_tilde: int
    marginal_count: int = 0
    kept_eigenvalue_min: float | None = None
    null_eigenvalue_max: float | None = None


class KSpaceReport(BaseModel):
    """Per-degree K-spaces and FGR dga dimensions."""

    triple: str
    budget: dict[str, Any]
    schedule: HeatSchedule
    degrees: list[KSpaceDegree]
    finite_words_in_k: bool = True
    laurent_words_excluded: bool = True

    def dims(self) -> list[int]:
        return [d.dim_omega_tilde for d in self.degrees]

    @property
    def marginal_total(self) -> int:
        return sum(d.marginal_count for d in self.degrees)


class ConsistencyReport(BaseModel):
    """Ratio of the normalized and the t^p functionals across samples."""

    ratios: dict[str, float]
    excluded: list[str] = Field(default_factory=list)
    spread: float
    consistent: bool
    verdict: str


class CrossTermReport(BaseModel):
    """|oint (F x 1) pi(w)| relative to oint(I) per sample."""

    values: list[float]
    threshold: float
    passed: bool
    failures: list[str] = Field(default_factory=list)


class DeltaCheckReport(BaseModel):
    """Decomposed differential against the realized commutator with the suspended Dirac."""

    samples: int
    max_delta0_deviation: float
    max_square_residual: float
    passed: bool


class ComparisonRow(BaseModel):
    label: str
    dirac: list[int]
    fgr: list[int]
    dirac_ambient: list[int] = Field(default_factory=list)
    fgr_ambient: list[int] = Field(default_factory=list)


class ComparisonReport(BaseModel):
    """Side-by-side Dirac and FGR dimensions across base triples."""

    rows: list[ComparisonRow]
    flagged_degrees: list[int] = Field(default_factory=list)
    fgr_constant: bool
    dirac_varies: bool
    verdict: str


class FactorizationReport(BaseModel):
    """Realized suspended heat traces against the product of the factor traces."""

    samples: int
    t_values: list[float]
    max_relative_deviation: float
    tolerance: float
    passed: bool


class MembershipBatchReport(BaseModel):
    """K-membership verdicts over a family of forms that should all lie in K."""

    name: str
    checked: int
    members: int
    marginal: int = 0
    failures: list[str] = Field(default_factory=list)
    passed: bool
