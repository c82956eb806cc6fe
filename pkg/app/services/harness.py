"""Scenario orchestration: triple -> suspension -> forms -> fgr -> checks."""

import hashlib
import json
import time
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

from app.config import settings
from app.models.reports import ComparisonReport, DiracDgaReport, KSpaceReport
from app.models.scenario import CheckResult, RunRecord, Scenario
from app.providers.factory import get_triple_provider
from app.services import fgr, forms
from app.services.errors import (
    BudgetError,
    InsufficientTruncationError,
    ResourceGuardError,
    ScenarioValidationError,
    ScheduleError,
)
from app.services.qds import SuspendedTriple, iterate_suspension, letter_name
from app.services.triple import (
    SpectralTripleModel,
    geometric_schedule,
    summability_estimate,
)
from app.utils.logger import logger

HEAT_REL_TOL = 0.01
SUMMABILITY_REL_TOL = 0.05


# Loading


def load_scenario(path: str | Path) -> Scenario:
    """Parse a scenario file; pydantic ValidationError propagates with the violated constraint."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioValidationError(f"cannot read scenario {path}: {e}", module="harness", stage="load") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioValidationError(f"{path} is not valid JSON: {e}", module="harness", stage="load") from e
    return Scenario.model_validate(data)


def canonical_json(scenario: Scenario) -> str:
    return json.dumps(scenario.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def scenario_hash(scenario: Scenario) -> str:
    return hashlib.sha256(canonical_json(scenario).encode("utf-8")).hexdigest()


def bundled_scenarios() -> dict[str, Path]:
    """Bundled scenario files by name."""
    return {p.stem: p for p in sorted(Path(settings.scenarios_dir).glob("*.json"))}


def resolve_scenario(name_or_path: str) -> Scenario:
    """Load a bundled scenario by name, or a scenario file by path."""
    bundled = bundled_scenarios()
    if name_or_path in bundled:
        return load_scenario(bundled[name_or_path])
    return load_scenario(name_or_path)


def parse_levels(text: str) -> list:
    """--levels-override value: a JSON list, or comma-separated integers."""
    text = text.strip()
    try:
        values = json.loads(text) if text.startswith("[") else [int(x) for x in text.split(",") if x]
    except ValueError as e:
        raise ScenarioValidationError(f"cannot parse levels '{text}': {e}", module="harness", stage="levels") from e
    return values


@contextmanager
def settings_override(**values: Any) -> Iterator[None]:
    """Temporarily set fields of the global settings."""
    saved = {k: getattr(settings, k) for k in values}
    try:
        for k, v in values.items():
            setattr(settings, k, v)
        yield
    finally:
        for k, v in saved.items():
            setattr(settings, k, v)


def _dump(report: BaseModel) -> dict[str, Any]:
    return report.model_dump(mode="json")


# Running


class ScenarioRunner:
    """Runs the stages of one scenario and evaluates its checks."""

    def __init__(
        self,
        scenario: Scenario,
        levels_override: list | None = None,
        max_dim: int | None = None,
        seed: int | None = None,
    ):
        """
        Initialize the runner; overrides are folded into the scenario before hashing.

        Args:
            scenario: Validated scenario.
            levels_override: Replacement levels list.
            max_dim: Ambient dimension cap for realized suspensions.
            seed: Seed for sampled checks.
        """
        updates: dict[str, Any] = {}
        if levels_override is not None:
            updates["levels"] = levels_override
        if max_dim is not None:
            updates["max_dim"] = max_dim
        if seed is not None:
            updates["seed"] = seed
        if updates:
            scenario = Scenario.model_validate({**scenario.model_dump(mode="json"), **updates})
        self.scenario = scenario
        self.levels = scenario.level_values()
        self.base: SpectralTripleModel | None = None
        self.suspension: SuspendedTriple | None = None
        self.record = RunRecord(scenario=scenario.name, scenario_hash=scenario_hash(scenario))
        self._reports: dict[str, Any] = {}

    # Construction and validation

    def _guarded(self):
        return settings_override(
            rank_tol=self.scenario.tolerances.rank_tol,
            k_tol=self.scenario.tolerances.k_tol,
            max_dim=self.scenario.max_dim or settings.max_dim,
        )

    def build(self) -> None:
        """Build the base triple and its suspension; precondition failures become validation errors."""
        s = self.scenario
        try:
            with self._guarded():
                self.base = get_triple_provider(s.base.provider).build(s.base.params)
                if s.suspension is not None:
                    self.suspension = iterate_suspension(
                        self.base,
                        s.suspension.count,
                        s.suspension.cutoffs,
                        s.suspension.index_caps,
                        s.max_dim,
                    )
        except (BudgetError, ResourceGuardError) as e:
            raise ScenarioValidationError(str(e), module="harness", stage="build") from e

    @property
    def word_base(self) -> SpectralTripleModel:
        """Triple the suspended stages enumerate words over: the base of the last suspension."""
        assert self.base is not None
        return self.suspension.base if self.suspension is not None else self.base

    def validate(self) -> None:
        """Check every downstream precondition before computing anything."""
        if self.base is None:
            self.build()
        s = self.scenario
        try:
            with self._guarded():
                self._validate_levels(self.word_base)
                if s.dirac is not None:
                    self._validate_levels(self.base)
                    self._validate_budget(self.base, s.dirac.cap, s.dirac.max_degree)
                    for subset in s.dirac.filtration or []:
                        for sym in subset:
                            self.base.generator(sym)
                if s.suspended is not None:
                    self._validate_suspended(s.suspended.index_cap)
                    for subset in s.suspended.filtration or []:
                        for sym in subset:
                            self.word_base.generator(sym)
                    self._validate_budget(
                        self.word_base, s.suspended.base_budget, s.suspended.max_degree, window=True
                    )
                if s.fgr is not None:
                    self._validate_suspended(s.fgr.index_cap)
                self._schedules()
        except (BudgetError, ResourceGuardError, InsufficientTruncationError, ScheduleError) as e:
            raise ScenarioValidationError(str(e), module="harness", stage="validate") from e
        logger.info(f"Scenario '{s.name}' validated ({scenario_hash(s)[:12]})")

    def _validate_levels(self, triple: SpectralTripleModel) -> None:
        product = triple.space.kind == "product"
        for level in self.levels:
            if isinstance(level, tuple) != product:
                raise ScenarioValidationError(
                    f"level {level} does not match the mode space of {triple.name}",
                    module="harness",
                    stage="levels",
                )

    def _validate_budget(
        self, triple: SpectralTripleModel, cap: int, max_degree: int, window: bool = False
    ) -> None:
        """Lifted junk caps must fit the provider's degree cap; words must fit inside the smallest level."""
        budget = forms.WordBudget(cap=cap)
        needed = max([budget.lifted(k).cap for k in range(1, max_degree + 1)], default=cap)
        degree_cap = self.scenario.base.params.get("degree_cap")
        if triple is self.base and degree_cap is not None and int(degree_cap) < needed:
            raise ScenarioValidationError(
                f"degree budget exceeds truncation: junk needs generators up to weight {needed}, "
                f"provider degree_cap is {degree_cap}",
                module="harness",
                stage="budget",
            )
        bandwidth = max((triple.generator(x).bandwidth or 0) for x in triple.symbols(max_weight=needed))
        triple.interior(self.levels[0], (max_degree + 1) * bandwidth)
        if window:
            triple.calkin_window(self.levels[0], 2 * bandwidth)

    def _validate_suspended(self, index_cap: int) -> None:
        assert self.suspension is not None
        if index_cap > self.suspension.algebra.index_cap:
            raise ScenarioValidationError(
                f"matrix-unit cap {index_cap} exceeds the suspension's cap {self.suspension.algebra.index_cap}",
                module="harness",
                stage="budget",
            )

    def _schedules(self) -> dict[str, Any]:
        """Heat schedules: oint on the top triple, oint and int on the base, FGR Gram entries."""
        h = self.scenario.heat
        top = self.suspension or self.base
        out = {
            "oint": fgr.make_schedule(top, h.t0, h.ratio, h.nodes, h.order),
            "base_oint": fgr.make_schedule(self.base, h.t0, h.ratio, h.nodes, h.order),
            "int": fgr.make_schedule(self.base, h.t0, h.ratio, h.nodes, h.order, squared=True),
        }
        if self.scenario.fgr is not None:
            out["fgr"] = fgr.make_schedule(self.suspension, h.fgr_t0, h.ratio, h.nodes, h.order)
        return out

    # Stages

    @contextmanager
    def _stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        logger.info(f"Stage {name} ...")
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.record.stage_seconds[name] = elapsed
            logger.info(f"Stage {name} done in {elapsed:.2f}s")

    def _store(self, key: str, report: BaseModel) -> None:
        self._reports[key] = report
        self.record.reports[key] = _dump(report)

    def suspended_budget(self) -> forms.SuspendedBudget:
        sp = self.scenario.suspended
        return forms.SuspendedBudget(sp.base_budget, sp.index_cap, sp.laurent_cap)

    def fgr_budget(self) -> forms.SuspendedBudget:
        fp = self.scenario.fgr
        return forms.SuspendedBudget(fp.base_budget, fp.index_cap, fp.laurent_cap)

    def run_dirac(self) -> None:
        d = self.scenario.dirac
        budget = forms.WordBudget(cap=d.cap, total=d.total)
        with self._stage("dirac"):
            self._store("base_dirac", forms.dirac_dga_dims(self.base, d.max_degree, budget, self.levels))
            if d.max_degree >= 1:
                cx = forms.build_base_complex(self.base, budget, self.levels, d.max_degree)
                self._store("base_complex", cx.report())
            if d.filtration is not None:
                self._store(
                    "graded", forms.graded_dims(self.base, d.filtration, budget, self.levels)
                )

    def run_heat(self, schedules: dict[str, Any]) -> None:
        s = self.scenario
        top = self.suspension or self.base
        with self._stage("heat"):
            if {"summability", "heat_identity"} & set(s.checks):
                model = top.model if isinstance(top, SuspendedTriple) else top
                t_values = geometric_schedule(s.heat.summability_t0, s.heat.ratio, s.heat.nodes)
                self._store("summability", summability_estimate(model, t_values))
                self._store("heat_identity", fgr.heat_oint(top, fgr.identity_operator(top), schedules["oint"]))
            if "functional_consistency" in s.checks:
                self._store(
                    "consistency",
                    fgr.functional_consistency(
                        self.base, consistency_samples(self.base), schedules["base_oint"], schedules["int"]
                    ),
                )
            if "factorization" in s.checks:
                self._store("factorization", fgr.factorization_check(self.suspension, seed=s.seed))

    def run_suspended(self) -> DiracDgaReport:
        sp = self.scenario.suspended
        budget = self.suspended_budget()
        with self._stage("suspended"):
            report = forms.suspended_dirac_dims(self.suspension, budget, self.levels, sp.max_degree)
            self._store("suspended_dirac", report)
            if sp.filtration is not None:
                self._store(
                    "suspended_graded",
                    forms.suspended_graded_dims(self.suspension, sp.filtration, budget, self.levels),
                )
            if sp.cohomology or "delta" in self.scenario.checks:
                cx = forms.build_suspended_complex(self.suspension, budget, self.levels, sp.max_degree)
                if "delta" in self.scenario.checks:
                    self._store(
                        "delta",
                        forms.delta_check(
                            self.suspension, cx, self.levels[-1], sp.delta_samples, self.scenario.seed
                        ),
                    )
                if sp.cohomology:
                    self._store("cohomology", forms.cohomology_dims(self.suspension, budget, self.levels, cx))
        return report

    def run_fgr(self, schedules: dict[str, Any]) -> KSpaceReport:
        fp = self.scenario.fgr
        budget = self.fgr_budget()
        checks = set(self.scenario.checks)
        with self._stage("fgr"):
            report = fgr.fgr_dga_dims(self.suspension, fp.max_degree, budget, schedules["fgr"])
            self._store("fgr", report)
            if "cross_term" in checks:
                samples = cross_term_samples(self.suspension, budget, fp.samples, self.scenario.seed)
                self._store(
                    "cross_term", fgr.cross_term_vanishing(self.suspension, samples, schedules["oint"])
                )
            if "j0_in_k" in checks:
                self._store(
                    "j0_in_k",
                    fgr.j0_subset_k(
                        self.suspension,
                        budget,
                        self.levels[-1],
                        degree=1,
                        seed=self.scenario.seed,
                        schedule=schedules["oint"],
                    ),
                )
            if "k_ideal" in checks:
                self._store(
                    "k_ideal",
                    fgr.k_ideal_check(
                        self.suspension, budget, seed=self.scenario.seed, schedule=schedules["oint"]
                    ),
                )
        return report

    def run(self) -> RunRecord:
        """Validate, run every configured stage and evaluate the checks."""
        self.validate()
        s = self.scenario
        with self._guarded():
            schedules = self._schedules()
            if s.dirac is not None:
                self.run_dirac()
            self.run_heat(schedules)
            if s.suspended is not None:
                self.run_suspended()
            if s.fgr is not None:
                self.run_fgr(schedules)
        self.record.checks = [self._check(name) for name in s.checks]
        for c in self.record.checks:
            if not c.passed:
                logger.warning(f"Check {c.name} failed: {c.detail}")
        logger.info(
            f"Scenario '{s.name}': {sum(c.passed for c in self.record.checks)}/{len(self.record.checks)} checks passed"
        )
        return self.record

    # Checks

    def _check(self, name: str) -> CheckResult:
        return getattr(self, f"_check_{name}")()

    def _check_dirac_dims(self) -> CheckResult:
        report = self._reports["base_dirac"]
        expected = self.scenario.expect.dirac_dims
        stabilized = all(d.stabilized for d in report.degrees)
        dims_ok = expected is None or report.dims() == expected
        return CheckResult(
            name="dirac_dims",
            passed=dims_ok and stabilized,
            detail=f"dims {report.dims()}, stabilized {stabilized}",
            expected=expected,
            observed=report.dims(),
        )

    def _check_base_cohomology(self) -> CheckResult:
        report = self._reports.get("base_complex")
        observed = report.cohomology if report is not None else []
        expected = self.scenario.expect.cohomology
        return CheckResult(
            name="base_cohomology",
            passed=report is not None and (expected is None or observed == expected),
            detail=f"base complex dims {report.dims if report else None}",
            expected=expected,
            observed=observed,
        )

    def _check_graded_formula(self) -> CheckResult:
        report = self._reports["graded"]
        bad = [e for e in report.entries if e.formula_dim is not None and e.dim != e.formula_dim]
        return CheckResult(
            name="graded_formula",
            passed=not bad,
            detail=f"{len(report.entries)} graded entries, {len(bad)} off the monomial count",
            observed=[[e.step, e.degree, e.dim] for e in report.entries],
        )

    def _check_summability(self) -> CheckResult:
        report = self._reports["summability"]
        expected = self.scenario.expect.summability_p
        if expected is None:
            top = self.suspension or self.base
            expected = top.p
        passed = abs(report.p_hat - expected) <= SUMMABILITY_REL_TOL * max(abs(expected), 1.0)
        return CheckResult(
            name="summability",
            passed=passed,
            detail=f"p_hat {report.p_hat:.6g}",
            expected=expected,
            observed=report.p_hat,
        )

    def _check_heat_identity(self) -> CheckResult:
        limit = self._reports["heat_identity"]
        expected = self.scenario.expect.heat_identity
        passed = expected is None or abs(limit.real - expected) <= HEAT_REL_TOL * abs(expected)
        return CheckResult(
            name="heat_identity",
            passed=passed,
            detail=f"oint(I) = {limit.real:.12g} ± {limit.error_estimate:.3g}",
            expected=expected,
            observed=limit.real,
        )

    def _check_functional_consistency(self) -> CheckResult:
        report = self._reports["consistency"]
        return CheckResult(
            name="functional_consistency",
            passed=report.consistent,
            detail=f"{report.verdict}; excluded {report.excluded}",
            observed=report.ratios,
        )

    def _check_factorization(self) -> CheckResult:
        report = self._reports["factorization"]
        return CheckResult(
            name="factorization",
            passed=report.passed,
            detail=f"max relative deviation {report.max_relative_deviation:.3g} (tol {report.tolerance:.3g})",
        )

    def _check_suspended_formula(self) -> CheckResult:
        report = self._reports["suspended_dirac"]
        degree1 = report.degrees[1]
        expected = self.scenario.expect.suspended_degree1
        passed = (
            degree1.dim_omega_D == degree1.formula_dim == degree1.model_dim == degree1.union_dim
            and degree1.stabilized
        )
        if expected is not None:
            passed &= degree1.dim_omega_D == expected
        return CheckResult(
            name="suspended_formula",
            passed=passed,
            detail=(
                f"measured {degree1.dim_omega_D}, model {degree1.model_dim}, "
                f"span + model {degree1.union_dim}, decomposition {degree1.formula_dim}"
            ),
            expected=degree1.formula_dim if expected is None else expected,
            observed=degree1.dim_omega_D,
        )

    def _check_suspended_graded(self) -> CheckResult:
        report = self._reports["suspended_graded"]
        bad = [e for e in report.entries if e.dim != e.formula_dim]
        return CheckResult(
            name="suspended_graded",
            passed=not bad,
            detail=f"{len(report.entries)} graded entries, {len(bad)} off the decomposition",
            expected=[e.formula_dim for e in report.entries],
            observed=[e.dim for e in report.entries],
        )

    def _check_delta(self) -> CheckResult:
        report = self._reports["delta"]
        return CheckResult(
            name="delta",
            passed=report.passed,
            detail=(
                f"{report.samples} samples, deviation {report.max_delta0_deviation:.3g}, "
                f"delta^2 {report.max_square_residual:.3g}"
            ),
        )

    def _check_cohomology(self) -> CheckResult:
        report = self._reports["cohomology"]
        return CheckResult(
            name="cohomology",
            passed=report.matches,
            detail=f"complex dims {report.complex_dims}",
            expected=[d.corollary for d in report.degrees],
            observed=[d.computed for d in report.degrees],
        )

    def _check_fgr_collapse(self) -> CheckResult:
        report = self._reports["fgr"]
        fp = self.scenario.fgr
        expected = self.scenario.expect.fgr_dims
        if expected is None:
            laurent = 2 * fp.laurent_cap + 1
            expected = ([laurent, laurent] + [0] * fp.max_degree)[: fp.max_degree + 1]
        passed = (
            report.dims() == expected
            and report.finite_words_in_k
            and report.laurent_words_excluded
            and report.marginal_total == 0
        )
        return CheckResult(
            name="fgr_collapse",
            passed=passed,
            detail=(
                f"dims {report.dims()}, finite words in K {report.finite_words_in_k}, "
                f"Laurent words excluded {report.laurent_words_excluded}, marginal {report.marginal_total}"
            ),
            expected=expected,
            observed=report.dims(),
        )

    def _check_cross_term(self) -> CheckResult:
        report = self._reports["cross_term"]
        return CheckResult(
            name="cross_term",
            passed=report.passed,
            detail=f"max {max(report.values, default=0.0):.3g}, failures {report.failures}",
        )

    def _check_j0_in_k(self) -> CheckResult:
        report = self._reports["j0_in_k"]
        return CheckResult(name="j0_in_k", passed=report.passed, detail=f"{report.members}/{report.checked}")

    def _check_k_ideal(self) -> CheckResult:
        report = self._reports["k_ideal"]
        return CheckResult(name="k_ideal", passed=report.passed, detail=f"{report.members}/{report.checked}")


# Sample families


def consistency_samples(triple: SpectralTripleModel) -> dict[str, fgr.PlainOperator]:
    """I, 2I + F, 3I + (weight-1 generators) and a projection onto the modes nearest D = 0."""
    movers = [s for s in triple.symbols(max_weight=1) if s != triple.unit]

    def multiplication(level):
        out = 3 * triple.identity(level)
        for s in movers:
            out = out + triple.operator(s, level)
        return out

    def projection(level):
        diag = np.abs(triple.dirac_diagonal(level))
        keep = diag <= np.sort(diag)[min(2, diag.size - 1)]
        return np.where(keep, 1.0, 0.0)

    return {
        "identity": triple.identity,
        "2I+F": lambda level: 2 * triple.identity(level) + triple.sign(level),
        "multiplication": multiplication,
        "projection": projection,
    }


def cross_term_samples(
    st: SuspendedTriple, budget: forms.SuspendedBudget, count: int, seed: int
) -> dict[str, forms.FormExpr]:
    """(a x e00) d(b x e00), zero, and random combinations of 20 finite-part 1-form words."""
    finite_budget = forms.SuspendedBudget(max(budget.base_budget, 1), budget.index_cap, 0)
    words = forms.enumerate_words(st, 1, finite_budget)
    letters = forms.suspended_letters(st, finite_budget)
    a, b = letters[0], letters[min(len(letters) - 1, budget.index_cap**2)]
    samples = {
        f"({letter_name(a)}) d({letter_name(b)})": forms.FormWord(1.0, (a,), ((b,),)).expr(),
        "zero": forms.FormExpr.zero(1),
    }
    rng = np.random.default_rng(seed)
    for i in range(count):
        picks = rng.choice(len(words), size=min(20, len(words)), replace=False)
        coeffs = rng.standard_normal(len(picks)) + 1j * rng.standard_normal(len(picks))
        samples[f"random {i}"] = forms.FormExpr.from_words([words[j] for j in picks], coeffs)
    return samples


# Entry points


def run_scenario(
    scenario: Scenario,
    levels_override: list | None = None,
    max_dim: int | None = None,
    seed: int | None = None,
) -> RunRecord:
    """Run one scenario end to end."""
    return ScenarioRunner(scenario, levels_override, max_dim, seed).run()


def _comparison_signature(scenario: Scenario) -> tuple:
    if scenario.suspended is None or scenario.fgr is None:
        raise ScenarioValidationError(
            f"scenario '{scenario.name}' lacks the suspended or fgr stage needed for comparison",
            module="harness",
            stage="compare",
        )
    return (
        scenario.suspended.index_cap,
        scenario.suspended.laurent_cap,
        json.dumps(scenario.fgr.model_dump(mode="json"), sort_keys=True),
    )


def comparison_check(comparison: ComparisonReport) -> CheckResult:
    """Passes only when FGR is constant across the bases and Dirac tells them apart."""
    reasons = []
    if not comparison.fgr_constant:
        reasons.append("FGR dimensions vary across bases")
    if not comparison.dirac_varies:
        reasons.append("Dirac dimensions do not distinguish the bases")
    return CheckResult(
        name="comparison",
        passed=not reasons,
        detail="; ".join([comparison.verdict, *reasons]),
        observed=comparison.flagged_degrees,
    )


def run_comparison(
    scenarios: Sequence[Scenario], max_dim: int | None = None, seed: int | None = None
) -> RunRecord:
    """
    Suspended Dirac and FGR dimensions of each scenario, compared across bases.

    Raises:
        ScenarioValidationError: fewer than two scenarios, or incompatible budgets.
    """
    if len(scenarios) < 2:
        raise ScenarioValidationError("comparison needs at least two scenarios", module="harness", stage="compare")
    signatures = {_comparison_signature(s) for s in scenarios}
    if len(signatures) > 1:
        raise ScenarioValidationError(
            "incompatible budgets: compared scenarios must share matrix-unit, Laurent and FGR budgets",
            module="harness",
            stage="compare",
        )
    rows = []
    record = RunRecord(
        kind="compare",
        scenario="+".join(s.name for s in scenarios),
        scenario_hash=hashlib.sha256("".join(scenario_hash(s) for s in scenarios).encode()).hexdigest(),
    )
    for s in scenarios:
        runner = ScenarioRunner(s, max_dim=max_dim, seed=seed)
        runner.validate()
        with runner._guarded():
            schedules = runner._schedules()
            dirac = runner.run_suspended()
            k_report = runner.run_fgr(schedules)
        rows.append((s.name, dirac, k_report))
        for stage, seconds in runner.record.stage_seconds.items():
            record.stage_seconds[f"{s.name}/{stage}"] = seconds
    comparison = fgr.compare_dgas(rows)
    record.reports["comparison"] = _dump(comparison)
    record.checks = [comparison_check(comparison)]
    logger.info(f"Comparison verdict: {comparison.verdict}")
    return record
