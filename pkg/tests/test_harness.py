"""Tests for scenario loading, validation and runs."""

import json

import pytest
from pydantic import ValidationError

from app.config import settings
from app.models.reports import ComparisonReport
from app.models.scenario import Scenario
from app.services.errors import ScenarioValidationError
from app.services.harness import (
    ScenarioRunner,
    bundled_scenarios,
    comparison_check,
    consistency_samples,
    cross_term_samples,
    load_scenario,
    parse_levels,
    resolve_scenario,
    run_comparison,
    run_scenario,
    scenario_hash,
    settings_override,
)
from app.services.forms import SuspendedBudget
from app.services.qds import suspend_triple
from app.services.triple import make_circle_triple


@pytest.fixture
def circle_data():
    """Minimal circle scenario as plain data."""
    return {
        "name": "circle-small",
        "base": {"provider": "circle", "params": {"fourier_cutoff": 24, "degree_cap": 6}},
        "levels": [24, 32, 48],
        "dirac": {"cap": 3, "max_degree": 2},
        "checks": ["dirac_dims"],
    }


@pytest.fixture
def baseline():
    """The bundled circle baseline."""
    return resolve_scenario("circle-baseline")


def test_bundled_scenarios_load():
    """Every bundled scenario parses."""
    names = bundled_scenarios()

    assert {"circle-baseline", "suspension-theorem", "two-point-suspension"} <= set(names)
    for path in names.values():
        assert load_scenario(path).name == path.stem


def test_load_scenario_missing_file(tmp_path):
    """Unreadable files are validation errors."""
    with pytest.raises(ScenarioValidationError):
        load_scenario(tmp_path / "missing.json")


def test_load_scenario_malformed_json(tmp_path):
    """Broken JSON is a validation error."""
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ScenarioValidationError):
        load_scenario(path)


def test_scenario_requires_levels(circle_data, tmp_path):
    """A scenario without levels fails pydantic validation."""
    del circle_data["levels"]
    path = tmp_path / "nolevels.json"
    path.write_text(json.dumps(circle_data), encoding="utf-8")
    with pytest.raises(ValidationError):
        load_scenario(path)


def test_scenario_levels_must_increase(circle_data):
    """Repeated or decreasing levels are rejected."""
    circle_data["levels"] = [32, 24]
    with pytest.raises(ValidationError):
        Scenario.model_validate(circle_data)


def test_check_needs_its_stage(circle_data):
    """A suspended check without a suspension is rejected."""
    circle_data["checks"] = ["delta"]
    with pytest.raises(ValidationError, match="needs the 'suspended' stage"):
        Scenario.model_validate(circle_data)


def test_graded_check_needs_filtration(circle_data):
    """graded_formula needs a filtration."""
    circle_data["checks"] = ["graded_formula"]
    with pytest.raises(ValidationError, match="filtration"):
        Scenario.model_validate(circle_data)


def test_scenario_hash_is_stable(circle_data):
    """Equal scenarios hash equally; a changed level changes the hash."""
    a = Scenario.model_validate(circle_data)
    b = Scenario.model_validate(json.loads(json.dumps(circle_data)))
    circle_data["levels"] = [24, 32, 64]
    c = Scenario.model_validate(circle_data)

    assert scenario_hash(a) == scenario_hash(b)
    assert scenario_hash(a) != scenario_hash(c)
    assert len(scenario_hash(a)) == 64


def test_parse_levels():
    """Comma lists and JSON lists both parse."""
    assert parse_levels("24,32,48") == [24, 32, 48]
    assert parse_levels("[[8, 8], [10, 8]]") == [[8, 8], [10, 8]]
    with pytest.raises(ScenarioValidationError):
        parse_levels("a,b")


def test_settings_override_restores():
    """Overridden settings are restored on exit."""
    before = settings.rank_tol
    with settings_override(rank_tol=1e-3):
        assert settings.rank_tol == 1e-3
    assert settings.rank_tol == before


def test_validate_baseline(baseline):
    """The bundled baseline passes validation without computing."""
    runner = ScenarioRunner(baseline)
    runner.validate()

    assert runner.base.name == "circle"
    assert runner.suspension is None


def test_levels_override_changes_hash(baseline):
    """Overrides are folded into the recorded scenario."""
    runner = ScenarioRunner(baseline, levels_override=[24, 32, 64])

    assert runner.levels == [24, 32, 64]
    assert runner.record.scenario_hash != scenario_hash(baseline)


def test_degree_budget_beyond_provider_cap(circle_data):
    """Junk at cap 4 needs weight-7 generators; the provider stops at 6."""
    circle_data["dirac"]["cap"] = 4
    runner = ScenarioRunner(Scenario.model_validate(circle_data))
    with pytest.raises(ScenarioValidationError, match="degree budget exceeds truncation"):
        runner.validate()


def test_level_shape_must_match_space(baseline):
    """Tuple levels are rejected on a plain circle."""
    runner = ScenarioRunner(baseline, levels_override=[[24, 4], [32, 4], [48, 4]])
    with pytest.raises(ScenarioValidationError):
        runner.validate()


def test_unknown_provider_is_invalid(circle_data):
    """Unknown providers fail at build time."""
    circle_data["base"]["provider"] = "torus"
    with pytest.raises(ScenarioValidationError):
        ScenarioRunner(Scenario.model_validate(circle_data)).validate()


def test_consistency_samples():
    """Four named samples, each a level -> operator family."""
    circle = make_circle_triple(24, 6)
    samples = consistency_samples(circle)

    assert set(samples) == {"identity", "2I+F", "multiplication", "projection"}
    assert samples["projection"](24).sum() == 3


def test_cross_term_samples_are_seeded():
    """Equal seeds give equal sample families, named plus random."""
    st = suspend_triple(make_circle_triple(24, 6), 8, index_cap=3)
    a = cross_term_samples(st, SuspendedBudget(0, 2, 3), 3, seed=1)
    b = cross_term_samples(st, SuspendedBudget(0, 2, 3), 3, seed=1)

    assert list(a) == list(b)
    assert "zero" in a
    assert len(a) == 5
    assert all(a[k].terms == b[k].terms for k in a)


def test_comparison_needs_two_scenarios():
    """A single scenario cannot be compared."""
    with pytest.raises(ScenarioValidationError):
        run_comparison([resolve_scenario("suspension-theorem")])


def test_comparison_needs_suspended_stages(baseline):
    """Scenarios without suspended and fgr stages cannot be compared."""
    with pytest.raises(ScenarioValidationError):
        run_comparison([baseline, resolve_scenario("two-point-suspension")])


def test_comparison_rejects_budget_mismatch():
    """Compared scenarios must share matrix-unit and Laurent caps."""
    theorem = resolve_scenario("suspension-theorem")
    data = resolve_scenario("two-point-suspension").model_dump(mode="json")
    data["suspended"]["laurent_cap"] = 2
    with pytest.raises(ScenarioValidationError, match="incompatible budgets"):
        run_comparison([theorem, Scenario.model_validate(data)])


def test_comparison_check_needs_both_conditions():
    """Constant FGR alone does not pass; each missing condition is reported."""
    blind = ComparisonReport(
        rows=[], fgr_constant=True, dirac_varies=False, verdict="no distinguishing power measurable"
    )
    both_vary = ComparisonReport(
        rows=[], flagged_degrees=[], fgr_constant=False, dirac_varies=True, verdict="FGR varies"
    )
    good = ComparisonReport(
        rows=[],
        flagged_degrees=[0, 1],
        fgr_constant=True,
        dirac_varies=True,
        verdict="FGR constant across bases; Dirac distinguishes",
    )

    assert not comparison_check(blind).passed
    assert "Dirac dimensions do not distinguish the bases" in comparison_check(blind).detail
    assert "FGR dimensions vary across bases" not in comparison_check(blind).detail
    assert not comparison_check(both_vary).passed
    assert "FGR dimensions vary across bases" in comparison_check(both_vary).detail
    assert comparison_check(good).passed
    assert comparison_check(good).observed == [0, 1]


def test_bundled_fgr_stages_include_base_letters():
    """Both suspension scenarios measure FGR with base letters and expect 5 and 5."""
    for name in ("suspension-theorem", "two-point-suspension"):
        scenario = resolve_scenario(name)
        assert scenario.fgr.base_budget >= 1
        assert scenario.expect.fgr_dims == [5, 5]


@pytest.mark.slow
def test_run_baseline(baseline):
    """The circle baseline passes all of its checks."""
    record = run_scenario(baseline)

    assert [c.name for c in record.checks] == baseline.checks
    assert record.passed
    assert record.reports["base_dirac"]["degrees"][1]["dim_omega_D"] == 13
    assert set(record.stage_seconds) == {"dirac", "heat"}


@pytest.mark.slow
def test_compare_bundled_suspensions():
    """FGR is constant across the circle and two-point bases while Dirac distinguishes them."""
    record = run_comparison(
        [resolve_scenario("suspension-theorem"), resolve_scenario("two-point-suspension")]
    )

    assert record.kind == "compare"
    assert record.passed
    assert record.reports["comparison"]["verdict"] == "FGR constant across bases; Dirac distinguishes"
    assert [c.name for c in record.checks] == ["comparison"]
