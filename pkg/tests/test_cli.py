"""Tests for the command-line interface."""

import json

import pytest

from app.cli import EXIT_INVALID, EXIT_OK, build_parser, main


def test_list_scenarios(capsys):
    """Bundled scenarios are listed with their descriptions."""
    assert main(["list-scenarios"]) == EXIT_OK

    out = capsys.readouterr().out
    assert "circle-baseline" in out
    assert "suspension-theorem" in out


def test_validate_bundled_scenario(capsys):
    """validate prints the scenario hash and exits 0."""
    assert main(["validate", "circle-baseline"]) == EXIT_OK
    assert "circle-baseline: valid (" in capsys.readouterr().out


def test_missing_config_is_invalid(tmp_path):
    """A missing scenario file exits with the validation code."""
    assert main(["run", str(tmp_path / "nope.json")]) == EXIT_INVALID


def test_malformed_config_is_invalid(tmp_path):
    """A scenario violating the schema exits with the validation code."""
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"name": "bad", "base": {"provider": "circle"}, "levels": []}), encoding="utf-8")

    assert main(["validate", str(path)]) == EXIT_INVALID


def test_bad_levels_override_is_invalid():
    """Unparseable level overrides exit with the validation code."""
    assert main(["validate", "circle-baseline", "--levels-override", "x,y"]) == EXIT_INVALID


def test_compare_needs_two_scenarios():
    """compare with one scenario exits with the validation code."""
    assert main(["compare", "suspension-theorem"]) == EXIT_INVALID


def test_parser_collects_formats():
    """--format may be repeated."""
    args = build_parser().parse_args(["run", "x", "--format", "json", "--format", "csv", "--seed", "3"])

    assert args.format == ["json", "csv"]
    assert args.seed == 3


def test_unknown_command_exits():
    """argparse rejects unknown subcommands."""
    with pytest.raises(SystemExit):
        main(["frobnicate"])
