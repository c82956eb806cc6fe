"""Tests for triple providers."""

import numpy as np
import pytest

from app.providers import CircleProvider, DeclarativeProvider, get_triple_provider
from app.services.errors import ScenarioValidationError


def test_factory_returns_builtin_providers():
    """Built-in names resolve, dashes and case are normalized."""
    assert isinstance(get_triple_provider("circle"), CircleProvider)
    assert get_triple_provider("Two-Point").build({}).name == "two_point"


def test_factory_rejects_unknown_provider():
    """Unknown provider names are a validation error."""
    with pytest.raises(ScenarioValidationError):
        get_triple_provider("torus")


def test_circle_provider_defaults():
    """Missing parameters fall back to the provider defaults."""
    provider = CircleProvider()
    triple = provider.build({"degree_cap": 3})

    assert provider.is_available()
    assert triple.min_level == 24
    assert "z^3" in triple.symbols()
    assert "z^4" not in triple.symbols()


def test_declarative_circle_matches_builtin():
    """A declarative shift with D = n reproduces the circle generator and Dirac."""
    params = {
        "name": "declared-circle",
        "space": "integers",
        "cutoff": 8,
        "dirac": "n",
        "p": 1,
        "generators": {"z": {"bands": {"1": "1"}, "adjoint": "zs"}, "zs": {"bands": {"-1": "1"}, "adjoint": "z"}},
    }
    declared = DeclarativeProvider().build(params)
    builtin = CircleProvider().build({"fourier_cutoff": 8, "degree_cap": 2})

    assert declared.name == "declared-circle"
    assert np.allclose(declared.operator("z", 8).toarray(), builtin.operator("z^1", 8).toarray())
    assert np.allclose(declared.dirac_diagonal(8), builtin.dirac_diagonal(8))
    assert declared.generator("z").bandwidth == 1


def test_declarative_rejects_unknown_symbols():
    """Expressions may only use the mode label n."""
    params = {"space": "integers", "cutoff": 8, "dirac": "n + m", "p": 1, "generators": {}}
    with pytest.raises(ScenarioValidationError):
        DeclarativeProvider().build(params)


def test_declarative_rejects_unknown_space():
    """Only integers, naturals and finite mode spaces are declarable."""
    with pytest.raises(ScenarioValidationError):
        DeclarativeProvider().build({"space": "reals"})
