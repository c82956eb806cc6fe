"""Tests for truncated triples, heat traces and morphisms."""

import logging
from functools import partial

import numpy as np
import pytest
from scipy import sparse

from app.services.errors import BudgetError
from app.services.triple import (
    ModeSpace,
    MorphismModel,
    SpectralTripleModel,
    TruncationFamily,
    bind_level,
    condition_A_check,
    conjugate_triple,
    geometric_schedule,
    heat_trace,
    make_circle_triple,
    make_laurent_triple,
    make_two_point_triple,
    reflection_unitary,
    sign_of,
    summability_estimate,
    toeplitz_shift,
    verify_morphism,
)


@pytest.fixture
def circle():
    """Circle triple with Fourier cutoff 24 and degree cap 6."""
    return make_circle_triple(24, 6)


@pytest.fixture
def two_point():
    """Two-point triple."""
    return make_two_point_triple()


def test_circle_dimensions_and_generators(circle):
    """Modes -M..M and generators ordered by |k| with the unit first."""
    assert circle.dim(24) == 49
    assert circle.symbols(max_weight=1) == ["1", "z^1", "z^-1"]
    assert circle.adjoint_symbol("z^2") == "z^-2"
    assert circle.p == 1.0


def test_circle_commutator_with_shift(circle):
    """[D, z] = z on the truncation."""
    comm = circle.commutator("z^1", 8).toarray()
    z = circle.operator("z^1", 8).toarray()

    assert np.allclose(comm, z)


def test_circle_degree_cap_must_fit_cutoff():
    """A degree cap above a quarter of the cutoff is rejected."""
    with pytest.raises(BudgetError):
        make_circle_triple(24, 7)


def test_circle_validates(circle):
    """Structural invariants hold at several levels."""
    for level in (24, 32):
        circle.validate(level)


def test_interior_shrinks_with_margin(circle):
    """Interior rows keep |n| <= M - margin; an oversized margin raises."""
    rows = circle.interior(10, 3)

    assert rows.size == 2 * 7 + 1
    with pytest.raises(BudgetError):
        circle.interior(10, 11)


def test_calkin_window_avoids_sign_flip(circle):
    """Window rows stay away from both the edge and n = 0."""
    labels = np.arange(-10, 11)
    window = labels[circle.calkin_window(10, 3)]

    assert np.all(np.abs(window) <= 7)
    assert np.all((window >= 3) | (window <= -4))


def test_circle_heat_trace_closed_form(circle):
    """Tr e^{-t|D|} = coth(t/2) on the circle."""
    t = 0.1
    expected = (1 + np.exp(-t)) / (1 - np.exp(-t))

    assert heat_trace(circle, t) == pytest.approx(expected, rel=1e-10)


def test_bind_level_certifies_tail(circle):
    """Bound levels never go below the cutoff and grow as t shrinks."""
    big_t = bind_level(circle, 0.5)
    small_t = bind_level(circle, 0.01)

    assert big_t >= 24
    assert small_t > big_t


def test_two_point_heat_trace(two_point):
    """A finite triple traces exactly: 2 e^{-t}."""
    assert heat_trace(two_point, 0.3) == pytest.approx(2 * np.exp(-0.3))
    assert heat_trace(two_point, 0.3, with_sign=True) == pytest.approx(0.0, abs=1e-15)


def test_summability_of_circle(circle):
    """Fitted summability exponent of the circle is 1."""
    report = summability_estimate(circle, geometric_schedule(0.1, 2.0, 8))

    assert report.p_hat == pytest.approx(1.0, abs=0.05)
    assert len(report.traces) == 8


def test_laurent_triple_is_one_summable():
    """The Laurent triple with D = N has p = 1."""
    laurent = make_laurent_triple(24, 3)
    report = summability_estimate(laurent, geometric_schedule(0.1, 2.0, 8))

    assert laurent.dim(24) == 24
    assert report.p_hat == pytest.approx(1.0, abs=0.05)


def test_condition_a_passes_on_circle(circle):
    """[D, z]F - F[D, z] is finite rank on the circle."""
    report = condition_A_check(circle, "z^1", [16, 24, 32])

    assert report.passed
    assert report.rank_r >= 1


def test_reflection_morphism(circle):
    """Conjugation by e_n -> e_{-n} intertwines the circle with its image."""
    unitary = reflection_unitary()
    target = conjugate_triple(circle, unitary, name="circle-reflected")
    phi = {s: s for s in circle.symbols(max_weight=2)}
    report = verify_morphism(MorphismModel(circle, target, phi, unitary), [12, 16], samples=5)

    assert report.passed
    assert report.failures == []


def test_sign_of_uses_zero_convention(circle):
    """F = sign(D) with sign(0) = +1 on the circle."""
    f = sign_of(circle, 2)

    assert np.allclose(np.diag(f), [-1, -1, 1, 1, 1])
    assert np.allclose(f @ f, np.eye(5))


def _parity_dirac(level):
    n = np.arange(int(level))
    return sparse.diags((-1.0) ** n * (n + 1))


def parity_triple():
    """D = diag((-1)^n (n + 1)) on l^2(N) with the unilateral shift as generator."""
    shift = TruncationFamily("s", partial(toeplitz_shift, k=1), bandwidth=1, weight=1)
    return SpectralTripleModel(
        name="parity",
        space=ModeSpace("naturals"),
        generators={"s": shift},
        dirac=TruncationFamily("D", _parity_dirac),
        p=1.0,
        min_level=4,
        heat_factors=(),
    )


def test_condition_a_fails_when_sign_flips_everywhere():
    """[D, s]F - F[D, s] is a weighted shift with growing weights, so the tail grows."""
    report = condition_A_check(parity_triple(), "s", [8, 12, 16])

    assert not report.passed
    assert report.verdict == "compact-surrogate: fail"
    assert report.tail_norms[0] < report.tail_norms[-1]


def test_condition_a_needs_three_levels(circle):
    """Two levels cannot show decay."""
    with pytest.raises(BudgetError):
        condition_A_check(circle, "z^1", [16, 24])


def test_reflection_is_not_a_self_morphism(circle):
    """e_n -> e_{-n} maps D to -D, so it does not intertwine the circle with itself."""
    phi = {s: s for s in circle.symbols(max_weight=1)}
    report = verify_morphism(MorphismModel(circle, circle, phi, reflection_unitary()), [12, 16], samples=3)

    assert not report.passed
    assert "dirac intertwining" in report.failures
    assert "generator intertwining" in report.failures
    assert report.relations["unitary"]


def test_poor_summability_fit_warns(two_point, caplog):
    """A finite triple has no power law; the fit residual is reported."""
    with caplog.at_level(logging.WARNING, logger="spectral-dga"):
        report = summability_estimate(two_point, [1.0, 0.1, 0.01])

    assert report.residual == pytest.approx(0.33, abs=0.02)
    assert any("is poor" in r.getMessage() for r in caplog.records)


def test_good_summability_fit_is_quiet(circle, caplog):
    """The circle follows 2/t closely and logs no warning."""
    with caplog.at_level(logging.WARNING, logger="spectral-dga"):
        summability_estimate(circle, geometric_schedule(0.1, 2.0, 8))

    assert not [r for r in caplog.records if r.levelno >= logging.WARNING]
