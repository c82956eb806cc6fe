"""Tests for heat functionals, K-membership and the FGR dga."""

import numpy as np
import pytest

from app.config import settings
from app.models.reports import DegreeDims, DiracDgaReport, HeatSchedule, KSpaceDegree, KSpaceReport
from app.services.errors import BudgetError, ScheduleError
from app.services.fgr import (
    compare_dgas,
    cross_term_vanishing,
    degree_gram,
    factorization_check,
    fgr_dga_dims,
    functional_consistency,
    heat_int,
    heat_oint,
    j0_subset_k,
    k_ideal_check,
    k_membership,
    make_schedule,
    refine_schedule,
)
from app.services.forms import FormExpr, FormWord, SuspendedBudget, enumerate_words
from app.services.qds import TensorOp, suspend_triple
from app.services.triple import make_circle_triple, make_two_point_triple

FIN_UNIT = ("fin", "1", 0, 0)


@pytest.fixture
def circle():
    """Circle triple with Fourier cutoff 24 and degree cap 6."""
    return make_circle_triple(24, 6)


@pytest.fixture
def suspension(circle):
    """Sigma^2 of the circle with inner cutoff 8 and matrix-unit cap 3."""
    return suspend_triple(circle, 8, index_cap=3)


@pytest.fixture
def two_point_suspension():
    """Sigma^2 of the two-point space with inner cutoff 8 and matrix-unit cap 3."""
    return suspend_triple(make_two_point_triple(), 8, index_cap=3)


def dirac_report(dims, index_cap=3):
    return DiracDgaReport(
        triple="base",
        budget={"index_cap": index_cap, "laurent_cap": 3},
        levels=[1],
        degrees=[
            DegreeDims(degree=n, dim_pi_omega=d, dim_junk=0, dim_omega_D=d, stabilized=True)
            for n, d in enumerate(dims)
        ],
    )


def fgr_report(dims):
    schedule = HeatSchedule(
        t0=0.05, ratio=2.0, nodes=8, extrapolation_order=2, t_values=[0.05], level_binding=[24]
    )
    return KSpaceReport(
        triple="base",
        budget={"base_budget": 0, "index_cap": 2, "laurent_cap": 3},
        schedule=schedule,
        degrees=[
            KSpaceDegree(
                degree=n,
                word_count=d,
                dim_pi_omega=d,
                k_dim=0,
                dim_pi_k=0,
                dim_pi_k_plus_dk=0,
                dim_omega_tilde=d,
            )
            for n, d in enumerate(dims)
        ],
    )


def test_make_schedule_rejects_bad_parameters(circle):
    """Ratios <= 1 and too few nodes for the extrapolation order are refused."""
    with pytest.raises(ScheduleError):
        make_schedule(circle, ratio=1.0)
    with pytest.raises(ScheduleError):
        make_schedule(circle, nodes=3, order=2)


def test_make_schedule_binds_growing_levels(circle):
    """Smaller t needs larger truncations."""
    schedule = make_schedule(circle)

    assert len(schedule.t_values) == schedule.nodes
    assert schedule.level_binding == sorted(schedule.level_binding)
    assert schedule.level_binding[0] >= 24


def test_heat_oint_of_identity_on_circle(circle):
    """t Tr e^{-t|D|} tends to 2 on the circle."""
    limit = heat_oint(circle, circle.identity, make_schedule(circle))

    assert limit.real == pytest.approx(2.0, rel=1e-2)
    assert limit.schedule.t0 == 0.5


def test_heat_oint_needs_modulus_schedule(circle):
    """A schedule bound for D^2 is not accepted by heat_oint."""
    with pytest.raises(ScheduleError):
        heat_oint(circle, circle.identity, make_schedule(circle, squared=True))


def test_heat_int_normalizes(circle):
    """The normalized functional is 1 on the identity and 0 on F."""
    schedule = make_schedule(circle, squared=True)

    assert heat_int(circle, circle.identity, schedule).real == pytest.approx(1.0, abs=1e-6)
    assert heat_int(circle, circle.sign, schedule).real == pytest.approx(0.0, abs=1e-3)


def test_heat_oint_of_identity_on_suspension(suspension):
    """t^2 Tr e^{-t|Sigma^2 D|} tends to 2."""
    limit = heat_oint(suspension, TensorOp.identity(), make_schedule(suspension))

    assert limit.real == pytest.approx(2.0, rel=1e-2)


def test_functional_consistency(circle):
    """Both functionals agree up to the normalization oint(I)."""
    samples = {
        "I": circle.identity,
        "2I+F": lambda level: 2 * circle.identity(level) + circle.sign(level),
    }
    report = functional_consistency(circle, samples)

    assert report.consistent
    assert report.verdict == "consistent"
    assert report.ratios["2I+F"] == pytest.approx(1.0, rel=0.05)


def test_factorization_check(suspension):
    """The suspended heat trace splits into base and Toeplitz traces."""
    report = factorization_check(suspension, samples=10)

    assert report.passed
    assert report.max_relative_deviation <= report.tolerance


def test_finite_words_are_in_k(suspension):
    """1 x e_00 is trace class, its oint vanishes."""
    omega = FormWord(1.0, (FIN_UNIT,)).expr()
    report = k_membership(suspension, omega)

    assert report.member
    assert report.value <= report.threshold


def test_laurent_words_are_not_in_k(suspension):
    """sigma'(z)* sigma'(z) = 1 - e_00 has oint 2."""
    omega = FormWord(1.0, (("lau", 1),)).expr()
    report = k_membership(suspension, omega)

    assert not report.member
    assert report.value == pytest.approx(1.0, rel=1e-2)


def test_cross_term_vanishes(suspension):
    """oint (F x 1) pi(w) vanishes on 1-forms over A x S."""
    samples = {
        "zero": FormExpr.zero(1),
        "a db": FormWord(1.0, (("fin", "1", 0, 1),), ((("fin", "z^1", 1, 0),),)).expr(),
    }
    report = cross_term_vanishing(suspension, samples)

    assert report.passed
    assert len(report.values) == 2


def test_two_point_fgr_collapses():
    """Over the two-point space the FGR dga sees only the Laurent part: 7 and 7."""
    st = suspend_triple(make_two_point_triple(), 8, index_cap=3)
    report = fgr_dga_dims(st, 1, SuspendedBudget(0, 2, 3))

    assert report.dims() == [7, 7]
    assert report.finite_words_in_k
    assert report.laurent_words_excluded


@pytest.mark.slow
def test_circle_fgr_collapses(suspension):
    """Over the circle the FGR dimensions are 7, 7, 0, 0."""
    report = fgr_dga_dims(suspension, 3, SuspendedBudget(0, 2, 3))

    assert report.dims() == [7, 7, 0, 0]


def test_two_point_fgr_with_base_letters(two_point_suspension):
    """Base letters only add K members: budget (1, 2, 2) leaves 5 and 5."""
    report = fgr_dga_dims(two_point_suspension, 1, SuspendedBudget(1, 2, 2))

    assert report.dims() == [5, 5]
    assert report.degrees[0].k_dim > 0
    assert report.marginal_total == 0


@pytest.mark.slow
def test_circle_fgr_with_base_letters(suspension):
    """The circle base gives the same 5 and 5 as the two-point base."""
    report = fgr_dga_dims(suspension, 1, SuspendedBudget(1, 2, 2))

    assert report.dims() == [5, 5]
    assert report.finite_words_in_k
    assert report.laurent_words_excluded


def test_gram_is_hermitian_and_positive(two_point_suspension):
    """The seminorm Gram matrix is Hermitian and nonnegative on the word span."""
    st = two_point_suspension
    words = enumerate_words(st, 1, SuspendedBudget(1, 2, 2))
    g = degree_gram(st, words, make_schedule(st, t0=settings.fgr_t0))
    top = float(np.max(g.evals))
    coeffs = np.random.default_rng(3).standard_normal((5, len(words)))

    assert np.allclose(g.gram, g.gram.conj().T)
    assert g.evals[0] >= -10 * max(g.error, settings.rank_tol * top)
    assert all(g.seminorm(c) >= -10 * max(g.error, settings.rank_tol * top) for c in coeffs)


def test_heat_oint_of_squares_is_nonnegative(two_point_suspension):
    """oint w* w >= -error for finite and Laurent words."""
    for letter in (FIN_UNIT, ("lau", 1), ("lau", -2)):
        report = k_membership(two_point_suspension, FormWord(1.0, (letter,)).expr())
        assert report.limit.real >= -report.limit.error_estimate


def test_marginal_membership_is_refined(two_point_suspension):
    """A value between k_tol and ten times k_tol is refined twice and stays marginal."""
    omega = FormWord(1.0, (("lau", 1),)).expr()
    report = k_membership(two_point_suspension, omega, k_tol=0.5)

    assert report.marginal
    assert report.refinements == 2
    assert not report.member
    assert report.value == pytest.approx(1.0, rel=1e-2)


def test_refinement_keeps_clear_verdicts(two_point_suspension):
    """Halving t0 does not flip a non-marginal verdict."""
    st = two_point_suspension
    schedule = make_schedule(st)
    finer = refine_schedule(st, schedule)
    for letter, member in ((FIN_UNIT, True), (("lau", 1), False)):
        omega = FormWord(1.0, (letter,)).expr()
        coarse_report = k_membership(st, omega, schedule)
        fine_report = k_membership(st, omega, finer)
        assert coarse_report.member is member
        assert fine_report.member is member
    assert finer.t0 == schedule.t0 / 2


def test_junk_relations_lie_in_k(two_point_suspension):
    """pi-kernel combinations of 1-words, e.g. from 1 = p + q, have vanishing seminorm."""
    report = j0_subset_k(two_point_suspension, SuspendedBudget(1, 2, 2), 3, samples=4)

    assert report.checked == 4
    assert report.passed
    assert report.members == 4
    assert report.failures == []


@pytest.mark.slow
def test_k_is_a_two_sided_ideal(two_point_suspension):
    """Products of K^1 forms with 1-words on either side stay in K."""
    report = k_ideal_check(two_point_suspension, SuspendedBudget(1, 2, 2), samples=3)

    assert report.checked == 6
    assert report.passed


def test_compare_flags_degrees_where_only_dirac_varies():
    """Constant FGR rows with differing Dirac rows flag the differing degrees."""
    rows = [
        ("circle", dirac_report([7, 13, 0]), fgr_report([7, 7, 0])),
        ("two_point", dirac_report([2, 0, 0]), fgr_report([7, 7, 0])),
    ]
    report = compare_dgas(rows)

    assert report.fgr_constant
    assert report.dirac_varies
    assert report.flagged_degrees == [0, 1]
    assert report.verdict == "FGR constant across bases; Dirac distinguishes"


def test_compare_without_distinguishing_power():
    """Identical rows measure nothing."""
    rows = [
        ("a", dirac_report([7, 7]), fgr_report([7, 7])),
        ("b", dirac_report([7, 7]), fgr_report([7, 7])),
    ]

    assert compare_dgas(rows).verdict == "no distinguishing power measurable"


def test_compare_rejects_budget_mismatch():
    """Rows must share matrix-unit and Laurent caps."""
    rows = [
        ("a", dirac_report([7, 13], index_cap=3), fgr_report([7, 7])),
        ("b", dirac_report([2, 0], index_cap=2), fgr_report([7, 7])),
    ]
    with pytest.raises(BudgetError):
        compare_dgas(rows)
    with pytest.raises(BudgetError):
        compare_dgas([])


def test_seeded_runs_are_reproducible(suspension):
    """Equal seeds give equal factorization reports."""
    a = factorization_check(suspension, samples=5, seed=7)
    b = factorization_check(suspension, samples=5, seed=7)

    assert a.max_relative_deviation == b.max_relative_deviation
    assert np.isfinite(a.max_relative_deviation)
