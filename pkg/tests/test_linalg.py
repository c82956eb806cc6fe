"""Tests for span, rank and quotient computations."""

import numpy as np
import pytest

from app.services import linalg
from app.services.errors import ContainmentError, InhomogeneousSpanError
from app.utils.extrapolation import richardson_limit


@pytest.fixture
def matrix_units():
    """The four 2x2 matrix units."""
    units = []
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1.0
            units.append(e)
    return units


def test_rank_of_matrix_units(matrix_units):
    """Matrix units plus a dependent combination span a 4-dimensional space."""
    members = matrix_units + [matrix_units[0] + 2 * matrix_units[3]]
    span = linalg.OperatorSpan.of(0, members)
    report = linalg.span_rank(span)

    assert report.rank == 4
    assert len(report.singular_values) == 4
    assert report.marginal is False


def test_span_of_two_shifts():
    """z and z^2 truncated to five Fourier modes are independent."""
    span = linalg.OperatorSpan.of(5, [np.eye(5, k=1), np.eye(5, k=2)])
    report = linalg.span_rank(span)

    assert report.rank == 2
    assert np.allclose(span.rows @ span.rows.conj().T, np.diag([4.0, 3.0]))


def test_rank_never_drops_when_members_are_added(matrix_units):
    """Adding a member keeps or raises the rank."""
    members = [matrix_units[0], matrix_units[0] + matrix_units[1]]
    ranks = []
    for extra in (2 * matrix_units[0], matrix_units[2], matrix_units[3]):
        members.append(extra)
        ranks.append(linalg.span_rank(linalg.OperatorSpan.of(0, members)).rank)

    assert ranks == [2, 3, 4]


def test_rank_of_empty_rows():
    """An empty span has rank zero."""
    assert linalg.rank_of_rows(np.zeros((0, 3))).rank == 0


def test_inhomogeneous_span_raises(matrix_units):
    """Members of different shapes cannot share a span."""
    with pytest.raises(InhomogeneousSpanError):
        linalg.OperatorSpan.of(0, [matrix_units[0], np.eye(3)])


def test_spans_at_different_levels_do_not_compare(matrix_units):
    """Spans evaluated at different levels are rejected."""
    a = linalg.OperatorSpan.of(8, matrix_units)
    b = linalg.OperatorSpan.of(16, matrix_units)
    with pytest.raises(InhomogeneousSpanError):
        linalg.quotient_dim(a, b)


def test_quotient_dim(matrix_units):
    """Quotient of the full 2x2 algebra by the diagonal matrices is 2-dimensional."""
    big = linalg.OperatorSpan.of(0, matrix_units)
    small = linalg.OperatorSpan.of(0, [matrix_units[0], matrix_units[3]])

    assert linalg.quotient_dim(big, small) == 2


def test_quotient_requires_containment(matrix_units):
    """A small span outside the big one raises ContainmentError."""
    big = linalg.OperatorSpan.of(0, [matrix_units[0]])
    small = linalg.OperatorSpan.of(0, [matrix_units[1]])
    with pytest.raises(ContainmentError):
        linalg.quotient_dim(big, small)


def test_nullspace_coeffs_annihilate(matrix_units):
    """Kernel coefficients combine the members to zero."""
    members = matrix_units + [matrix_units[0] - matrix_units[3]]
    kernel = linalg.nullspace_coeffs(members)
    rows, _ = linalg.stack_members(members)

    assert kernel.shape == (1, 5)
    assert np.allclose(kernel @ rows, 0.0)


def test_span_intersection():
    """Two planes in C^3 meet in a line."""
    a = np.array([[1, 0, 0], [0, 1, 0]], dtype=complex)
    b = np.array([[0, 1, 0], [0, 0, 1]], dtype=complex)
    basis = linalg.span_intersection(a, b)

    assert basis.shape[0] == 1
    assert np.isclose(abs(basis[0, 1]), 1.0)


def test_image_of_kernel():
    """T(ker Z) for Z projecting on the first coordinate and T the identity is the rest."""
    t_map = np.eye(3, dtype=complex)
    z_map = np.array([[1, 0, 0]], dtype=complex)
    image = linalg.image_of_kernel(t_map, z_map)

    assert image.shape[0] == 2
    assert np.allclose(image[:, 0], 0.0)


def test_richardson_removes_linear_and_quadratic_terms():
    """Samples of 2 + 3t + 5t^2 extrapolate to 2 at order 2."""
    t = 0.5 / 2.0 ** np.arange(6)
    values = 2 + 3 * t + 5 * t**2
    value, error, diffs = richardson_limit(list(values), ratio=2.0, order=2)

    assert abs(float(value) - 2.0) < 1e-12
    assert error < 1e-12
    assert len(diffs) == 3


def test_richardson_needs_enough_nodes():
    """Fewer than order + 2 samples are rejected."""
    with pytest.raises(ValueError):
        richardson_limit([1.0, 2.0, 3.0], ratio=2.0, order=2)
