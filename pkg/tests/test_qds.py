"""Tests for the suspended algebra, Toeplitz calculus and realized suspensions."""

import numpy as np
import pytest
from scipy import sparse

from app.services.errors import BudgetError, ResourceGuardError
from app.services.qds import (
    SIGN,
    FinMatrix,
    LaurentPoly,
    TensorOp,
    ToeplitzElement,
    dirac_commutator,
    iterate_suspension,
    join_keys,
    key_adjoint,
    letter_name,
    matrix_unit,
    rho_symbol,
    sigma_prime,
    suspend_algebra,
    suspend_triple,
)
from app.services.triple import (
    geometric_schedule,
    make_circle_triple,
    summability_estimate,
    toeplitz_shift,
)


@pytest.fixture
def circle():
    """Small circle triple."""
    return make_circle_triple(8, 2)


@pytest.fixture
def suspension(circle):
    """Sigma^2 of the small circle with inner cutoff 6 and matrix-unit cap 2."""
    return suspend_triple(circle, 6, index_cap=2)


def test_laurent_arithmetic():
    """Products, adjoints and [N, .] of Laurent polynomials."""
    z = LaurentPoly.monomial(1)
    f = (z + LaurentPoly.monomial(0, 2.0)) * LaurentPoly.monomial(-1)

    assert f.coeffs == {0: 1.0, -1: 2.0}
    assert LaurentPoly.monomial(2, 1j).star().coeffs == {-2: -1j}
    assert z.derivative().coeffs == {1: -1.0}
    assert (z - z).is_zero()


def test_finite_matrix_products():
    """Matrix units multiply as e_ij e_jk = e_ik; [N, e_ij] = (i - j) e_ij."""
    e01 = FinMatrix.unit(0, 1)
    e12 = FinMatrix.unit(1, 2)

    assert (e01 * e12).entries == {(0, 2): 1.0}
    assert (e12 * e01).is_zero()
    assert e12.adjoint().entries == {(2, 1): 1.0}
    assert FinMatrix.unit(3, 1).number_commutator().entries == {(3, 1): 2.0}


def test_toeplitz_product_splits_off_finite_part():
    """sigma'(z^-1) sigma'(z) = 1 - e_00, while sigma'(z) sigma'(z^-1) = 1."""
    z = sigma_prime(LaurentPoly.monomial(1))
    zs = sigma_prime(LaurentPoly.monomial(-1))
    left = zs * z
    right = z * zs

    assert left.laurent.coeffs == {0: 1.0}
    assert left.finite.entries == {(0, 0): -1.0}
    assert right.laurent.coeffs == {0: 1.0}
    assert right.finite.is_zero()


def test_toeplitz_product_matches_dense():
    """The symbolic product agrees with a large compression away from the cut."""
    x = sigma_prime(LaurentPoly({2: 1.0, -1: 0.5})) + matrix_unit(1, 0, 3.0)
    y = sigma_prime(LaurentPoly({-2: 1.0, 1: 2.0})) + matrix_unit(0, 2)
    size = 40
    dense = x.dense(size) @ y.dense(size)

    assert np.allclose((x * y).dense(size)[:30, :30], dense[:30, :30])


def test_toeplitz_heat_trace_closed_form():
    """Tr(T e^{-tN}) matches a long truncated sum."""
    t = 0.5
    element = sigma_prime(LaurentPoly({0: 2.0, 1: 1.0})) + matrix_unit(2, 2, 3.0)
    n = np.arange(200)
    truncated = np.sum(np.diag(element.dense(200)) * np.exp(-t * n))

    assert element.heat_trace(t) == pytest.approx(truncated, rel=1e-12)


def test_join_keys_cancels_sign_squares():
    """F F = I inside operator keys."""
    key = join_keys((("a", "z^1"), SIGN), (SIGN, ("d", "z^1")))

    assert key == (("a", "z^1"), ("d", "z^1"))


def test_key_adjoint_of_commutator():
    """[D, a]* = -[D, a*]."""
    sign, key = key_adjoint((("d", "z^1"),), {"z^1": "z^-1"})

    assert sign == -1.0
    assert key == (("d", "z^-1"),)


def test_dirac_commutator_of_laurent_generator(suspension):
    """[Sigma^2 D, 1 x sigma'(z)] = F x [N, sigma'(z)], exactly at every truncation."""
    op = TensorOp.single((), sigma_prime(LaurentPoly.monomial(1)))
    comm = dirac_commutator(op)
    base = suspension.base
    level = (8, 6)
    realized = suspension.model.commutator("Z", level).toarray()
    expected = sparse.kron(base.sign(8), -toeplitz_shift(6, 1)).toarray()

    assert list(comm.terms) == [(SIGN,)]
    assert comm.terms[(SIGN,)].laurent.coeffs == {1: -1.0}
    assert np.allclose(realized, expected)


def test_suspend_triple_generators(circle, suspension):
    """Generators a x e_ij, the unit and Z, Z*; p goes up by one."""
    model = suspension.model

    assert suspension.p == circle.p + 1
    assert len(model.generators) == 1 + len(circle.symbols()) * 4 + 2
    assert letter_name(("fin", "z^1", 0, 1)) in model.generators
    assert model.adjoint_symbol("Z") == "Z*"
    assert model.dim((8, 6)) == 17 * 6


def test_suspend_triple_rejects_bad_cutoffs(circle):
    """Inner cutoff below 4 or a matrix-unit cap above half of it are budget errors."""
    with pytest.raises(BudgetError):
        suspend_triple(circle, 3)
    with pytest.raises(BudgetError):
        suspend_triple(circle, 6, index_cap=4)


def test_suspend_triple_resource_guard(circle):
    """The ambient dimension cap is enforced."""
    with pytest.raises(ResourceGuardError):
        suspend_triple(circle, 8, index_cap=2, max_dim=50)


def test_iterated_suspension(circle):
    """Two suspensions raise p by two and nest the mode space."""
    twice = iterate_suspension(circle, 2, [4, 4], [2, 2])

    assert twice.p == circle.p + 2
    assert twice.model.space.kind == "product"
    assert twice.base.space.kind == "product"


def test_suspensions_raise_summability(circle):
    """Sigma^2 and Sigma^4 of the circle are 2- and 3-summable."""
    schedule = geometric_schedule(0.1, 2.0, 8)
    once = summability_estimate(suspend_triple(circle, 6, index_cap=2).model, schedule)
    twice = summability_estimate(iterate_suspension(circle, 2, [4, 4], [2, 2]).model, schedule)

    assert once.p_hat == pytest.approx(2.0, abs=0.1)
    assert twice.p_hat == pytest.approx(3.0, abs=0.1)


def test_symbol_map_kills_finite_part(suspension):
    """u = 1 - Z* Z is the matrix unit e_00 and has zero symbol."""
    u = suspension.algebra.element("u")

    assert rho_symbol(u).is_zero()
    assert u.finite_part == (((), FinMatrix.unit(0, 0)),)


def test_tensor_identity_is_multiplicative_unit():
    """I * X = X for tensor operators."""
    x = TensorOp.single((("a", "z^1"),), matrix_unit(0, 1)) + TensorOp.single(
        (), sigma_prime(LaurentPoly.monomial(-2))
    )

    assert (TensorOp.identity() * x).terms == x.terms
    assert ToeplitzElement.identity().heat_trace(1.0) == pytest.approx(1 / (1 - np.exp(-1.0)))


def test_suspend_algebra_generators():
    """a x e_ij for every base generator and i, j below the cap."""
    algebra = suspend_algebra(["1", "z^1"], 8, index_cap=2)

    assert algebra.index_cap == 2
    assert len(algebra.finite_letters()) == 2 * 4
    with pytest.raises(BudgetError):
        suspend_algebra(["z^1"], 8)
    with pytest.raises(BudgetError):
        suspend_algebra([], 8)
