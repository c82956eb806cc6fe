"""Span, rank, quotient and kernel computations on vectorized operators.

Every dimension the workbench reports is decided here by SVD with a relative
cutoff: a singular value counts when it exceeds tol * max(s_max, 1).
"""

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from app.config import settings
from app.models.reports import RankReport
from app.services.errors import ContainmentError, InhomogeneousSpanError

CMatrix = np.ndarray


def stack_members(members: Sequence[np.ndarray]) -> tuple[np.ndarray, tuple[int, ...]]:
    """Vectorize same-shape matrices into the rows of one complex array."""
    if not members:
        raise InhomogeneousSpanError("empty span", module="core-linalg", stage="stack")
    shape = np.shape(members[0])
    for m in members:
        if np.shape(m) != shape:
            raise InhomogeneousSpanError(
                f"inhomogeneous span: {np.shape(m)} != {shape}", module="core-linalg", stage="stack"
            )
    rows = np.asarray([np.ravel(m) for m in members], dtype=complex)
    return rows, tuple(shape)


@dataclass(frozen=True)
class OperatorSpan:
    """Evaluated operators at one truncation level, stored as vectorized rows."""

    level: Any
    rows: np.ndarray
    shape: tuple[int, ...]
    tol: float = settings.rank_tol

    @classmethod
    def of(cls, level: Any, members: Sequence[np.ndarray], tol: float | None = None) -> "OperatorSpan":
        rows, shape = stack_members(members)
        return cls(level=level, rows=rows, shape=shape, tol=settings.rank_tol if tol is None else tol)

    @classmethod
    def from_rows(
        cls, level: Any, rows: np.ndarray, shape: tuple[int, ...] | None = None, tol: float | None = None
    ) -> "OperatorSpan":
        rows = np.atleast_2d(np.asarray(rows, dtype=complex))
        return cls(
            level=level,
            rows=rows,
            shape=shape if shape is not None else (rows.shape[1],),
            tol=settings.rank_tol if tol is None else tol,
        )

    @property
    def size(self) -> int:
        return self.rows.shape[0]

    def members(self) -> list[np.ndarray]:
        return [r.reshape(self.shape) for r in self.rows]

    def union(self, other: "OperatorSpan") -> "OperatorSpan":
        _check_compatible(self, other)
        return OperatorSpan(self.level, np.vstack([self.rows, other.rows]), self.shape, self.tol)


def _check_compatible(a: OperatorSpan, b: OperatorSpan) -> None:
    if a.shape != b.shape or a.rows.shape[1] != b.rows.shape[1]:
        raise InhomogeneousSpanError(
            f"inhomogeneous span: {a.shape} vs {b.shape}", module="core-linalg", stage="compare"
        )
    if a.level != b.level:
        raise InhomogeneousSpanError(
            f"spans evaluated at different levels: {a.level} vs {b.level}",
            module="core-linalg",
            stage="compare",
        )


def _is_marginal(values: np.ndarray, threshold: float) -> bool:
    f = settings.marginal_factor
    return bool(np.any((values > threshold / f) & (values < threshold * f)))


def rank_of_rows(rows: np.ndarray, tol: float | None = None) -> RankReport:
    """Numerical rank of the row space of a 2D array."""
    tol = settings.rank_tol if tol is None else tol
    rows = np.asarray(rows)
    if rows.size == 0:
        return RankReport(rank=0, singular_values=[], cutoff_used=tol, scale=1.0)
    s = np.linalg.svd(rows, compute_uv=False)
    scale = max(float(s[0]) if s.size else 0.0, 1.0)
    threshold = tol * scale
    return RankReport(
        rank=int(np.sum(s > threshold)),
        singular_values=[float(v) for v in s],
        cutoff_used=tol,
        scale=scale,
        marginal=_is_marginal(s, threshold),
    )


def span_rank(span: OperatorSpan) -> RankReport:
    """Numerical rank of a span's members viewed as vectors."""
    return rank_of_rows(span.rows, span.tol)


def orthonormal_rows(rows: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis (as rows) of the row space."""
    tol = settings.rank_tol if tol is None else tol
    rows = np.asarray(rows, dtype=complex)
    if rows.size == 0:
        return np.zeros((0, rows.shape[-1] if rows.ndim == 2 else 0), dtype=complex)
    _, s, vh = np.linalg.svd(rows, full_matrices=False)
    scale = max(float(s[0]) if s.size else 0.0, 1.0)
    return vh[: int(np.sum(s > tol * scale))]


def residual_norms(rows: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Norm of each row after removing its component in span(basis rows); basis orthonormal."""
    rows = np.asarray(rows, dtype=complex)
    if basis.shape[0] == 0:
        return np.linalg.norm(rows, axis=1)
    coeffs = rows @ basis.conj().T
    return np.linalg.norm(rows - coeffs @ basis, axis=1)


def check_containment(big: OperatorSpan, small: OperatorSpan) -> float:
    """Largest relative residual of small's members outside span(big); raises beyond tolerance."""
    _check_compatible(big, small)
    if small.size == 0:
        return 0.0
    report = span_rank(big)
    basis = orthonormal_rows(big.rows, big.tol)
    residual = float(np.max(residual_norms(small.rows, basis), initial=0.0))
    allowed = settings.containment_factor * big.tol * report.scale
    if residual > allowed:
        raise ContainmentError(
            f"small not contained in big (residual {residual:.3e} > {allowed:.3e})",
            module="core-linalg",
            stage="quotient",
        )
    return residual / report.scale


def quotient_dim(big: OperatorSpan, small: OperatorSpan) -> int:
    """dim span(big) / span(small), after checking that small lies in big."""
    check_containment(big, small)
    return span_rank(big.union(small)).rank - span_rank(small).rank


def nullspace_coeffs(members: Sequence[np.ndarray] | np.ndarray, tol: float | None = None) -> np.ndarray:
    """
    Orthonormal coefficient vectors c with sum_i c_i members[i] = 0 up to tol.

    Args:
        members: Same-shape matrices, or a 2D array whose rows are vectorized members.
        tol: Relative singular-value cutoff.

    Returns:
        Array of shape (k, len(members)); each row is one kernel vector.
    """
    tol = settings.rank_tol if tol is None else tol
    if isinstance(members, np.ndarray) and members.ndim == 2:
        rows = members.astype(complex)
    else:
        rows, _ = stack_members(list(members))
    n = rows.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    u, s, _ = np.linalg.svd(rows, full_matrices=True)
    scale = max(float(s[0]) if s.size else 0.0, 1.0)
    rank = int(np.sum(s > tol * scale))
    return u[:, rank:].conj().T


def span_intersection(a: np.ndarray, b: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis (rows) of rowspace(a) intersected with rowspace(b)."""
    tol = settings.rank_tol if tol is None else tol
    qa = orthonormal_rows(a, tol)
    qb = orthonormal_rows(b, tol)
    if qa.shape[0] == 0 or qb.shape[0] == 0:
        return np.zeros((0, np.shape(a)[1]), dtype=complex)
    # x = alpha qa = beta qb  <=>  [alpha, -beta] in the left kernel of [qa; qb]
    kernel = nullspace_coeffs(np.vstack([qa, qb]), tol)
    if kernel.shape[0] == 0:
        return np.zeros((0, qa.shape[1]), dtype=complex)
    return orthonormal_rows(kernel[:, : qa.shape[0]] @ qa, tol)



def image_of_kernel(t_map: np.ndarray, z_map: np.ndarray, tol: float | None = None) -> np.ndarray:
    """
    Orthonormal basis (rows) of T(ker Z) for linear maps T, Z on the same column space.

    Works without forming a basis of ker Z, which may be large.
    """
    tol = settings.rank_tol if tol is None else tol
    t_map = np.asarray(t_map, dtype=complex)
    if t_map.size == 0:
        return np.zeros((0, t_map.shape[0]), dtype=complex)
    z_rows = orthonormal_rows(np.asarray(z_map, dtype=complex), tol)
    restricted = t_map - (t_map @ z_rows.conj().T) @ z_rows if z_rows.shape[0] else t_map
    return orthonormal_rows(restricted.T, tol)
