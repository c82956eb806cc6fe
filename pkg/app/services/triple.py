"""Spectral triples as coherent families of truncated operators.

A level is the truncation parameter of a mode space: a Fourier cutoff M keeps the
circle modes -M..M, a level K keeps e_0..e_{K-1} of l^2(N), a finite space ignores
its level, and a product space takes one level per factor.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from functools import lru_cache, partial
from typing import Any

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from app.config import settings
from app.models.reports import DecayReport, MorphismReport, SummabilityReport
from app.services.errors import BudgetError, InsufficientTruncationError, SpectralDgaError
from app.utils.logger import logger

Level = int | tuple
CMatrix = np.ndarray


@dataclass(frozen=True)
class ModeSpace:
    """Index set of a truncated Hilbert space basis."""

    kind: str  # "integers", "naturals", "finite" or "product"
    size: int = 0
    factors: tuple["ModeSpace", ...] = ()

    def dim(self, level: Level) -> int:
        if self.kind == "integers":
            return 2 * int(level) + 1
        if self.kind == "naturals":
            return int(level)
        if self.kind == "finite":
            return self.size
        return int(np.prod([f.dim(lv) for f, lv in zip(self.factors, level, strict=True)]))

    def labels(self, level: Level) -> np.ndarray:
        if self.kind == "integers":
            return np.arange(-int(level), int(level) + 1)
        if self.kind in ("naturals", "finite"):
            return np.arange(self.dim(level))
        raise SpectralDgaError("product spaces have no scalar labels", module="triple")

    @property
    def is_finite(self) -> bool:
        if self.kind == "product":
            return all(f.is_finite for f in self.factors)
        return self.kind == "finite"

    def interior(self, level: Level, margin: int) -> np.ndarray:
        """Indices at distance > margin from the truncation edge."""
        if self.kind == "integers":
            labels = self.labels(level)
            idx = np.flatnonzero(np.abs(labels) <= int(level) - margin)
        elif self.kind == "naturals":
            idx = np.arange(max(int(level) - margin, 0))
        elif self.kind == "finite":
            idx = np.arange(self.size)
        else:
            parts = [f.interior(lv, margin) for f, lv in zip(self.factors, level, strict=True)]
            return self._product_indices(level, parts)
        if idx.size == 0:
            raise BudgetError(
                f"degree budget exceeds truncation: margin {margin} leaves no interior at level {level}",
                module="triple",
                stage="interior",
            )
        return idx

    def calkin_window(self, level: Level, margin: int) -> np.ndarray:
        """
        Interior indices that also stay away from the sign flip of the Dirac operator.

        Finite-rank corrections supported near the flip or near the edge vanish on these
        rows, which is how forms are read modulo compact operators.
        """
        if self.kind == "integers":
            labels = self.labels(level)
            top = int(level) - margin
            keep = ((labels >= margin) & (labels <= top)) | ((labels <= -margin - 1) & (labels >= -top))
            idx = np.flatnonzero(keep)
            if idx.size == 0:
                raise BudgetError(
                    f"degree budget exceeds truncation: empty window at level {level}",
                    module="triple",
                    stage="calkin-window",
                )
            return idx
        if self.kind == "product":
            first, *rest = self.factors
            parts = [first.calkin_window(level[0], margin)]
            parts += [f.interior(lv, margin) for f, lv in zip(rest, level[1:], strict=True)]
            return self._product_indices(level, parts)
        return self.interior(level, margin)

    def embedding(self, small: Level, big: Level) -> np.ndarray:
        """Indices of the level-`small` basis inside the level-`big` basis."""
        if self.kind == "integers":
            return np.arange(self.dim(small)) + (int(big) - int(small))
        if self.kind in ("naturals", "finite"):
            return np.arange(self.dim(small))
        parts = [f.embedding(s, b) for f, s, b in zip(self.factors, small, big, strict=True)]
        return self._product_indices(big, parts)

    def _product_indices(self, level: Level, parts: list[np.ndarray]) -> np.ndarray:
        idx = np.zeros(1, dtype=int)
        for f, lv, part in zip(self.factors, level, parts, strict=True):
            idx = np.add.outer(idx * f.dim(lv), part).ravel()
        return idx


@dataclass(frozen=True)
class TruncationFamily:
    """One operator of a triple, given coherently at every truncation level."""

    symbol: str
    rule: Callable[[Level], Any]
    bandwidth: int | None = 0  # None when unknown
    weight: int = 0
    adjoint: str | None = None

    def sparse(self, level: Level) -> sparse.csr_matrix:
        return _evaluate(self, level)

    def at(self, level: Level) -> CMatrix:
        return self.sparse(level).toarray()


@lru_cache(maxsize=4096)
def _evaluate(family: TruncationFamily, level: Level) -> sparse.csr_matrix:
    return sparse.csr_matrix(family.rule(level), dtype=complex)


@dataclass(frozen=True)
class HeatFactor:
    """One tensor factor of |D| for factorized heat traces."""

    space: ModeSpace
    abs_diagonal: Callable[[Level], np.ndarray]
    sign_diagonal: Callable[[Level], np.ndarray] | None
    min_level: Level


@dataclass(frozen=True)
class SpectralTripleModel:
    """Algebra generator families, a diagonal Dirac family and a summability exponent."""

    name: str
    space: ModeSpace
    generators: dict[str, TruncationFamily]
    dirac: TruncationFamily
    p: float
    min_level: Level
    heat_factors: tuple[HeatFactor, ...]
    grading: TruncationFamily | None = None
    sign_zero_convention: int = 1
    unit: str = "1"
    notes: dict[str, str] = field(default_factory=dict)

    def __hash__(self) -> int:
        return id(self)

    def __eq__(self, other: object) -> bool:
        return self is other

    # Algebra side

    def symbols(self, max_weight: int | None = None) -> list[str]:
        """Generator symbols in declaration order, optionally capped by weight."""
        return [
            s
            for s, g in self.generators.items()
            if max_weight is None or g.weight <= max_weight
        ]

    def generator(self, symbol: str) -> TruncationFamily:
        try:
            return self.generators[symbol]
        except KeyError:
            raise BudgetError(f"unknown generator symbol '{symbol}'", module="triple") from None

    def adjoint_symbol(self, symbol: str) -> str:
        adj = self.generator(symbol).adjoint
        return symbol if adj is None else adj

    def operator(self, symbol: str, level: Level) -> sparse.csr_matrix:
        return self.generator(symbol).sparse(level)

    def product(self, letters: Sequence[str], level: Level) -> sparse.csr_matrix:
        out = self.identity(level)
        for s in letters:
            if s != self.unit:
                out = out @ self.operator(s, level)
        return sparse.csr_matrix(out)

    def letter_bandwidth(self, letters: Sequence[str]) -> int | None:
        total = 0
        for s in letters:
            bw = self.generator(s).bandwidth
            if bw is None:
                return None
            total += bw
        return total

    # Dirac side

    def dim(self, level: Level) -> int:
        return self.space.dim(level)

    def identity(self, level: Level) -> sparse.csr_matrix:
        return sparse.identity(self.dim(level), dtype=complex, format="csr")

    def dirac_diagonal(self, level: Level) -> np.ndarray:
        return np.real(self.dirac.sparse(level).diagonal())

    def sign_diagonal(self, level: Level) -> np.ndarray:
        d = self.dirac_diagonal(level)
        return np.where(d > 0, 1.0, np.where(d < 0, -1.0, float(self.sign_zero_convention)))

    def abs_diagonal(self, level: Level) -> np.ndarray:
        return np.abs(self.dirac_diagonal(level))

    def sign(self, level: Level) -> sparse.csr_matrix:
        return sparse.diags(self.sign_diagonal(level).astype(complex), format="csr")

    def commutator(self, letters: str | Sequence[str], level: Level) -> sparse.csr_matrix:
        """[D, a] for a generator symbol or a product of generator symbols."""
        x = self.operator(letters, level) if isinstance(letters, str) else self.product(letters, level)
        d = sparse.diags(self.dirac_diagonal(level).astype(complex), format="csr")
        return sparse.csr_matrix(d @ x - x @ d)

    def interior(self, level: Level, margin: int) -> np.ndarray:
        return self.space.interior(level, margin)

    def calkin_window(self, level: Level, margin: int) -> np.ndarray:
        return self.space.calkin_window(level, margin)

    def validate(self, level: Level) -> None:
        """Check the structural invariants at one level; raises on violation."""
        dmat = self.dirac.sparse(level)
        off = dmat - sparse.diags(dmat.diagonal())
        if off.count_nonzero() or np.any(np.abs(np.imag(dmat.diagonal())) > 0):
            raise SpectralDgaError("dirac rule is not real diagonal", module="triple", stage="validate")
        f = self.sign_diagonal(level)
        if not np.array_equal(f * f, np.ones_like(f)):
            raise SpectralDgaError("sign operator does not square to I", module="triple", stage="validate")
        if self.grading is not None:
            gamma = self.grading.sparse(level)
            dm = sparse.diags(self.dirac_diagonal(level))
            ident = self.identity(level)
            if (gamma @ gamma - ident).count_nonzero():
                raise SpectralDgaError("grading does not square to I", module="triple", stage="validate")
            if (gamma @ dm + dm @ gamma).count_nonzero():
                raise SpectralDgaError("grading does not anticommute with D", module="triple", stage="validate")
            for s in self.generators:
                a = self.operator(s, level)
                if (gamma @ a - a @ gamma).count_nonzero():
                    raise SpectralDgaError(
                        f"grading does not commute with '{s}'", module="triple", stage="validate"
                    )


def sign_of(triple: SpectralTripleModel, level: Level) -> CMatrix:
    """F = sign(D) at a level, with sign(0) given by the triple's convention."""
    return np.diag(triple.sign_diagonal(level).astype(complex))


# Built-in triples


def _shift(level: int, k: int) -> sparse.spmatrix:
    # z^k e_n = e_{n+k} on the modes -level..level
    return sparse.eye(2 * level + 1, k=-k, dtype=complex, format="csr")


def _fourier_diagonal(level: int) -> sparse.spmatrix:
    return sparse.diags(np.arange(-level, level + 1).astype(complex), format="csr")


def _circle_abs(level: int) -> np.ndarray:
    return np.abs(np.arange(-level, level + 1, dtype=float))


def _circle_sign(level: int) -> np.ndarray:
    n = np.arange(-level, level + 1)
    return np.where(n >= 0, 1.0, -1.0)


def circle_symbol(k: int) -> str:
    return "1" if k == 0 else f"z^{k}"


def make_circle_triple(fourier_cutoff: int, degree_cap: int) -> SpectralTripleModel:
    """
    Truncated (C^inf(S^1), L^2(S^1), -i d/dtheta).

    Generators are multiplication by z^k for |k| <= degree_cap; D = diag(n) on the
    Fourier modes -fourier_cutoff..fourier_cutoff; p = 1.
    """
    if fourier_cutoff < 1 or degree_cap < 1:
        raise BudgetError("cutoff and degree cap must be positive", module="triple", stage="circle")
    if 4 * degree_cap > fourier_cutoff:
        raise BudgetError(
            f"degree budget exceeds truncation: cap {degree_cap} > cutoff {fourier_cutoff}/4",
            module="triple",
            stage="circle",
        )
    order = [0] + [k for m in range(1, degree_cap + 1) for k in (m, -m)]
    generators = {
        circle_symbol(k): TruncationFamily(
            symbol=circle_symbol(k),
            rule=partial(_shift, k=k),
            bandwidth=abs(k),
            weight=abs(k),
            adjoint=circle_symbol(-k),
        )
        for k in order
    }
    space = ModeSpace("integers")
    return SpectralTripleModel(
        name="circle",
        space=space,
        generators=generators,
        dirac=TruncationFamily("D", _fourier_diagonal),
        p=1.0,
        min_level=fourier_cutoff,
        heat_factors=(HeatFactor(space, _circle_abs, _circle_sign, fourier_cutoff),),
    )


def _two_point_rule(level: Level, entries: tuple[float, float]) -> sparse.spmatrix:
    return sparse.diags(np.asarray(entries, dtype=complex), format="csr")


def make_two_point_triple() -> SpectralTripleModel:
    """C^2 acting diagonally on C^2 with D = diag(-1, 1); p = 0 (finite spectrum)."""
    space = ModeSpace("finite", size=2)
    generators = {
        "1": TruncationFamily("1", partial(_two_point_rule, entries=(1.0, 1.0)), 0, 0, "1"),
        "p": TruncationFamily("p", partial(_two_point_rule, entries=(1.0, 0.0)), 0, 1, "p"),
        "q": TruncationFamily("q", partial(_two_point_rule, entries=(0.0, 1.0)), 0, 1, "q"),
    }
    dirac = TruncationFamily("D", partial(_two_point_rule, entries=(-1.0, 1.0)))
    return SpectralTripleModel(
        name="two_point",
        space=space,
        generators=generators,
        dirac=dirac,
        p=0.0,
        min_level=1,
        heat_factors=(
            HeatFactor(space, lambda level: np.ones(2), lambda level: np.array([-1.0, 1.0]), 1),
        ),
    )


def toeplitz_shift(level: int, k: int) -> sparse.spmatrix:
    """sigma'(z^k) on e_0..e_{level-1}: l^k for k > 0, (l*)^|k| for k < 0."""
    return sparse.eye(int(level), k=k, dtype=complex, format="csr")


def number_diagonal(level: Level) -> np.ndarray:
    return np.arange(int(level), dtype=float)


def _number_operator(level: int) -> sparse.spmatrix:
    return sparse.diags(number_diagonal(level).astype(complex), format="csr")


def laurent_symbol(k: int) -> str:
    return "1" if k == 0 else f"l^{k}"


def make_laurent_triple(cutoff: int, degree_cap: int) -> SpectralTripleModel:
    """C[z, z^-1] acting on l^2(N) through sigma', with D = N and p = 1."""
    if 4 * degree_cap > cutoff:
        raise BudgetError(
            f"degree budget exceeds truncation: cap {degree_cap} > cutoff {cutoff}/4",
            module="triple",
            stage="laurent",
        )
    order = [0] + [k for m in range(1, degree_cap + 1) for k in (m, -m)]
    generators = {
        laurent_symbol(k): TruncationFamily(
            symbol=laurent_symbol(k),
            rule=partial(toeplitz_shift, k=k),
            bandwidth=abs(k),
            weight=abs(k),
            adjoint=laurent_symbol(-k),
        )
        for k in order
    }
    space = ModeSpace("naturals")
    return SpectralTripleModel(
        name="laurent",
        space=space,
        generators=generators,
        dirac=TruncationFamily("N", _number_operator),
        p=1.0,
        min_level=cutoff,
        heat_factors=(HeatFactor(space, number_diagonal, None, cutoff),),
    )


# Heat traces and summability


def _grow(level: int) -> int:
    return max(2 * int(level), int(level) + 1)


def _bind_factor(factor: HeatFactor, t: float, squared: bool) -> tuple[Level, float]:
    """Smallest doubled level whose tail passes the criterion, with the truncated trace."""
    level = factor.min_level
    while True:
        lam = factor.abs_diagonal(level)
        lam = lam**2 if squared else lam
        weights = np.exp(-t * lam)
        trace = float(np.sum(weights))
        if factor.space.is_finite:
            return level, trace
        tail = float(np.exp(-t * np.max(lam))) * factor.space.dim(level)
        if tail < settings.tail_tol * trace:
            return level, trace
        nxt = _grow(level)
        if nxt > settings.max_heat_level:
            raise InsufficientTruncationError(
                f"insufficient truncation for schedule: t={t:.3e} needs a level above "
                f"{settings.max_heat_level}",
                module="triple",
                stage="bind-level",
            )
        level = nxt


def bind_level(triple: SpectralTripleModel, t: float, squared: bool = False) -> Level:
    """
    Truncation level at which e^{-t|D|} (or e^{-tD^2}) has a certified negligible tail.

    The tail bound e^{-t lambda_max} * dim must stay below tail_tol times the trace.
    Multi-factor triples bind each factor separately and return a tuple.
    """
    levels = tuple(_bind_factor(f, t, squared)[0] for f in triple.heat_factors)
    return levels[0] if len(levels) == 1 else levels


def factor_levels(triple: SpectralTripleModel, level: Level) -> tuple:
    return (level,) if len(triple.heat_factors) == 1 else tuple(level)


def heat_trace(
    triple: SpectralTripleModel,
    t: float,
    squared: bool = False,
    with_sign: bool = False,
    level: Level | None = None,
) -> float:
    """Tr(F^s e^{-t|D|}) (or with D^2) as a product over heat factors."""
    level = bind_level(triple, t, squared) if level is None else level
    total = 1.0
    for factor, lv in zip(triple.heat_factors, factor_levels(triple, level), strict=True):
        lam = factor.abs_diagonal(lv)
        weights = np.exp(-t * (lam**2 if squared else lam))
        if with_sign and factor.sign_diagonal is not None:
            weights = weights * factor.sign_diagonal(lv)
        total *= float(np.sum(weights))
    return total


def summability_estimate(triple: SpectralTripleModel, schedule: Sequence[float]) -> SummabilityReport:
    """Fit log Tr e^{-t|D|} = -p log t + c by least squares over a decreasing schedule."""
    t_values = [float(t) for t in schedule]
    if len(t_values) < 2 or any(b >= a for a, b in zip(t_values, t_values[1:], strict=False)):
        raise InsufficientTruncationError(
            "schedule must hold at least two strictly decreasing t values",
            module="triple",
            stage="summability",
        )
    levels = [bind_level(triple, t) for t in t_values]
    traces = [heat_trace(triple, t, level=lv) for t, lv in zip(t_values, levels, strict=True)]
    design = np.column_stack([-np.log(t_values), np.ones(len(t_values))])
    coef, *_ = np.linalg.lstsq(design, np.log(traces), rcond=None)
    fitted = design @ coef
    residual = float(np.linalg.norm(np.log(traces) - fitted))
    logger.info(f"Summability of {triple.name}: p_hat={coef[0]:.4f} (residual {residual:.2e})")
    if residual > settings.summability_residual_tol:
        logger.warning(
            f"Summability fit of {triple.name} is poor: residual {residual:.3g} > "
            f"{settings.summability_residual_tol}; p_hat {coef[0]:.4f} is unreliable"
        )
    return SummabilityReport(
        p_hat=float(coef[0]),
        intercept=float(coef[1]),
        residual=residual,
        t_values=t_values,
        traces=traces,
        levels=[list(lv) if isinstance(lv, tuple) else lv for lv in levels],
    )


def geometric_schedule(t0: float, ratio: float, nodes: int) -> list[float]:
    return [t0 / ratio**k for k in range(nodes)]


# Condition (A) surrogate


def condition_A_check(
    triple: SpectralTripleModel, generator_symbol: str, levels: Sequence[Level]
) -> DecayReport:
    """
    Cross-level decay of X_L = [D,a]F - F[D,a].

    The rank r is read at the smallest level; the report passes when the distance of X_L
    to its best rank-r approximation is negligible at every level or strictly decreases.
    """
    if len(levels) < 3:
        raise BudgetError("condition (A) check needs at least three levels", module="triple")
    tails: list[float] = []
    leading: list[list[float]] = []
    rank_r = 0
    scale = 1.0
    for i, level in enumerate(levels):
        comm = triple.commutator(generator_symbol, level)
        f = triple.sign(level)
        x = (comm @ f - f @ comm).toarray()
        s = np.linalg.svd(x, compute_uv=False) if x.size else np.zeros(0)
        if i == 0:
            scale = max(float(s[0]) if s.size else 0.0, 1.0)
            rank_r = int(np.sum(s > settings.rank_tol * scale))
        tails.append(float(np.sqrt(np.sum(s[rank_r:] ** 2))))
        leading.append([float(v) for v in s[: rank_r + 3]])
    small = settings.containment_factor * settings.rank_tol * scale
    negligible = all(t <= small for t in tails)
    decreasing = all(b < a for a, b in zip(tails, tails[1:], strict=False))
    passed = negligible or decreasing
    verdict = "compact-surrogate: pass" if passed else "compact-surrogate: fail"
    logger.info(f"Condition (A) for {triple.name}/{generator_symbol}: {verdict} (r={rank_r})")
    return DecayReport(
        generator=generator_symbol,
        levels=[list(lv) if isinstance(lv, tuple) else lv for lv in levels],
        rank_r=rank_r,
        tail_norms=tails,
        leading_singular_values=leading,
        verdict=verdict,
        passed=passed,
    )


# Morphisms


@dataclass(frozen=True)
class MorphismModel:
    """Unitary Phi with a generator map phi between two triples."""

    source: SpectralTripleModel
    target: SpectralTripleModel
    phi: dict[str, str]
    Phi: TruncationFamily


def _conjugated_rule(level: Level, family: TruncationFamily, unitary: TruncationFamily) -> sparse.spmatrix:
    u = unitary.sparse(level)
    return u @ family.sparse(level) @ u.conj().T


def conjugate_triple(
    triple: SpectralTripleModel, unitary: TruncationFamily, name: str | None = None
) -> SpectralTripleModel:
    """
    Image of a triple under a unitary family: a -> Phi a Phi*, D -> Phi D Phi*.

    The unitary must map the Dirac diagonal to a diagonal; bandwidths are kept, so it
    should be a relabeling of modes.
    """
    generators = {
        s: replace(g, rule=partial(_conjugated_rule, family=g, unitary=unitary))
        for s, g in triple.generators.items()
    }
    dirac = TruncationFamily("D", partial(_conjugated_rule, family=triple.dirac, unitary=unitary))
    dm = dirac.sparse(triple.min_level)
    if (dm - sparse.diags(dm.diagonal())).count_nonzero():
        raise SpectralDgaError("conjugated Dirac is not diagonal", module="triple", stage="conjugate")
    heat = triple.heat_factors
    if len(heat) == 1:
        heat = (
            HeatFactor(
                heat[0].space,
                partial(_permuted_diagonal, base=dirac, absolute=True),
                partial(
                    _permuted_diagonal,
                    base=dirac,
                    absolute=False,
                    convention=triple.sign_zero_convention,
                ),
                heat[0].min_level,
            ),
        )
    grading = triple.grading
    if grading is not None:
        grading = replace(grading, rule=partial(_conjugated_rule, family=grading, unitary=unitary))
    return replace(
        triple,
        name=name or f"{triple.name}-conjugate",
        generators=generators,
        dirac=dirac,
        heat_factors=heat,
        grading=grading,
    )


def _permuted_diagonal(
    level: Level, base: TruncationFamily, absolute: bool, convention: int = 1
) -> np.ndarray:
    d = np.real(base.sparse(level).diagonal())
    if absolute:
        return np.abs(d)
    return np.where(d > 0, 1.0, np.where(d < 0, -1.0, float(convention)))


def _reflection(level: int) -> sparse.spmatrix:
    n = 2 * int(level) + 1
    idx = np.arange(n)
    return sparse.csr_matrix((np.ones(n, dtype=complex), (idx[::-1], idx)), shape=(n, n))


def reflection_unitary() -> TruncationFamily:
    """e_n -> e_{-n} on the Fourier modes."""
    return TruncationFamily("R", _reflection, bandwidth=None)


def identity_unitary(triple: SpectralTripleModel) -> TruncationFamily:
    return TruncationFamily("I", lambda level: sparse.identity(triple.dim(level), dtype=complex))


def verify_morphism(
    m: MorphismModel,
    levels: Sequence[Level],
    samples: int = 10,
    seed: int = 0,
    heat_t: Sequence[float] = (1.0, 0.25),
) -> MorphismReport:
    """
    Check Phi unitary, Phi D1 = D2 Phi, intertwining on generators, commutators and sampled
    degree-2 words, and preservation of truncated heat traces.
    """
    tol = settings.containment_factor * settings.rank_tol
    relations: dict[str, bool] = {}
    failures: list[str] = []
    max_residual = 0.0

    def record(name: str, residual: float, scale: float = 1.0) -> None:
        nonlocal max_residual
        rel = residual / max(scale, 1.0)
        max_residual = max(max_residual, rel)
        ok = rel <= tol
        relations[name] = relations.get(name, True) and ok
        if not ok and name not in failures:
            failures.append(name)

    rng = np.random.default_rng(seed)
    symbols = list(m.phi)
    bandwidths = [m.source.generator(s).bandwidth or 0 for s in symbols]
    margin = 3 * max(bandwidths, default=0)
    for level in levels:
        u = m.Phi.sparse(level)
        ident = sparse.identity(u.shape[0], dtype=complex)
        record("unitary", splinalg.norm(u.conj().T @ u - ident))
        d1 = sparse.diags(m.source.dirac_diagonal(level))
        d2 = sparse.diags(m.target.dirac_diagonal(level))
        record(
            "dirac intertwining",
            splinalg.norm(u @ d1 - d2 @ u),
            float(np.max(np.abs(m.source.dirac_diagonal(level)), initial=0.0)),
        )
        rows = m.source.interior(level, margin)

        def compare(name: str, left: sparse.spmatrix, right: sparse.spmatrix) -> None:
            diff = (left - right)[rows]
            record(name, splinalg.norm(diff), splinalg.norm(left[rows]))

        for s in symbols:
            a1 = m.source.operator(s, level)
            a2 = m.target.operator(m.phi[s], level)
            compare("generator intertwining", u @ a1, a2 @ u)
            compare("commutator intertwining", u @ m.source.commutator(s, level), m.target.commutator(m.phi[s], level) @ u)
        for _ in range(samples):
            word = [symbols[i] for i in rng.integers(0, len(symbols), size=3)]
            w1 = (
                m.source.operator(word[0], level)
                @ m.source.commutator(word[1], level)
                @ m.source.commutator(word[2], level)
            )
            w2 = (
                m.target.operator(m.phi[word[0]], level)
                @ m.target.commutator(m.phi[word[1]], level)
                @ m.target.commutator(m.phi[word[2]], level)
            )
            compare("degree-2 word intertwining", u @ w1, w2 @ u)
        for t in heat_t:
            tr1 = float(np.sum(np.exp(-t * m.source.dirac_diagonal(level) ** 2)))
            tr2 = float(np.sum(np.exp(-t * m.target.dirac_diagonal(level) ** 2)))
            record("heat trace invariance", abs(tr1 - tr2), tr1)

    passed = not failures
    if passed:
        logger.info(f"Morphism {m.source.name} -> {m.target.name}: pass")
    else:
        logger.warning(f"Morphism {m.source.name} -> {m.target.name}: fail on {failures}")
    return MorphismReport(
        passed=passed,
        levels=[list(lv) if isinstance(lv, tuple) else lv for lv in levels],
        relations=relations,
        failures=failures,
        max_residual=max_residual,
    )
