"""Universal forms, their representation by commutators with D, and the Dirac dga.

A word a0 da1 ... dak is stored with a0 and every d-letter as a tuple of generator
symbols (a product; the empty tuple is the unit). Sums of words are kept in a
canonical dict, so the identities of the universal dga hold term by term.
"""

import math
from collections.abc import Callable, Hashable, Sequence
from dataclasses import asdict, dataclass, field, replace
from itertools import product
from typing import Any

import numpy as np
import scipy.linalg
from scipy import sparse

from app.config import settings
from app.models.reports import (
    BaseComplexReport,
    CohomologyDegree,
    CohomologyReport,
    DegreeDims,
    DeltaCheckReport,
    DiracDgaReport,
    GradedDimsReport,
    GradedEntry,
    LevelDims,
)
from app.services import linalg
from app.services.errors import BudgetError, ContainmentError, JunkInstabilityError, SpectralDgaError
from app.services.qds import (
    SIGN,
    Key,
    LaurentPoly,
    Letter,
    SuspendedTriple,
    TensorOp,
    dirac_commutator,
    evaluate_key,
    key_bandwidth,
    letter_name,
    letter_op,
    letter_weight,
    matrix_unit,
    sigma_prime,
)
from app.services.triple import Level, SpectralTripleModel
from app.utils.logger import logger
from app.utils.workers import map_levels

Term = tuple[tuple, tuple[tuple, ...]]
LAURENT_UNIT: Letter = ("lau", 0)


# Universal forms


def _accumulate(out: dict, key: Term, c: complex) -> None:
    value = out.get(key, 0) + c
    if value == 0:
        out.pop(key, None)
    else:
        out[key] = value


def _right_mul(a0: tuple, letters: tuple, b: tuple) -> dict[Term, complex]:
    """(a0 da1 ... dak) * b in normal form, using dak b = d(ak b) - ak db."""
    if not b:
        return {(a0, letters): 1}
    if not letters:
        return {(a0 + b, ()): 1}
    head, last = letters[:-1], letters[-1]
    out: dict[Term, complex] = {(a0, head + (last + b,)): 1}
    for (x0, lx), c in _right_mul(a0, head, last).items():
        _accumulate(out, (x0, lx + (b,)), -c)
    return out


@dataclass(frozen=True)
class FormExpr:
    """Degree-homogeneous finite sum of words."""

    terms: dict[Term, complex] = field(default_factory=dict)
    degree: int = 0

    @classmethod
    def zero(cls, degree: int) -> "FormExpr":
        return cls({}, degree)

    @classmethod
    def from_words(cls, words: Sequence["FormWord"], coeffs: Sequence[complex] | None = None) -> "FormExpr":
        if not words:
            raise SpectralDgaError("cannot build a form from no words", module="forms")
        coeffs = [1.0] * len(words) if coeffs is None else list(coeffs)
        out: dict[Term, complex] = {}
        for w, c in zip(words, coeffs, strict=True):
            if c != 0 and w.coefficient != 0:
                _accumulate(out, w.key, c * w.coefficient)
        return cls(out, words[0].degree)

    def words(self) -> list["FormWord"]:
        return [FormWord(c, a0, letters) for (a0, letters), c in self.terms.items()]

    def is_zero(self) -> bool:
        return not self.terms

    def _check_degree(self, other: "FormExpr") -> None:
        if self.degree != other.degree and self.terms and other.terms:
            raise SpectralDgaError(
                f"degree mismatch: {self.degree} vs {other.degree}", module="forms", stage="sum"
            )

    def __add__(self, other: "FormExpr") -> "FormExpr":
        self._check_degree(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            _accumulate(out, k, c)
        return FormExpr(out, self.degree if self.terms else other.degree)

    def scale(self, c: complex) -> "FormExpr":
        if c == 0:
            return FormExpr.zero(self.degree)
        return FormExpr({k: c * v for k, v in self.terms.items()}, self.degree)

    def __sub__(self, other: "FormExpr") -> "FormExpr":
        return self + other.scale(-1)

    def d(self) -> "FormExpr":
        """Universal differential: d(a0 da1 ... dak) = da0 da1 ... dak."""
        out: dict[Term, complex] = {}
        for (a0, letters), c in self.terms.items():
            if a0:
                _accumulate(out, ((), (a0,) + letters), c)
        return FormExpr(out, self.degree + 1)

    def __mul__(self, other: "FormExpr") -> "FormExpr":
        out: dict[Term, complex] = {}
        for (a0, la), c in self.terms.items():
            for (b0, lb), e in other.terms.items():
                for (x0, lx), f in _right_mul(a0, la, b0).items():
                    _accumulate(out, (x0, lx + lb), c * e * f)
        return FormExpr(out, self.degree + other.degree)

    def adjoint(self, adjoint_symbol: Callable[[Hashable], Hashable]) -> "FormExpr":
        """(a0 da1 ... dak)* = (-1)^k d(ak*) ... d(a1*) a0*, with (xy)* = y* x*."""

        def star(prod: tuple) -> tuple:
            return tuple(adjoint_symbol(s) for s in reversed(prod))

        out: dict[Term, complex] = {}
        for (a0, letters), c in self.terms.items():
            sign = (-1) ** len(letters)
            reversed_letters = tuple(star(x) for x in reversed(letters))
            for key, f in _right_mul((), reversed_letters, star(a0)).items():
                _accumulate(out, key, sign * np.conj(c) * f)
        return FormExpr(out, self.degree)


@dataclass(frozen=True)
class FormWord:
    """coefficient * a0 da1 ... dak."""

    coefficient: complex
    a0: tuple = ()
    letters: tuple[tuple, ...] = ()

    @property
    def degree(self) -> int:
        return len(self.letters)

    @property
    def key(self) -> Term:
        return (self.a0, self.letters)

    def expr(self) -> FormExpr:
        if self.coefficient == 0 or any(not x for x in self.letters):
            return FormExpr.zero(self.degree)
        return FormExpr({self.key: self.coefficient}, self.degree)

    def d(self) -> FormExpr:
        return self.expr().d()

    def __mul__(self, other: "FormWord") -> FormExpr:
        return self.expr() * other.expr()

    def label(self) -> str:
        def show(prod: tuple) -> str:
            names = [letter_name(s) if isinstance(s, tuple) else str(s) for s in prod]
            return "·".join(names) if names else "1"

        body = show(self.a0) + "".join(f" d({show(x)})" for x in self.letters)
        return body if self.coefficient == 1 else f"{self.coefficient}*{body}"


# Budgets and enumeration


@dataclass(frozen=True)
class WordBudget:
    """Per-letter weight cap, optional cap on the summed weight, optional symbol subset."""

    cap: int
    total: int | None = None
    symbols: tuple[str, ...] | None = None

    def lifted(self, degree: int) -> "WordBudget":
        """Cap for the degree-(k-1) words whose d-images must cover degree-k budget words."""
        if degree <= 1:
            return self
        cap = max(self.cap, math.ceil(((degree + 1) * self.cap + 1) / degree))
        return replace(self, cap=cap)

    def as_dict(self) -> dict[str, Any]:
        out = asdict(self)
        if self.symbols is not None:
            out["symbols"] = list(self.symbols)
        return out


@dataclass(frozen=True)
class SuspendedBudget:
    """Base weight budget, matrix-unit index cap and Laurent degree cap."""

    base_budget: int
    index_cap: int
    laurent_cap: int

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


Triple = SpectralTripleModel | SuspendedTriple
Budget = WordBudget | SuspendedBudget


def base_pool(triple: SpectralTripleModel, budget: WordBudget) -> list[str]:
    pool = triple.symbols(max_weight=budget.cap)
    if budget.symbols is not None:
        pool = [s for s in pool if s in budget.symbols]
    return pool


def suspended_letters(
    st: SuspendedTriple, budget: SuspendedBudget, base_symbols: Sequence[str] | None = None
) -> list[Letter]:
    """Letters a x e_ij (base weight within budget, i, j < index cap) and Z^n, 0 < |n| <= cap."""
    if budget.index_cap > st.algebra.index_cap:
        raise BudgetError(
            f"matrix-unit cap {budget.index_cap} exceeds the suspension's cap {st.algebra.index_cap}",
            module="forms",
            stage="enumerate",
        )
    pool = st.base.symbols(max_weight=budget.base_budget)
    if base_symbols is not None:
        pool = [s for s in pool if s in base_symbols]
    fin = [
        ("fin", s, i, j)
        for s in pool
        for i in range(budget.index_cap)
        for j in range(budget.index_cap)
    ]
    return fin + st.algebra.laurent_letters(budget.laurent_cap)


def _alphabet(triple: Triple, budget: Budget) -> tuple[list, Callable[[Any], int], int | None]:
    if isinstance(triple, SuspendedTriple):
        if not isinstance(budget, SuspendedBudget):
            raise BudgetError("suspended triples take a SuspendedBudget", module="forms")
        return suspended_letters(triple, budget), letter_weight, budget.laurent_cap
    if not isinstance(budget, WordBudget):
        raise BudgetError("base triples take a WordBudget", module="forms")
    tails = [s for s in base_pool(triple, budget) if s != triple.unit]
    return tails, lambda s: triple.generator(s).weight, budget.total


def _words(tails: list, weight: Callable[[Any], int], total: int | None, degree: int) -> list[FormWord]:
    if degree < 0:
        raise BudgetError("degree must be nonnegative", module="forms", stage="enumerate")
    heads: list[tuple] = [()] + [(s,) for s in tails]
    estimate = len(heads) * len(tails) ** degree
    if estimate > settings.max_words:
        raise BudgetError(
            f"word enumeration would produce about {estimate} words (cap {settings.max_words})",
            module="forms",
            stage="enumerate",
        )
    words = []
    for head in heads:
        head_weight = sum(weight(s) for s in head)
        for tail in product(tails, repeat=degree):
            if total is not None and head_weight + sum(weight(s) for s in tail) > total:
                continue
            words.append(FormWord(1.0, head, tuple((s,) for s in tail)))
    return words


def enumerate_words(triple: Triple, degree: int, budget: Budget) -> list[FormWord]:
    """
    All words a0 da1 ... dak within budget, a0 = unit included, d(unit) pruned.

    Deterministic: heads in generator order (unit first), tails in lexicographic order.
    """
    tails, weight, total = _alphabet(triple, budget)
    return _words(tails, weight, total, degree)


# Evaluation on base triples


def word_bandwidth(triple: SpectralTripleModel, word: FormWord) -> int:
    total = triple.letter_bandwidth(word.a0)
    for x in word.letters:
        bw = triple.letter_bandwidth(x)
        total = None if total is None or bw is None else total + bw
    if total is None:
        raise BudgetError(
            f"word {word.label()} has unknown bandwidth", module="forms", stage="pi-eval"
        )
    return total


def word_operator(triple: SpectralTripleModel, word: FormWord, level: Level) -> sparse.csr_matrix:
    """a0 [D, a1] ... [D, ak] at a level, full truncated matrix."""
    out = triple.product(word.a0, level)
    for x in word.letters:
        out = out @ triple.commutator(x, level)
    return sparse.csr_matrix(out * word.coefficient)


def expr_operator(triple: SpectralTripleModel, expr: FormExpr, level: Level) -> sparse.csr_matrix:
    out = sparse.csr_matrix((triple.dim(level), triple.dim(level)), dtype=complex)
    for w in expr.words():
        out = out + word_operator(triple, w, level)
    return out


def _realized_symbols(letter: Letter) -> tuple[str, ...]:
    if letter[0] == "fin":
        return (letter_name(letter),)
    n = letter[1]
    return ("Z",) * n if n > 0 else ("Z*",) * (-n)


def realize_word(word: FormWord) -> FormWord:
    """Translate a suspended-letter word into the realized model's generator symbols."""

    def flat(prod: tuple) -> tuple:
        return tuple(s for letter in prod for s in _realized_symbols(letter))

    return FormWord(word.coefficient, flat(word.a0), tuple(flat(x) for x in word.letters))


def pi_eval(triple: Triple, word: FormWord, level: Level, margin: int | None = None) -> np.ndarray:
    """
    pi(a0 da1 ... dak) = a0 [D, a1] ... [D, ak] on the interior rows of a level.

    Rows at distance <= margin (default: the word's bandwidth) from the truncation edge
    are dropped; all columns are kept.
    """
    if isinstance(triple, SuspendedTriple):
        return pi_eval(triple.model, realize_word(word), level, margin)
    margin = word_bandwidth(triple, word) if margin is None else margin
    rows = triple.interior(level, margin)
    return word_operator(triple, word, level)[rows].toarray()


def _ncols(triple: SpectralTripleModel, level: Level, margin: int) -> int:
    return len(triple.interior(level, margin)) * triple.dim(level)


def evaluate_exprs(
    triple: SpectralTripleModel, exprs: Sequence[FormExpr | FormWord], level: Level, margin: int
) -> np.ndarray:
    """Vectorized interior rows of several forms; one row per form."""
    rows = triple.interior(level, margin)
    out = np.zeros((len(exprs), _ncols(triple, level, margin)), dtype=complex)
    for i, x in enumerate(exprs):
        op = word_operator(triple, x, level) if isinstance(x, FormWord) else expr_operator(triple, x, level)
        out[i] = op[rows].toarray().ravel()
    return out


def _max_bandwidth(triple: SpectralTripleModel, words: Sequence[FormWord]) -> int:
    return max((word_bandwidth(triple, w) for w in words), default=0)


# Junk


@dataclass(frozen=True)
class JunkKernel:
    """Kernel combinations of degree-(k-1) words and their d-images."""

    degree: int
    lower_words: list[FormWord]
    coeffs: np.ndarray
    images: list[FormExpr]
    margin: int


def stable_kernel(rows_by_level: Sequence[tuple[Level, np.ndarray]], stage: str = "junk") -> np.ndarray:
    """
    Kernel coefficients of the rows at the last level, verified at every other level.

    Raises:
        JunkInstabilityError: a kernel vector does not vanish at a smaller level.
    """
    _, rows_top = rows_by_level[-1]
    if rows_top.size == 0:
        return np.zeros((0, rows_top.shape[0]), dtype=complex)
    coeffs = linalg.nullspace_coeffs(rows_top)
    for level, rows in rows_by_level[:-1]:
        scale = max(float(np.max(np.linalg.norm(rows, axis=1), initial=0.0)), 1.0)
        residual = float(np.max(np.linalg.norm(coeffs @ rows, axis=1), initial=0.0)) if coeffs.size else 0.0
        allowed = settings.containment_factor * settings.rank_tol * scale
        if residual > allowed:
            raise JunkInstabilityError(
                f"junk kernel unstable; increase levels (residual {residual:.3e} at level {level})",
                module="forms",
                stage=stage,
            )
    return coeffs


def junk_kernel(
    triple: SpectralTripleModel, degree: int, budget: WordBudget, levels: Sequence[Level]
) -> JunkKernel:
    """Kernel of pi on degree-(k-1) words at the largest level, checked at every level."""
    if degree < 1:
        return JunkKernel(degree, [], np.zeros((0, 0), dtype=complex), [], 0)
    lower = enumerate_words(triple, degree - 1, budget.lifted(degree))
    margin = _max_bandwidth(triple, lower)
    coeffs = stable_kernel([(level, evaluate_exprs(triple, lower, level, margin)) for level in levels])
    images = []
    for c in coeffs:
        image = FormExpr.from_words(lower, c).d()
        if not image.is_zero():
            images.append(image)
    logger.info(
        f"Junk kernel {triple.name} degree {degree}: {coeffs.shape[0]} relations among "
        f"{len(lower)} words, {len(images)} d-images"
    )
    return JunkKernel(degree, lower, coeffs, images, margin)


def junk_space(
    triple: SpectralTripleModel, degree: int, budget: WordBudget, levels: Sequence[Level]
) -> linalg.OperatorSpan:
    """pi(dJ_0^{k-1}) at the largest level."""
    kernel = junk_kernel(triple, degree, budget, levels)
    margin = max(kernel.margin, _max_bandwidth(triple, enumerate_words(triple, degree, budget)))
    top = levels[-1]
    rows = evaluate_exprs(triple, kernel.images, top, margin)
    if rows.shape[0] == 0:
        rows = np.zeros((0, _ncols(triple, top, margin)), dtype=complex)
    return linalg.OperatorSpan.from_rows(top, rows, shape=(rows.shape[1],))


# Dirac dga dimensions


def _grow(level: Level) -> Level:
    if isinstance(level, tuple):
        return tuple(_grow(x) for x in level)
    return 2 * int(level)


def _level_dims(
    triple: SpectralTripleModel,
    words: list[FormWord],
    junk: list[FormExpr],
    level: Level,
    margin: int,
) -> LevelDims:
    pi_rows = evaluate_exprs(triple, words, level, margin)
    junk_rows = evaluate_exprs(triple, junk, level, margin)
    pi_report = linalg.rank_of_rows(pi_rows)
    inside = linalg.span_intersection(junk_rows, pi_rows) if junk_rows.shape[0] else junk_rows
    big = linalg.OperatorSpan.from_rows(level, pi_rows, shape=(pi_rows.shape[1],))
    small = linalg.OperatorSpan.from_rows(
        level, inside if inside.shape[0] else np.zeros((0, pi_rows.shape[1])), shape=(pi_rows.shape[1],)
    )
    quotient = linalg.quotient_dim(big, small) if big.size else 0
    junk_dim = linalg.span_rank(small).rank
    return LevelDims(
        level=list(level) if isinstance(level, tuple) else level,
        dim_pi_omega=pi_report.rank,
        dim_junk=junk_dim,
        dim_omega_D=quotient,
        marginal=pi_report.marginal,
    )


def dirac_dga_dims(
    triple: SpectralTripleModel, max_degree: int, budget: WordBudget, levels: Sequence[Level]
) -> DiracDgaReport:
    """
    dim Omega_D^k = dim pi(Omega^k) - dim pi(dJ_0^{k-1}) for k = 0..max_degree.

    Junk is read inside the span of the budget words. A degree is stabilized when its
    three dimensions agree on at least three levels; a marginal rank is rerun at a
    doubled level.
    """
    levels = list(levels)
    degrees: list[DegreeDims] = []
    for k in range(max_degree + 1):
        words = enumerate_words(triple, k, budget)
        kernel = junk_kernel(triple, k, budget, levels)
        margin = max(_max_bandwidth(triple, words), kernel.margin)

        def at(level: Level, words=words, kernel=kernel, margin=margin) -> LevelDims:
            return _level_dims(triple, words, kernel.images, level, margin)

        per_level = map_levels(at, levels)
        for entry, level in zip(list(per_level), levels, strict=True):
            if entry.marginal:
                logger.warning(
                    f"Marginal rank for {triple.name} degree {k} at level {level}; rerunning"
                )
                per_level.append(at(_grow(level)))
        top = per_level[len(levels) - 1]
        triples_seen = {(d.dim_pi_omega, d.dim_junk, d.dim_omega_D) for d in per_level[: len(levels)]}
        stabilized = len(levels) >= 3 and len(triples_seen) == 1
        logger.info(
            f"{triple.name} degree {k}: pi={top.dim_pi_omega} junk={top.dim_junk} "
            f"Omega_D={top.dim_omega_D} stabilized={stabilized}"
        )
        degrees.append(
            DegreeDims(
                degree=k,
                dim_pi_omega=top.dim_pi_omega,
                dim_junk=top.dim_junk,
                dim_omega_D=top.dim_omega_D,
                stabilized=stabilized,
                word_count=len(words),
                per_level=per_level,
            )
        )
    return DiracDgaReport(
        triple=triple.name,
        budget=budget.as_dict(),
        levels=[list(x) if isinstance(x, tuple) else x for x in levels],
        degrees=degrees,
    )


# Suspended forms


def letters_op(prod: tuple, unit: str = "1") -> TensorOp:
    out = TensorOp.identity()
    for letter in prod:
        out = out * letter_op(letter, unit)
    return out


def suspended_word_op(word: FormWord, unit: str = "1") -> TensorOp:
    """pi of a suspended word as a sum of base keys tensored with Toeplitz elements."""
    out = letters_op(word.a0, unit)
    for x in word.letters:
        out = out * dirac_commutator(letters_op(x, unit))
    return out.scale(word.coefficient)


def suspended_expr_op(expr: FormExpr, unit: str = "1") -> TensorOp:
    out = TensorOp()
    for w in expr.words():
        out = out + suspended_word_op(w, unit)
    return out


def letter_adjoint(st: SuspendedTriple) -> Callable[[Letter], Letter]:
    def star(letter: Letter) -> Letter:
        if letter[0] == "fin":
            _, s, i, j = letter
            return ("fin", st.base.adjoint_symbol(s), j, i)
        return ("lau", -letter[1])

    return star


def base_adjoints(base: SpectralTripleModel) -> dict[str, str]:
    return {s: base.adjoint_symbol(s) for s in base.symbols()}


def coordinate_table(ops: Sequence[TensorOp]) -> tuple[dict[Key, int], dict[tuple, int], list]:
    """Index maps for the (key, Toeplitz label) coordinates of a list of operators."""
    keys: dict[Key, int] = {}
    labels: dict[tuple, int] = {}
    entries = []
    for r, op in enumerate(ops):
        for key, element in op.terms.items():
            ki = keys.setdefault(key, len(keys))
            for label, c in element.coordinates().items():
                li = labels.setdefault(label, len(labels))
                entries.append((r, ki, li, c))
    return keys, labels, entries


def _coordinate_matrix(entries: list, nrows: int, nkeys: int, nlabels: int) -> sparse.csr_matrix:
    if not entries:
        return sparse.csr_matrix((nrows, nkeys * nlabels), dtype=complex)
    r, k, lab, c = zip(*entries, strict=True)
    cols = np.asarray(k) * nlabels + np.asarray(lab)
    return sparse.csr_matrix(
        (np.asarray(c, dtype=complex), (np.asarray(r), cols)), shape=(nrows, nkeys * nlabels)
    )


def window_vectors(
    base: SpectralTripleModel,
    groups: Sequence[Sequence[TensorOp]],
    level: Level,
    modulo_compacts: bool = True,
) -> list[np.ndarray]:
    """
    Vectorize operators on H x l^2(N), one array per group.

    Base keys are evaluated on the Calkin window of the base level (on the interior
    rows when modulo_compacts is False) and reduced to orthonormal coordinates; Toeplitz
    coordinates are exact. All groups share one coordinate system, so their rows can be
    compared directly.
    """
    flat = [op for group in groups for op in group]
    keys, labels, entries = coordinate_table(flat)
    if not keys:
        return [np.zeros((len(g), 0), dtype=complex) for g in groups]
    margin = max(key_bandwidth(base, k) for k in keys)
    window = base.calkin_window(level, margin) if modulo_compacts else base.interior(level, margin)
    vectors = np.asarray([evaluate_key(base, k, level)[window].toarray().ravel() for k in keys])
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    scale = max(float(s[0]) if s.size else 0.0, 1.0)
    r = int(np.sum(s > settings.rank_tol * scale))
    coords = u[:, :r] * s[:r]
    nl = len(labels)
    lift = sparse.kron(sparse.csr_matrix(coords), sparse.identity(nl, dtype=complex), format="csr")
    table = _coordinate_matrix(entries, len(flat), len(keys), nl)
    rows = (table @ lift).toarray()
    out, start = [], 0
    for group in groups:
        out.append(rows[start : start + len(group)])
        start += len(group)
    return out


def laurent_reach(laurent_cap: int) -> list[int]:
    """Exponents n with F x sigma'(z^n) in the span of degree-1 words of Laurent weight <= cap."""
    reach = [n for n in range(-laurent_cap, laurent_cap + 1) if n != 0]
    if laurent_cap >= 2:
        # sigma'(z^-1) d sigma'(z) = -F x I
        reach.append(0)
    return sorted(reach)


def within_index_cap(op: TensorOp, cap: int) -> bool:
    return all(element.finite.bound <= cap for element in op.terms.values())


def model_space_ops(
    st: SuspendedTriple,
    budget: SuspendedBudget,
    base_words: Sequence[FormWord],
    pool: Sequence[str],
) -> list[TensorOp]:
    """Spanning operators of (base 1-forms x S) + F (A A x S) + (F x C[z, z^-1]) at budget."""
    cap = budget.index_cap
    units = [matrix_unit(i, j) for i in range(cap) for j in range(cap)]
    ops: list[TensorOp] = []
    for w in base_words:
        key = tuple(("a", s) for s in w.a0) + tuple(("d", x[0]) for x in w.letters)
        ops += [TensorOp.single(key, e) for e in units]
    for s in pool:
        for t in pool:
            ops += [TensorOp.single((SIGN, ("a", s), ("a", t)), e) for e in units]
    ops += [
        TensorOp.single((SIGN,), sigma_prime(LaurentPoly.monomial(n)))
        for n in laurent_reach(budget.laurent_cap)
    ]
    return ops


def algebra_square_rank(base: SpectralTripleModel, pool: Sequence[str], level: Level) -> int:
    """Rank of the products a b, a and b in the pool, read modulo compacts."""
    one = sigma_prime(LaurentPoly.monomial(0))
    ops = [TensorOp.single((("a", s), ("a", t)), one) for s in pool for t in pool]
    (rows,) = window_vectors(base, [ops], level)
    return linalg.rank_of_rows(rows).rank


def _restricted_words(st: SuspendedTriple, budget: SuspendedBudget, degree: int, symbols) -> list[FormWord]:
    return _words(suspended_letters(st, budget, symbols), letter_weight, budget.laurent_cap, degree)


def suspended_dirac_dims(
    st: SuspendedTriple,
    budget: SuspendedBudget,
    levels: Sequence[Level],
    max_degree: int = 2,
    base_symbols: Sequence[str] | None = None,
) -> DiracDgaReport:
    """
    Dirac dga dimensions of Sigma^2 A at a suspended budget.

    Degree 0 is the rank of the algebra letters. Degree 1 is the rank of the whole form
    span modulo junk, over the words whose matrix-unit support stays below the index cap;
    the rank of the decomposition's model space and the rank of span + model are reported
    next to it, so a span that leaves the model or misses part of it shows up. Degrees
    >= 2 come from the decomposition Omega_D^n(A) x S.

    Raises:
        BudgetError: the index cap is below 2.
        ContainmentError: a form of the span does not decompose within the budget.
        JunkInstabilityError: a degree-0 relation does not hold at every level.
    """
    if budget.index_cap < 2:
        raise BudgetError(
            "matched budget needs a matrix-unit cap of at least 2", module="forms", stage="suspended"
        )
    levels = list(levels)
    cap2 = budget.index_cap**2
    laurent_dim = 2 * budget.laurent_cap + 1
    symbols = None if base_symbols is None else tuple(base_symbols)
    base_budget = WordBudget(cap=budget.base_budget, symbols=symbols)
    base_report = dirac_dga_dims(st.base, max(max_degree, 1), base_budget, levels)
    base_dims = base_report.dims()
    rank_a = base_report.degrees[0].dim_pi_omega
    pool = base_pool(st.base, base_budget)
    base_words = enumerate_words(st.base, 1, base_budget)

    unit = st.base.unit
    words0 = _restricted_words(st, budget, 0, base_symbols)
    ops0 = [suspended_word_op(w, unit) for w in words0]
    words1, ops1 = [], []
    for w in _restricted_words(st, budget, 1, base_symbols):
        op = suspended_word_op(w, unit)
        if within_index_cap(op, budget.index_cap):
            words1.append(w)
            ops1.append(op)
    ops_w = model_space_ops(st, budget, base_words, pool)

    rows0 = map_levels(lambda level: window_vectors(st.base, [ops0], level)[0], levels)
    kernel = stable_kernel(list(zip(levels, rows0, strict=True)), stage="suspended junk")
    junk_ops = []
    for c in kernel:
        image = FormExpr.from_words(words0, c).d()
        if not image.is_zero():
            junk_ops.append(suspended_expr_op(image, unit))

    def at(level: Level) -> tuple[int, int, int, int, int]:
        rows1, rows_w, rows_j = window_vectors(st.base, [ops1, ops_w, junk_ops], level)
        junk = linalg.rank_of_rows(rows_j).rank

        def modulo_junk(*blocks: np.ndarray) -> int:
            return linalg.rank_of_rows(np.vstack([*blocks, rows_j])).rank - junk

        span = linalg.rank_of_rows(rows1).rank
        return span, junk, modulo_junk(rows1), modulo_junk(rows_w), modulo_junk(rows1, rows_w)

    counts = map_levels(at, levels)
    per_level = [(linalg.rank_of_rows(r).rank, *c) for r, c in zip(rows0, counts, strict=True)]
    stabilized = len(levels) >= 3 and len(set(per_level)) == 1
    dim0, span1, junk1, omega1, model1, union1 = per_level[-1]
    if union1 != model1:
        raise ContainmentError(
            f"element not decomposable within budget: span {omega1}, model {model1}, span + model {union1}",
            module="forms",
            stage="suspended",
        )
    products = algebra_square_rank(st.base, pool, levels[-1])
    formula1 = (base_dims[1] + products) * cap2 + len(laurent_reach(budget.laurent_cap))
    if omega1 != model1:
        logger.warning(
            f"Suspended {st.base.name} degree 1: span {omega1} does not fill the model space {model1}"
        )
    logger.info(
        f"Suspended {st.base.name} degree 1: measured {omega1}, model {model1}, decomposition {formula1} "
        f"({len(words1)} words, stabilized={stabilized})"
    )
    level_list = [list(x) if isinstance(x, tuple) else x for x in levels]
    degrees = [
        DegreeDims(
            degree=0,
            dim_pi_omega=dim0,
            dim_junk=0,
            dim_omega_D=dim0,
            stabilized=stabilized,
            method="window-span",
            formula_dim=rank_a * cap2 + laurent_dim,
            word_count=len(words0),
            per_level=[
                LevelDims(level=lv, dim_pi_omega=p[0], dim_junk=0, dim_omega_D=p[0])
                for lv, p in zip(level_list, per_level, strict=True)
            ],
        ),
        DegreeDims(
            degree=1,
            dim_pi_omega=span1,
            dim_junk=junk1,
            dim_omega_D=omega1,
            stabilized=stabilized,
            method="window-span",
            formula_dim=formula1,
            model_dim=model1,
            union_dim=union1,
            word_count=len(words1),
            per_level=[
                LevelDims(level=lv, dim_pi_omega=p[1], dim_junk=p[2], dim_omega_D=p[3])
                for lv, p in zip(level_list, per_level, strict=True)
            ],
        ),
    ]
    for k in range(2, max_degree + 1):
        base_k = base_report.degrees[k]
        degrees.append(
            DegreeDims(
                degree=k,
                dim_pi_omega=base_k.dim_pi_omega * cap2,
                dim_junk=base_k.dim_junk * cap2,
                dim_omega_D=base_k.dim_omega_D * cap2,
                stabilized=base_k.stabilized,
                method="decomposition",
                formula_dim=base_k.dim_omega_D * cap2,
                per_level=[
                    LevelDims(
                        level=x.level,
                        dim_pi_omega=x.dim_pi_omega * cap2,
                        dim_junk=x.dim_junk * cap2,
                        dim_omega_D=x.dim_omega_D * cap2,
                        marginal=x.marginal,
                    )
                    for x in base_k.per_level
                ],
            )
        )
    return DiracDgaReport(
        triple=st.name,
        budget={**budget.as_dict(), "base_symbols": None if base_symbols is None else list(base_symbols)},
        levels=level_list,
        degrees=degrees,
    )


# Base complex and the decomposed suspended complex


@dataclass(frozen=True)
class BaseComplex:
    """Truncated Dirac complex Omega_D^0 -> Omega_D^1 -> ... of a base triple."""

    triple_name: str
    unit: str
    basis_words: list[list[FormWord]]
    differentials: list[np.ndarray]  # d^k : dims[k] -> dims[k+1], as dims[k+1] x dims[k]

    @property
    def dims(self) -> list[int]:
        return [len(b) for b in self.basis_words]

    def ranks(self) -> list[int]:
        return [linalg.rank_of_rows(m).rank if m.size else 0 for m in self.differentials]

    def kernel_dim(self, k: int) -> int:
        return self.dims[k] - (self.ranks()[k] if k < len(self.differentials) else 0)

    def cohomology(self) -> list[int]:
        """H^k for the degrees whose outgoing differential is known."""
        ranks = self.ranks()
        return [
            self.dims[k] - ranks[k] - (ranks[k - 1] if k > 0 else 0) for k in range(len(ranks))
        ]

    def key(self, k: int, index: int) -> Key:
        """Base operator key of the k-th degree basis word."""
        w = self.basis_words[k][index]
        return tuple(("a", s) for s in w.a0 if s != self.unit) + tuple(("d", x[0]) for x in w.letters)

    def report(self) -> BaseComplexReport:
        return BaseComplexReport(dims=self.dims, ranks=self.ranks(), cohomology=self.cohomology())


def build_base_complex(
    triple: SpectralTripleModel, budget: WordBudget, levels: Sequence[Level], max_degree: int = 2
) -> BaseComplex:
    """
    Basis words of Omega_D^k (k <= max_degree) and the induced differentials.

    Each Omega_D^k is pi(Omega^k) modulo junk; basis words are picked by pivoted QR on the
    junk-projected evaluations, and d^k is solved by least squares in the next basis.
    """
    levels = list(levels)
    top = levels[-1]
    words = [enumerate_words(triple, k, budget) for k in range(max_degree + 1)]
    kernels = [junk_kernel(triple, k, budget, levels) for k in range(max_degree + 1)]
    margin = max(
        max(_max_bandwidth(triple, w) for w in words), max(kern.margin for kern in kernels)
    )

    projected, bases, junk_bases = [], [], []
    for k in range(max_degree + 1):
        rows = evaluate_exprs(triple, words[k], top, margin)
        junk_rows = evaluate_exprs(triple, kernels[k].images, top, margin)
        junk_basis = linalg.orthonormal_rows(junk_rows) if junk_rows.shape[0] else np.zeros((0, rows.shape[1]))
        reduced = rows - (rows @ junk_basis.conj().T) @ junk_basis if junk_basis.shape[0] else rows
        rank = linalg.rank_of_rows(reduced).rank if reduced.size else 0
        if rank:
            _, _, piv = scipy.linalg.qr(reduced.T, pivoting=True, mode="economic")
            chosen = sorted(int(i) for i in piv[:rank])
        else:
            chosen = []
        projected.append(reduced[chosen])
        bases.append([words[k][i] for i in chosen])
        junk_bases.append(junk_basis)

    differentials = []
    for k in range(max_degree):
        target = projected[k + 1]
        if target.shape[0] == 0 or not bases[k]:
            differentials.append(np.zeros((target.shape[0], len(bases[k])), dtype=complex))
            continue
        images = evaluate_exprs(triple, [w.d() for w in bases[k]], top, margin)
        jb = junk_bases[k + 1]
        if jb.shape[0]:
            images = images - (images @ jb.conj().T) @ jb
        coeffs, *_ = np.linalg.lstsq(target.T, images.T, rcond=None)
        residual = float(np.max(np.linalg.norm(target.T @ coeffs - images.T, axis=0), initial=0.0))
        scale = max(float(np.max(np.linalg.norm(images, axis=1), initial=0.0)), 1.0)
        if residual > settings.containment_factor * settings.rank_tol * scale:
            raise SpectralDgaError(
                f"d^{k} leaves the degree-{k + 1} budget span (residual {residual:.3e})",
                module="forms",
                stage="base-complex",
            )
        differentials.append(np.where(np.abs(coeffs) < 1e-12, 0.0, coeffs))
    cx = BaseComplex(triple.name, triple.unit, bases, differentials)
    logger.info(f"Base complex {triple.name}: dims {cx.dims}, ranks {cx.ranks()}")
    return cx


@dataclass(frozen=True)
class DecomposedForm:
    """
    Element of Omega^n of Sigma^2 A in decomposed form.

    omega: coefficients over (Omega_D^n basis) x (K x K matrix units).
    finite: coefficients over (A basis) x (K x K), the A x S summand (degrees 0 and 1).
    laurent: coefficients of z^-L .. z^L (degrees 0 and 1).
    """

    degree: int
    omega: np.ndarray
    finite: np.ndarray
    laurent: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.omega.ravel(), self.finite.ravel(), self.laurent.ravel()])


@dataclass(frozen=True)
class SuspendedComplex:
    """The decomposed complex Sigma^2 A -> Omega_D^1 x S + Sigma^2 A -> Omega_D^n x S."""

    base: BaseComplex
    index_cap: int
    laurent_cap: int

    @property
    def top_degree(self) -> int:
        return len(self.base.dims) - 1

    def shape(self, degree: int) -> tuple[int, int, int]:
        k = self.index_cap
        omega = self.base.dims[degree] * k * k if degree >= 1 else 0
        rest = self.base.dims[0] * k * k + 2 * self.laurent_cap + 1 if degree <= 1 else 0
        return omega, rest, omega + rest

    def dim(self, degree: int) -> int:
        return self.shape(degree)[2]

    def zero(self, degree: int) -> DecomposedForm:
        k = self.index_cap
        om = self.base.dims[degree] if degree >= 1 else 0
        fin = self.base.dims[0] if degree <= 1 else 0
        lau = 2 * self.laurent_cap + 1 if degree <= 1 else 0
        return DecomposedForm(
            degree,
            np.zeros((om, k, k), dtype=complex),
            np.zeros((fin, k, k), dtype=complex),
            np.zeros(lau, dtype=complex),
        )

    def from_vector(self, degree: int, vec: np.ndarray) -> DecomposedForm:
        z = self.zero(degree)
        a, b = z.omega.size, z.finite.size
        return DecomposedForm(
            degree,
            vec[:a].reshape(z.omega.shape),
            vec[a : a + b].reshape(z.finite.shape),
            vec[a + b :].reshape(z.laurent.shape),
        )

    def random(self, degree: int, rng: np.random.Generator) -> DecomposedForm:
        n = self.dim(degree)
        vec = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        return self.from_vector(degree, vec)

    def laurent_exponents(self) -> np.ndarray:
        return np.arange(-self.laurent_cap, self.laurent_cap + 1)

    def matrix(self, degree: int) -> np.ndarray:
        """delta^degree as a dense matrix, dim(degree + 1) x dim(degree)."""
        n = self.dim(degree)
        cols = [delta_apply(self, self.from_vector(degree, e)).vector() for e in np.eye(n, dtype=complex)]
        return np.asarray(cols).T if cols else np.zeros((self.dim(degree + 1), 0), dtype=complex)


def delta_apply(cx: SuspendedComplex, x: DecomposedForm) -> DecomposedForm:
    """
    The decomposed differential.

    delta^0(a x T + f) = d^0 a x T + (a x [N, T] + f'); delta^1 = d^1 x 1 on the
    Omega_D^1 x S summand and 0 on Sigma^2 A; delta^n = d^n x 1 for n >= 2.
    """
    n = x.degree
    if n >= cx.top_degree:
        raise BudgetError(
            f"delta^{n} needs Omega_D^{n + 1}, beyond the complex's top degree {cx.top_degree}",
            module="forms",
            stage="delta",
        )
    out = cx.zero(n + 1)
    d = cx.base.differentials[n]
    if n == 0:
        idx = np.arange(cx.index_cap)
        commutator = idx[:, None] - idx[None, :]
        omega = np.einsum("qp,pij->qij", d, x.finite)
        finite = x.finite * commutator[None, :, :]
        laurent = -cx.laurent_exponents() * x.laurent
        return DecomposedForm(1, omega, finite, laurent)
    omega = np.einsum("qp,pij->qij", d, x.omega)
    return DecomposedForm(n + 1, omega, out.finite, out.laurent)


def _decomposed_op(cx: SuspendedComplex, x: DecomposedForm, sign_in_front: bool) -> TensorOp:
    """Operator realizing a decomposed form; the Sigma^2 A summand of a 1-form carries F."""
    op = TensorOp()
    k = cx.index_cap
    prefix: Key = (SIGN,) if sign_in_front else ()
    for q in range(x.omega.shape[0]):
        key = cx.base.key(x.degree, q)
        for i in range(k):
            for j in range(k):
                if x.omega[q, i, j] != 0:
                    op = op + TensorOp.single(key, matrix_unit(i, j, x.omega[q, i, j]))
    for p in range(x.finite.shape[0]):
        key = prefix + cx.base.key(0, p)
        for i in range(k):
            for j in range(k):
                if x.finite[p, i, j] != 0:
                    op = op + TensorOp.single(key, matrix_unit(i, j, x.finite[p, i, j]))
    coeffs = {int(e): complex(c) for e, c in zip(cx.laurent_exponents(), x.laurent, strict=True) if c != 0}
    if coeffs:
        op = op + TensorOp.single(prefix, sigma_prime(LaurentPoly(coeffs)))
    return op


def build_suspended_complex(
    st: SuspendedTriple, budget: SuspendedBudget, levels: Sequence[Level], max_degree: int = 2
) -> SuspendedComplex:
    base = build_base_complex(st.base, WordBudget(cap=budget.base_budget), levels, max_degree)
    return SuspendedComplex(base, budget.index_cap, budget.laurent_cap)


def delta_check(
    st: SuspendedTriple,
    cx: SuspendedComplex,
    level: Level,
    samples: int = 50,
    seed: int = 0,
    tol: float = 1e-10,
) -> DeltaCheckReport:
    """
    Compare delta^0 x with [Sigma^2 D, x] modulo compacts and check delta^1 delta^0 = 0.

    Samples are random decomposed 0-forms; the comparison runs on window vectors.
    """
    rng = np.random.default_rng(seed)
    worst_delta, worst_square = 0.0, 0.0
    for _ in range(samples):
        x = cx.random(0, rng)
        y = delta_apply(cx, x)
        realized = dirac_commutator(_decomposed_op(cx, x, sign_in_front=False))
        predicted = _decomposed_op(cx, y, sign_in_front=True)
        got, want = window_vectors(st.base, [[realized], [predicted]], level)
        scale = max(float(np.linalg.norm(got)), 1.0)
        worst_delta = max(worst_delta, float(np.linalg.norm(got - want)) / scale)
        if cx.top_degree >= 2:
            z = delta_apply(cx, y)
            worst_square = max(
                worst_square, float(np.linalg.norm(z.vector())) / max(float(np.linalg.norm(x.vector())), 1.0)
            )
    passed = worst_delta <= tol and worst_square <= tol
    logger.info(
        f"Delta check {st.name}: {samples} samples, max deviation {worst_delta:.2e}, "
        f"max delta^2 residual {worst_square:.2e}"
    )
    return DeltaCheckReport(
        samples=samples,
        max_delta0_deviation=worst_delta,
        max_square_residual=worst_square,
        passed=passed,
    )


def corollary_dims(cx: SuspendedComplex) -> list[int]:
    """Right-hand sides of the suspended cohomology corollary, degrees 0 .. top-1."""
    k = cx.index_cap
    h = cx.base.cohomology()
    dim_a = cx.base.dims[0]
    out = [h[0] * k + 1]
    if len(h) > 1:
        out.append(h[1] * k + dim_a * k + cx.base.kernel_dim(1) * (k * k - k) + 1)
    out += [h[n] * k * k for n in range(2, len(h))]
    return out


def cohomology_dims(
    st: SuspendedTriple,
    budget: SuspendedBudget,
    levels: Sequence[Level],
    cx: SuspendedComplex | None = None,
) -> CohomologyReport:
    """H^n of the decomposed suspended complex by ranks, against the corollary's dimensions."""
    cx = cx or build_suspended_complex(st, budget, levels)
    ranks = [linalg.rank_of_rows(cx.matrix(n)).rank for n in range(cx.top_degree)]
    computed = [
        cx.dim(n) - ranks[n] - (ranks[n - 1] if n > 0 else 0) for n in range(cx.top_degree)
    ]
    expected = corollary_dims(cx)
    degrees = [
        CohomologyDegree(degree=n, computed=c, corollary=e, matches=c == e)
        for n, (c, e) in enumerate(zip(computed, expected, strict=True))
    ]
    logger.info(f"Cohomology of {st.name}: computed {computed}, corollary {expected}")
    return CohomologyReport(
        matrix_cap=budget.index_cap,
        laurent_cap=budget.laurent_cap,
        complex_dims=[cx.dim(n) for n in range(cx.top_degree + 1)],
        base=cx.base.report(),
        degrees=degrees,
    )


# Filtrations


def _check_filtration(triple: SpectralTripleModel, filtration: Sequence[Sequence[str]]) -> None:
    if not filtration:
        raise BudgetError("filtration is empty", module="forms", stage="graded")
    for step, subset in enumerate(filtration):
        if triple.unit not in subset:
            raise BudgetError(f"filtration step {step} lacks the unit", module="forms", stage="graded")
        for s in subset:
            triple.generator(s)
        if step and not set(filtration[step - 1]) <= set(subset):
            raise BudgetError(
                f"filtration step {step} does not contain step {step - 1}", module="forms", stage="graded"
            )


def graded_dims(
    triple: SpectralTripleModel,
    filtration: Sequence[Sequence[str]],
    budget: WordBudget,
    levels: Sequence[Level],
    max_degree: int = 1,
) -> GradedDimsReport:
    """
    dim Omega^p(A_n) / (Omega^p(A_{n-1}) + junk of A_n) for each filtration step n.

    Steps are indexed by list position; the step below the first one is zero.
    """
    _check_filtration(triple, filtration)
    levels = list(levels)
    top = levels[-1]
    entries: list[GradedEntry] = []
    for p in range(max_degree + 1):
        prev_words: list[FormWord] = []
        prev_count = 0
        for step, subset in enumerate(filtration):
            sub_budget = replace(budget, symbols=tuple(subset))
            words = enumerate_words(triple, p, sub_budget)
            kernel = junk_kernel(triple, p, sub_budget, levels)
            margin = max(_max_bandwidth(triple, words), kernel.margin)
            big = evaluate_exprs(triple, words, top, margin)
            small = np.vstack(
                [
                    evaluate_exprs(triple, prev_words, top, margin),
                    evaluate_exprs(triple, kernel.images, top, margin),
                ]
            )
            dim = linalg.rank_of_rows(np.vstack([big, small])).rank - linalg.rank_of_rows(small).rank
            count = len(base_pool(triple, sub_budget))
            entries.append(
                GradedEntry(step=step, degree=p, dim=dim, formula_dim=count - prev_count if p == 0 else None)
            )
            prev_words, prev_count = words, count
    return GradedDimsReport(filtration=[list(s) for s in filtration], entries=entries)


def suspended_graded_dims(
    st: SuspendedTriple,
    filtration: Sequence[Sequence[str]],
    budget: SuspendedBudget,
    levels: Sequence[Level],
) -> GradedDimsReport:
    """
    Graded pieces of the filtration Sigma^2 A_n induced from a base filtration.

    Each entry is the difference of windowed suspended dimensions between consecutive
    steps. The formula side is the difference of decomposition dimensions, so it depends
    only on the base pieces: (Omega^1(A_n) + A_n A_n) x S modulo step n-1 for p = 1 and
    A_n x S modulo step n-1 for p = 0, plus the Laurent part at the first step.
    """
    _check_filtration(st.base, filtration)
    entries: list[GradedEntry] = []
    prev = None
    for step, subset in enumerate(filtration):
        report = suspended_dirac_dims(st, budget, levels, max_degree=1, base_symbols=subset)
        dims = (report.degrees[0].dim_omega_D, report.degrees[1].dim_omega_D)
        formula = (report.degrees[0].formula_dim, report.degrees[1].formula_dim)
        diff, expected = dims, formula
        if prev is not None:
            diff = (dims[0] - prev[0][0], dims[1] - prev[0][1])
            expected = (formula[0] - prev[1][0], formula[1] - prev[1][1])
        for p in (0, 1):
            entries.append(GradedEntry(step=step, degree=p, dim=diff[p], formula_dim=expected[p]))
        prev = (dims, formula)
    return GradedDimsReport(filtration=[list(s) for s in filtration], entries=entries)
