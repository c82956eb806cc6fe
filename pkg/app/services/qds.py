"""Quantum double suspension of algebra models and spectral-triple models.

The suspended algebra splits linearly as (A x S) + C[z, z^-1]: a finitely supported
matrix part and a Laurent part carried through the splitting map sigma'(z^n) = l^n
(n >= 0) or (l*)^|n| (n < 0). Operators on H x l^2(N) are kept as finite sums of
base operators tensored with Toeplitz elements sigma'(f) + S, where S is finitely
supported. The l^2(N) factor is never truncated; it is carried symbolically.
"""

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import partial
from typing import Any

import numpy as np
from scipy import sparse

from app.config import settings
from app.services.errors import BudgetError, ResourceGuardError
from app.services.triple import (
    HeatFactor,
    Level,
    ModeSpace,
    SpectralTripleModel,
    TruncationFamily,
    number_diagonal,
    toeplitz_shift,
)
from app.utils.logger import logger

PRUNE = 1e-13


def _clean(coeffs: dict, scale: float = 1.0) -> dict:
    return {k: v for k, v in coeffs.items() if abs(v) > PRUNE * max(scale, 1.0)}


@dataclass(frozen=True)
class LaurentPoly:
    """Finitely supported map exponent -> coefficient."""

    coeffs: dict[int, complex] = field(default_factory=dict)

    @classmethod
    def monomial(cls, n: int, c: complex = 1.0) -> "LaurentPoly":
        return cls({int(n): complex(c)})

    def is_zero(self) -> bool:
        return not self.coeffs

    def spread(self) -> int:
        """Largest |exponent| in the support."""
        return max((abs(n) for n in self.coeffs), default=0)

    def constant_term(self) -> complex:
        return self.coeffs.get(0, 0.0)

    def __add__(self, other: "LaurentPoly") -> "LaurentPoly":
        out = dict(self.coeffs)
        for n, c in other.coeffs.items():
            out[n] = out.get(n, 0.0) + c
        return LaurentPoly(_clean(out))

    def __sub__(self, other: "LaurentPoly") -> "LaurentPoly":
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> "LaurentPoly":
        return LaurentPoly(_clean({n: c * v for n, v in self.coeffs.items()}))

    def __mul__(self, other: "LaurentPoly") -> "LaurentPoly":
        out: dict[int, complex] = {}
        for n, a in self.coeffs.items():
            for m, b in other.coeffs.items():
                out[n + m] = out.get(n + m, 0.0) + a * b
        return LaurentPoly(_clean(out))

    def star(self) -> "LaurentPoly":
        """f*(z) = conj(f)(z^-1), the symbol of the adjoint."""
        return LaurentPoly({-n: np.conj(c) for n, c in self.coeffs.items()})

    def derivative(self) -> "LaurentPoly":
        """f' = [N, f]: the coefficient of z^n picks up the factor -n."""
        return LaurentPoly(_clean({n: -n * c for n, c in self.coeffs.items()}))

    def toeplitz(self, size: int) -> np.ndarray:
        """sigma'(f) compressed to e_0..e_{size-1}."""
        out = np.zeros((size, size), dtype=complex)
        for n, c in self.coeffs.items():
            out += c * np.eye(size, k=n)
        return out


@dataclass(frozen=True)
class FinMatrix:
    """Finitely supported matrix on l^2(N)."""

    entries: dict[tuple[int, int], complex] = field(default_factory=dict)

    @classmethod
    def unit(cls, i: int, j: int, c: complex = 1.0) -> "FinMatrix":
        return cls({(int(i), int(j)): complex(c)})

    @classmethod
    def from_dense(cls, block: np.ndarray) -> "FinMatrix":
        scale = float(np.max(np.abs(block), initial=0.0))
        rows, cols = np.nonzero(np.abs(block) > PRUNE * max(scale, 1.0))
        return cls({(int(i), int(j)): complex(block[i, j]) for i, j in zip(rows, cols, strict=True)})

    @property
    def bound(self) -> int:
        return max((max(i, j) + 1 for i, j in self.entries), default=0)

    def is_zero(self) -> bool:
        return not self.entries

    def embed(self, size: int) -> np.ndarray:
        if size < self.bound:
            raise BudgetError(f"level {size} below matrix support {self.bound}", module="qds")
        out = np.zeros((size, size), dtype=complex)
        for (i, j), c in self.entries.items():
            out[i, j] = c
        return out

    def __add__(self, other: "FinMatrix") -> "FinMatrix":
        out = dict(self.entries)
        for k, c in other.entries.items():
            out[k] = out.get(k, 0.0) + c
        return FinMatrix(_clean(out))

    def scale(self, c: complex) -> "FinMatrix":
        return FinMatrix(_clean({k: c * v for k, v in self.entries.items()}))

    def __mul__(self, other: "FinMatrix") -> "FinMatrix":
        out: dict[tuple[int, int], complex] = {}
        for (i, j), a in self.entries.items():
            for (k, m), b in other.entries.items():
                if j == k:
                    out[(i, m)] = out.get((i, m), 0.0) + a * b
        return FinMatrix(_clean(out))

    def adjoint(self) -> "FinMatrix":
        return FinMatrix({(j, i): np.conj(c) for (i, j), c in self.entries.items()})

    def number_commutator(self) -> "FinMatrix":
        """[N, S]: entry (i, j) picks up i - j."""
        return FinMatrix(_clean({(i, j): (i - j) * c for (i, j), c in self.entries.items()}))

    def times_number(self) -> "FinMatrix":
        """S N: entry (i, j) picks up j."""
        return FinMatrix(_clean({(i, j): j * c for (i, j), c in self.entries.items()}))

    def diagonal_weight(self, t: float) -> float | complex:
        return sum(c * np.exp(-t * i) for (i, j), c in self.entries.items() if i == j)


@dataclass(frozen=True)
class ToeplitzElement:
    """sigma'(f) + S on l^2(N), S finitely supported."""

    laurent: LaurentPoly = field(default_factory=LaurentPoly)
    finite: FinMatrix = field(default_factory=FinMatrix)

    @classmethod
    def identity(cls) -> "ToeplitzElement":
        return cls(LaurentPoly.monomial(0))

    def is_zero(self) -> bool:
        return self.laurent.is_zero() and self.finite.is_zero()

    def dense(self, size: int) -> np.ndarray:
        return self.laurent.toeplitz(size) + self.finite.embed(size)

    def __add__(self, other: "ToeplitzElement") -> "ToeplitzElement":
        return ToeplitzElement(self.laurent + other.laurent, self.finite + other.finite)

    def scale(self, c: complex) -> "ToeplitzElement":
        return ToeplitzElement(self.laurent.scale(c), self.finite.scale(c))

    def __mul__(self, other: "ToeplitzElement") -> "ToeplitzElement":
        # Multiply honest compressions large enough to be exact on the block that holds
        # the finite part, then re-split against sigma'(fg).
        dx, dy = self.laurent.spread(), other.laurent.spread()
        support = self.finite.bound + other.finite.bound + dx + dy + 1
        size = support + dx + dy + 1
        product = self.dense(size) @ other.dense(size)
        laurent = self.laurent * other.laurent
        residual = product[:support, :support] - laurent.toeplitz(support)
        return ToeplitzElement(laurent, FinMatrix.from_dense(residual))

    def adjoint(self) -> "ToeplitzElement":
        return ToeplitzElement(self.laurent.star(), self.finite.adjoint())

    def number_commutator(self) -> "ToeplitzElement":
        """[N, T] = sigma'(f') + [N, S]."""
        return ToeplitzElement(self.laurent.derivative(), self.finite.number_commutator())

    def heat_trace(self, t: float) -> complex:
        """Tr(T e^{-tN}) in closed form."""
        return self.laurent.constant_term() / (1.0 - np.exp(-t)) + self.finite.diagonal_weight(t)

    def coordinates(self) -> dict[tuple, complex]:
        """Coordinates in the basis {sigma'(z^n)} + {e_ij}; the splitting makes them unique."""
        out: dict[tuple, complex] = {("L", n): c for n, c in self.laurent.coeffs.items()}
        out.update({("S", i, j): c for (i, j), c in self.finite.entries.items()})
        return out


def sigma_prime(f: LaurentPoly) -> ToeplitzElement:
    """The linear splitting C[z, z^-1] -> Toeplitz elements, z^n -> l^n or (l*)^|n|."""
    return ToeplitzElement(f)


def matrix_unit(i: int, j: int, c: complex = 1.0) -> ToeplitzElement:
    return ToeplitzElement(finite=FinMatrix.unit(i, j, c))


# Operators on H x l^2(N)

Atom = tuple  # ("a", symbol) | ("d", symbol) | ("F",)
Key = tuple[Atom, ...]
SIGN: Atom = ("F",)


def join_keys(left: Key, right: Key) -> Key:
    """Concatenate base-operator keys, cancelling adjacent F*F = I."""
    out = list(left)
    for atom in right:
        if atom == SIGN and out and out[-1] == SIGN:
            out.pop()
        else:
            out.append(atom)
    return tuple(out)


@dataclass(frozen=True)
class TensorOp:
    """Finite sum of (base operator key) x (Toeplitz element)."""

    terms: dict[Key, ToeplitzElement] = field(default_factory=dict)

    @classmethod
    def single(cls, key: Key, element: ToeplitzElement) -> "TensorOp":
        return cls({} if element.is_zero() else {key: element})

    @classmethod
    def identity(cls) -> "TensorOp":
        return cls.single((), ToeplitzElement.identity())

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "TensorOp") -> "TensorOp":
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return TensorOp({k: v for k, v in out.items() if not v.is_zero()})

    def scale(self, c: complex) -> "TensorOp":
        if c == 0:
            return TensorOp()
        return TensorOp({k: v.scale(c) for k, v in self.terms.items()})

    def __mul__(self, other: "TensorOp") -> "TensorOp":
        out = TensorOp()
        for k1, t1 in self.terms.items():
            for k2, t2 in other.terms.items():
                out = out + TensorOp.single(join_keys(k1, k2), t1 * t2)
        return out

    def adjoint(self, base_adjoint: dict[str, str]) -> "TensorOp":
        out = TensorOp()
        for key, element in self.terms.items():
            sign, adj = key_adjoint(key, base_adjoint)
            out = out + TensorOp.single(adj, element.adjoint().scale(sign))
        return out

    def keys(self) -> list[Key]:
        return list(self.terms)


def key_adjoint(key: Key, base_adjoint: dict[str, str]) -> tuple[float, Key]:
    """Adjoint of a product of atoms; [D, a]* = -[D, a*]."""
    sign = 1.0
    atoms: list[Atom] = []
    for atom in reversed(key):
        if atom[0] == "a":
            atoms.append(("a", base_adjoint.get(atom[1], atom[1])))
        elif atom[0] == "d":
            sign = -sign
            atoms.append(("d", base_adjoint.get(atom[1], atom[1])))
        else:
            atoms.append(atom)
    return sign, join_keys((), tuple(atoms))


def evaluate_key(base: SpectralTripleModel, key: Key, level: Level) -> sparse.csr_matrix:
    """Base operator of a key at a truncation level."""
    out = base.identity(level)
    for atom in key:
        if atom[0] == "a":
            if atom[1] == base.unit:
                continue
            out = out @ base.operator(atom[1], level)
        elif atom[0] == "d":
            out = out @ base.commutator(atom[1], level)
        else:
            out = out @ base.sign(level)
    return sparse.csr_matrix(out)


def key_bandwidth(base: SpectralTripleModel, key: Key) -> int:
    total = 0
    for atom in key:
        if atom[0] in ("a", "d"):
            total += base.generator(atom[1]).bandwidth or 0
    return total


def dirac_commutator(op: TensorOp) -> TensorOp:
    """
    [D x I + F x N, op] for an operator whose base factors are algebra words.

    [Sigma^2 D, X x T] = [D, X] x T + F X x [N, T] + (F X - X F) x T N; the last term is
    only needed for finitely supported T and vanishes for X = identity. [D, X] is
    expanded by the Leibniz rule over the letters of X.
    """
    out = TensorOp()
    for key, element in op.terms.items():
        if key == ():
            out = out + TensorOp.single((SIGN,), element.number_commutator())
            continue
        if any(atom[0] != "a" for atom in key):
            raise BudgetError(f"commutator of non-algebra key {key}", module="qds")
        if not element.laurent.is_zero():
            raise BudgetError("Laurent part attached to a non-unit base element", module="qds")
        for pos, atom in enumerate(key):
            out = out + TensorOp.single(key[:pos] + (("d", atom[1]),) + key[pos + 1 :], element)
        out = out + TensorOp.single((SIGN,) + key, element.number_commutator())
        tail = ToeplitzElement(finite=element.finite.times_number())
        out = out + TensorOp.single((SIGN,) + key, tail)
        out = out + TensorOp.single(key + (SIGN,), tail.scale(-1.0))
    return out


# Suspended algebra


Letter = tuple  # ("fin", symbol, i, j) | ("lau", n); ("lau", 0) is the unit


def letter_op(letter: Letter, unit: str = "1") -> TensorOp:
    """Operator of a suspended-algebra letter."""
    if letter[0] == "fin":
        _, sym, i, j = letter
        key: Key = () if sym == unit else (("a", sym),)
        return TensorOp.single(key, matrix_unit(i, j))
    return TensorOp.single((), sigma_prime(LaurentPoly.monomial(letter[1])))


def letter_weight(letter: Letter) -> int:
    return abs(letter[1]) if letter[0] == "lau" else 0


def letter_name(letter: Letter) -> str:
    if letter[0] == "fin":
        return f"{letter[1]}⊗e{letter[2]},{letter[3]}"
    n = letter[1]
    if n == 0:
        return "1"
    return f"Z^{n}" if n > 0 else f"Z*^{-n}"


@dataclass(frozen=True)
class SuspendedElement:
    """sum_k a_k x T_k + sigma'(f): finite part over base words plus a Laurent part."""

    finite_part: tuple[tuple[tuple[str, ...], FinMatrix], ...] = ()
    laurent_part: LaurentPoly = field(default_factory=LaurentPoly)

    @classmethod
    def from_letter(cls, letter: Letter, unit: str = "1") -> "SuspendedElement":
        if letter[0] == "fin":
            word = () if letter[1] == unit else (letter[1],)
            return cls(((word, FinMatrix.unit(letter[2], letter[3])),))
        return cls((), LaurentPoly.monomial(letter[1]))

    def to_tensor(self) -> TensorOp:
        out = TensorOp.single((), sigma_prime(self.laurent_part))
        for word, mat in self.finite_part:
            key = tuple(("a", s) for s in word)
            out = out + TensorOp.single(key, ToeplitzElement(finite=mat))
        return out

    @classmethod
    def from_tensor(cls, op: TensorOp) -> "SuspendedElement":
        laurent = LaurentPoly()
        finite: list[tuple[tuple[str, ...], FinMatrix]] = []
        for key, element in op.terms.items():
            if any(atom[0] != "a" for atom in key):
                raise BudgetError(f"key {key} is not an algebra word", module="qds")
            if key == ():
                laurent = element.laurent
            elif not element.laurent.is_zero():
                raise BudgetError("Laurent part attached to a non-unit base word", module="qds")
            if not element.finite.is_zero():
                finite.append((tuple(a[1] for a in key), element.finite))
        return cls(tuple(sorted(finite, key=lambda item: item[0])), laurent)

    def __mul__(self, other: "SuspendedElement") -> "SuspendedElement":
        return SuspendedElement.from_tensor(self.to_tensor() * other.to_tensor())

    def __add__(self, other: "SuspendedElement") -> "SuspendedElement":
        return SuspendedElement.from_tensor(self.to_tensor() + other.to_tensor())


def rho_symbol(x: SuspendedElement) -> LaurentPoly:
    """Symbol map onto C[z, z^-1]; it vanishes on the finite part."""
    return x.laurent_part


@dataclass(frozen=True)
class SuspendedAlgebra:
    """Generator set of the finitely supported suspended algebra."""

    base_symbols: tuple[str, ...]
    index_cap: int
    unit: str = "1"

    def finite_letters(self, symbols: Iterable[str] | None = None) -> list[Letter]:
        pool = self.base_symbols if symbols is None else tuple(symbols)
        return [
            ("fin", s, i, j) for s in pool for i in range(self.index_cap) for j in range(self.index_cap)
        ]

    def laurent_letters(self, cap: int) -> list[Letter]:
        return [("lau", n) for m in range(1, cap + 1) for n in (m, -m)]

    def symbols(self) -> list[str]:
        return [letter_name(x) for x in self.finite_letters()] + ["Z", "Z*"]

    def element(self, name: str) -> SuspendedElement:
        if name == "Z":
            return SuspendedElement.from_letter(("lau", 1), self.unit)
        if name == "Z*":
            return SuspendedElement.from_letter(("lau", -1), self.unit)
        if name == "u":
            one = SuspendedElement((), LaurentPoly.monomial(0))
            zz = self.element("Z*") * self.element("Z")
            return one + SuspendedElement.from_tensor(zz.to_tensor().scale(-1.0))
        for letter in self.finite_letters():
            if letter_name(letter) == name:
                return SuspendedElement.from_letter(letter, self.unit)
        raise BudgetError(f"unknown suspended generator '{name}'", module="qds")


def suspend_algebra(
    base_generators: Sequence[str], inner_cutoff: int, index_cap: int | None = None, unit: str = "1"
) -> SuspendedAlgebra:
    """Generators {a x e_ij} with i, j below the index cap, plus Z = 1 x l and Z* = 1 x l*."""
    if not base_generators:
        raise BudgetError("base generator list is empty", module="qds", stage="suspend-algebra")
    if unit not in base_generators:
        raise BudgetError("base generator list must contain the unit", module="qds", stage="suspend-algebra")
    cap = inner_cutoff // 2 if index_cap is None else index_cap
    return SuspendedAlgebra(tuple(base_generators), cap, unit)


# Realized suspended triple


def _unit_matrix(size: int, i: int, j: int) -> sparse.spmatrix:
    return sparse.csr_matrix(([1.0 + 0j], ([i], [j])), shape=(size, size))


def _kron_rule(level: Level, family: TruncationFamily, i: int, j: int) -> sparse.spmatrix:
    base_level, k = level
    return sparse.kron(family.sparse(base_level), _unit_matrix(k, i, j), format="csr")


def _shift_rule(level: Level, base: SpectralTripleModel, n: int) -> sparse.spmatrix:
    base_level, k = level
    return sparse.kron(base.identity(base_level), toeplitz_shift(k, n), format="csr")


def _unit_rule(level: Level, base: SpectralTripleModel) -> sparse.spmatrix:
    base_level, k = level
    return sparse.identity(base.dim(base_level) * k, dtype=complex, format="csr")


def _suspended_dirac(level: Level, base: SpectralTripleModel) -> sparse.spmatrix:
    base_level, k = level
    n = np.arange(k, dtype=float)
    diag = np.kron(base.dirac_diagonal(base_level), np.ones(k)) + np.kron(
        base.sign_diagonal(base_level), n
    )
    return sparse.diags(diag.astype(complex), format="csr")


@dataclass(frozen=True)
class SuspendedTriple:
    """A base triple, its suspended algebra and the realized Sigma^2 triple."""

    base: SpectralTripleModel
    inner_cutoff: int
    algebra: SuspendedAlgebra
    model: SpectralTripleModel

    @property
    def p(self) -> float:
        return self.model.p

    @property
    def name(self) -> str:
        return self.model.name

    def eigenvalue_layout(self, base_level: Level, k: int | None = None) -> list[dict[str, Any]]:
        """Eigenvalue n + sign(n) m of the suspended Dirac on each basis mode (n, m)."""
        k = self.inner_cutoff if k is None else k
        diag = self.model.dirac_diagonal((base_level, k))
        base_d = self.base.dirac_diagonal(base_level)
        return [
            {"base": float(base_d[i // k]), "m": i % k, "eigenvalue": float(v)}
            for i, v in enumerate(diag)
        ]


def suspend_triple(
    base: SpectralTripleModel,
    inner_cutoff: int,
    index_cap: int | None = None,
    max_dim: int | None = None,
) -> SuspendedTriple:
    """
    Sigma^2 of a triple: generators a x e_ij and 1 x l, Dirac D x I + F x N, p + 1.

    Args:
        base: Base triple model.
        inner_cutoff: Truncation of the l^2(N) factor in the realized model (>= 4).
        index_cap: Matrix-unit index cap (defaults to inner_cutoff // 2).
        max_dim: Ambient dimension cap for the realized model.

    Returns:
        SuspendedTriple whose realized model works at levels (base level, K).
    """
    if inner_cutoff < 4:
        raise BudgetError("inner cutoff must be at least 4", module="qds", stage="suspend-triple")
    cap = inner_cutoff // 2 if index_cap is None else index_cap
    if cap < 1 or 2 * cap > inner_cutoff:
        raise BudgetError(
            f"matrix-unit cap {cap} must lie in 1..{inner_cutoff // 2}",
            module="qds",
            stage="suspend-triple",
        )
    algebra = suspend_algebra(base.symbols(), inner_cutoff, cap, base.unit)
    generators: dict[str, TruncationFamily] = {
        base.unit: TruncationFamily(base.unit, partial(_unit_rule, base=base), 0, 0, base.unit)
    }
    for letter in algebra.finite_letters():
        _, sym, i, j = letter
        g = base.generator(sym)
        name = letter_name(letter)
        generators[name] = TruncationFamily(
            symbol=name,
            rule=partial(_kron_rule, family=g, i=i, j=j),
            bandwidth=None if g.bandwidth is None else max(g.bandwidth, abs(i - j)),
            weight=g.weight,
            adjoint=letter_name(("fin", base.adjoint_symbol(sym), j, i)),
        )
    generators["Z"] = TruncationFamily("Z", partial(_shift_rule, base=base, n=1), 1, 1, "Z*")
    generators["Z*"] = TruncationFamily("Z*", partial(_shift_rule, base=base, n=-1), 1, 1, "Z")

    notes = dict(base.notes)
    notes["grading"] = "evenness not propagated" if base.grading is not None else "none"
    nat = ModeSpace("naturals")
    model = SpectralTripleModel(
        name=f"suspension({base.name})",
        space=ModeSpace("product", factors=(base.space, nat)),
        generators=generators,
        dirac=TruncationFamily("D", partial(_suspended_dirac, base=base)),
        p=base.p + 1,
        min_level=(base.min_level, inner_cutoff),
        heat_factors=base.heat_factors + (HeatFactor(nat, number_diagonal, None, inner_cutoff),),
        grading=None,
        sign_zero_convention=base.sign_zero_convention,
        unit=base.unit,
        notes=notes,
    )
    cap_dim = settings.max_dim if max_dim is None else max_dim
    ambient = model.dim(model.min_level)
    if ambient > cap_dim:
        raise ResourceGuardError(
            f"realized suspension has ambient dimension {ambient} > cap {cap_dim}",
            module="qds",
            stage="suspend-triple",
        )
    logger.info(
        f"Suspended {base.name}: {len(generators)} generators, ambient dim {ambient}, p={model.p}"
    )
    return SuspendedTriple(base=base, inner_cutoff=inner_cutoff, algebra=algebra, model=model)


def iterate_suspension(
    base: SpectralTripleModel,
    k: int,
    cutoffs: Sequence[int],
    index_caps: Sequence[int] | None = None,
    max_dim: int | None = None,
) -> SuspendedTriple:
    """Apply suspend_triple k times; each layer takes the previous realized model as base."""
    if k < 1 or len(cutoffs) != k:
        raise BudgetError(f"need k >= 1 and {k} cutoffs, got {len(cutoffs)}", module="qds")
    caps = list(index_caps) if index_caps is not None else [None] * k
    current = base
    result: SuspendedTriple | None = None
    for cutoff, cap in zip(cutoffs, caps, strict=True):
        result = suspend_triple(current, cutoff, cap, max_dim)
        current = result.model
    assert result is not None
    return result
