"""Declarative triples: sympy expressions in the mode label n."""

from collections.abc import Callable
from functools import partial
from typing import Any

import numpy as np
from scipy import sparse
from sympy import Symbol, lambdify, sympify

from app.providers.base import TripleProvider
from app.services.errors import ScenarioValidationError
from app.services.triple import (
    HeatFactor,
    Level,
    ModeSpace,
    SpectralTripleModel,
    TruncationFamily,
)
from app.utils.logger import logger

n = Symbol("n", integer=True)


def compile_expression(text: str | float | int) -> Callable[[np.ndarray], np.ndarray]:
    """Turn an expression in n into a vectorized function of the label array."""
    try:
        expr = sympify(text)
    except Exception as e:
        raise ScenarioValidationError(
            f"cannot parse expression '{text}': {e}", module="triple", stage="declarative"
        ) from e
    extra = expr.free_symbols - {n}
    if extra:
        raise ScenarioValidationError(
            f"expression '{text}' uses unknown symbols {sorted(map(str, extra))}",
            module="triple",
            stage="declarative",
        )
    func = lambdify((n,), expr, "numpy")

    def evaluate(labels: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(func(labels.astype(float)), dtype=complex), labels.shape).copy()

    return evaluate


def _banded_rule(
    level: Level, space: ModeSpace, bands: tuple[tuple[int, Callable], ...]
) -> sparse.spmatrix:
    # offset k sends e_n to f_k(n) e_{n+k}
    labels = space.labels(level)
    dim = labels.size
    out = sparse.csr_matrix((dim, dim), dtype=complex)
    for k, func in bands:
        if abs(k) >= dim:
            continue
        cols = np.arange(max(0, -k), dim - max(0, k))
        out = out + sparse.diags(func(labels[cols]), -k, shape=(dim, dim), format="csr")
    return out


def _diagonal_values(level: Level, space: ModeSpace, func: Callable) -> np.ndarray:
    return np.real(func(space.labels(level)))


def _abs_values(level: Level, space: ModeSpace, func: Callable) -> np.ndarray:
    return np.abs(_diagonal_values(level, space, func))


def _sign_values(level: Level, space: ModeSpace, func: Callable, convention: int) -> np.ndarray:
    d = _diagonal_values(level, space, func)
    return np.where(d > 0, 1.0, np.where(d < 0, -1.0, float(convention)))


def _dirac_rule(level: Level, space: ModeSpace, func: Callable) -> sparse.spmatrix:
    return sparse.diags(_diagonal_values(level, space, func).astype(complex), format="csr")


class DeclarativeProvider(TripleProvider):
    """
    Triple from a declarative rule set.

    Parameters:
        space: "integers", "naturals" or "finite" (with "size").
        cutoff: Smallest truncation level.
        dirac: Expression in n for the Dirac eigenvalue on mode n.
        p: Summability exponent.
        generators: {symbol: {"bands": {offset: expression}, "weight": int, "adjoint": str}}.
    """

    name = "declarative"

    def build(self, params: dict[str, Any]) -> SpectralTripleModel:
        merged = {**self.default_params(), **params}
        kind = merged["space"]
        if kind not in ("integers", "naturals", "finite"):
            raise ScenarioValidationError(
                f"unknown mode space '{kind}'", module="triple", stage="declarative"
            )
        space = ModeSpace(kind, size=int(merged.get("size", 0)))
        unit = merged.get("unit", "1")
        generators = {
            unit: TruncationFamily(
                unit, partial(_banded_rule, space=space, bands=((0, compile_expression(1)),)), 0, 0, unit
            )
        }
        for symbol, rule in merged["generators"].items():
            bands = tuple(
                (int(k), compile_expression(expr)) for k, expr in sorted(rule["bands"].items())
            )
            bandwidth = max((abs(k) for k, _ in bands), default=0)
            generators[symbol] = TruncationFamily(
                symbol=symbol,
                rule=partial(_banded_rule, space=space, bands=bands),
                bandwidth=bandwidth,
                weight=int(rule.get("weight", bandwidth)),
                adjoint=rule.get("adjoint"),
            )
        dirac_func = compile_expression(merged["dirac"])
        convention = int(merged.get("sign_zero_convention", 1))
        cutoff = int(merged["cutoff"])
        heat = HeatFactor(
            space,
            partial(_abs_values, space=space, func=dirac_func),
            partial(_sign_values, space=space, func=dirac_func, convention=convention),
            cutoff,
        )
        logger.info(f"Declarative triple '{merged['name']}': {len(generators)} generators on {kind}")
        return SpectralTripleModel(
            name=merged["name"],
            space=space,
            generators=generators,
            dirac=TruncationFamily("D", partial(_dirac_rule, space=space, func=dirac_func)),
            p=float(merged["p"]),
            min_level=cutoff,
            heat_factors=(heat,),
            sign_zero_convention=convention,
            unit=unit,
        )

    def default_params(self) -> dict[str, Any]:
        return {
            "name": "declarative",
            "space": "integers",
            "cutoff": 16,
            "dirac": "n",
            "p": 1.0,
            "generators": {},
        }
