"""Built-in triple providers."""

from typing import Any

from app.providers.base import TripleProvider
from app.services.triple import (
    SpectralTripleModel,
    make_circle_triple,
    make_laurent_triple,
    make_two_point_triple,
)


class CircleProvider(TripleProvider):
    """Truncated circle triple with Fourier cutoff and degree cap."""

    name = "circle"

    def build(self, params: dict[str, Any]) -> SpectralTripleModel:
        merged = {**self.default_params(), **params}
        return make_circle_triple(int(merged["fourier_cutoff"]), int(merged["degree_cap"]))

    def default_params(self) -> dict[str, Any]:
        return {"fourier_cutoff": 24, "degree_cap": 6}


class TwoPointProvider(TripleProvider):
    """C^2 on C^2 with D = diag(-1, 1)."""

    name = "two_point"

    def build(self, params: dict[str, Any]) -> SpectralTripleModel:
        return make_two_point_triple()

    def default_params(self) -> dict[str, Any]:
        return {}


class LaurentProvider(TripleProvider):
    """Laurent polynomials through the Toeplitz splitting map, D = N."""

    name = "laurent"

    def build(self, params: dict[str, Any]) -> SpectralTripleModel:
        merged = {**self.default_params(), **params}
        return make_laurent_triple(int(merged["cutoff"]), int(merged["degree_cap"]))

    def default_params(self) -> dict[str, Any]:
        return {"cutoff": 24, "degree_cap": 3}
