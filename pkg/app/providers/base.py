"""Base provider interface."""

from abc import ABC, abstractmethod
from typing import Any

from app.services.triple import SpectralTripleModel


class TripleProvider(ABC):
    """Abstract base class for spectral triple providers."""

    name: str = ""

    @abstractmethod
    def build(self, params: dict[str, Any]) -> SpectralTripleModel:
        """
        Build a triple model.

        Args:
            params: Provider parameters (cutoffs, caps or declarative rules).

        Returns:
            SpectralTripleModel instance.
        """
        pass

    @abstractmethod
    def default_params(self) -> dict[str, Any]:
        """
        Parameters used when a scenario gives none.

        Returns:
            Dictionary of provider parameters.
        """
        pass

    def is_available(self) -> bool:
        """
        Check if the provider can build triples in this environment.

        Returns:
            True if provider is available, False otherwise.
        """
        return True
