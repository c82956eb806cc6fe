"""Provider factory for scenario-driven triple construction."""

from app.providers.base import TripleProvider
from app.providers.builtin import CircleProvider, LaurentProvider, TwoPointProvider
from app.providers.declarative import DeclarativeProvider
from app.services.errors import ScenarioValidationError
from app.utils.logger import logger

PROVIDERS: dict[str, type[TripleProvider]] = {
    "circle": CircleProvider,
    "two_point": TwoPointProvider,
    "laurent": LaurentProvider,
    "declarative": DeclarativeProvider,
}


def get_triple_provider(name: str) -> TripleProvider:
    """
    Factory function to get a triple provider by name.

    Args:
        name: Built-in name ("circle", "two_point", "laurent") or "declarative".

    Returns:
        TripleProvider instance.
    """
    key = name.lower().replace("-", "_")
    provider_cls = PROVIDERS.get(key)
    if provider_cls is None:
        raise ScenarioValidationError(
            f"unknown triple provider '{name}' (choose from {sorted(PROVIDERS)})",
            module="harness",
            stage="provider",
        )
    logger.info(f"Using {provider_cls.__name__}")
    return provider_cls()
