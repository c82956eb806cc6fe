"""Spectral triple providers."""

from app.providers.base import TripleProvider
from app.providers.builtin import CircleProvider, LaurentProvider, TwoPointProvider
from app.providers.declarative import DeclarativeProvider
from app.providers.factory import get_triple_provider

__all__ = [
    "TripleProvider",
    "CircleProvider",
    "TwoPointProvider",
    "LaurentProvider",
    "DeclarativeProvider",
    "get_triple_provider",
]
