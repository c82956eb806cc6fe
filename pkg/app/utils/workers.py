"""Bounded worker pool for independent per-level computations."""

from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from app.config import settings

T = TypeVar("T")
R = TypeVar("R")


def map_levels(func: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Map over items on at most SPECTRAL_DGA_THREADS workers; results keep input order."""
    items = list(items)
    if len(items) <= 1 or settings.spectral_dga_threads == 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=settings.spectral_dga_threads) as pool:
        return list(pool.map(func, items))
