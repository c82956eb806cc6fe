"""Richardson extrapolation on geometric node sequences."""

from collections.abc import Sequence

import numpy as np


def richardson_table(values: Sequence, ratio: float, order: int) -> list[list[np.ndarray]]:
    """
    Build the Richardson tableau for samples taken at t0, t0/ratio, t0/ratio**2, ...

    The model is value(t) = c0 + c1 t + c2 t**2 + ..., so column j removes the t**j term.
    Samples may be scalars or arrays of a common shape; the tableau is linear in them.

    Args:
        values: Samples ordered from the largest t to the smallest.
        ratio: Node ratio (> 1).
        order: Number of eliminated powers.

    Returns:
        Columns 0..order of the tableau; column j has len(values) - j entries.
    """
    columns = [[np.asarray(v) for v in values]]
    for j in range(1, order + 1):
        mult = ratio**j
        prev = columns[-1]
        columns.append(
            [(mult * prev[i + 1] - prev[i]) / (mult - 1.0) for i in range(len(prev) - 1)]
        )
    return columns


def richardson_limit(
    values: Sequence, ratio: float, order: int
) -> tuple[np.ndarray, float, list[float]]:
    """
    Extrapolate samples to t -> 0.

    Returns:
        (value, error_estimate, successive differences of the final column).
        The error estimate is the magnitude of the last difference of the final column.
    """
    if len(values) < order + 2:
        raise ValueError(f"need at least {order + 2} samples for order {order}")
    final = richardson_table(values, ratio, order)[-1]
    diffs = [float(np.max(np.abs(final[i + 1] - final[i]))) for i in range(len(final) - 1)]
    return final[-1], diffs[-1], diffs
