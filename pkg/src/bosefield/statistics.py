"""Error estimates for correlated Monte Carlo series."""

import math

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from pydantic import Field
from typing_extensions import Annotated

from bosefield.exceptions import BFInsufficientData
from bosefield.models import BoseFieldBaseModel

MIN_BLOCKS = 32


class BlockingResult(BoseFieldBaseModel):
    """Outcome of a blocking analysis."""

    mean: float
    error: Annotated[float, Field(ge=0, description="standard error of the mean")]
    level_errors: list[float]
    level_error_uncertainties: list[float]
    plateau_level: int
    converged: bool

    @property
    def naive_error(self) -> float:
        """Return the error that ignores correlations."""
        return self.level_errors[0]


def blocking_analysis(series: NDArray, min_blocks: int = MIN_BLOCKS) -> BlockingResult:
    """Estimate the standard error of the mean of a correlated series.

    The series is repeatedly halved by averaging neighbouring pairs. The error estimate at
    each level is std / sqrt(n) with its own uncertainty; the first level whose successor
    agrees with it within that uncertainty is the plateau. Without a plateau the largest
    estimate is returned and `converged` is False.
    """
    data = np.asarray(series, dtype=np.float64)
    if data.ndim != 1 or data.size < 2:
        msg = f"Blocking needs a 1D series of length >= 2, got shape {data.shape}"
        raise BFInsufficientData(msg)

    mean = float(np.mean(data))
    errors: list[float] = []
    uncertainties: list[float] = []
    while data.size >= max(min_blocks, 2):
        n = data.size
        error = float(np.std(data, ddof=1)) / math.sqrt(n)
        errors.append(error)
        uncertainties.append(error / math.sqrt(2.0 * (n - 1)))
        half = n // 2
        data = 0.5 * (data[0 : 2 * half : 2] + data[1 : 2 * half : 2])
    if not errors:
        n = data.size
        errors.append(float(np.std(data, ddof=1)) / math.sqrt(n))
        uncertainties.append(errors[0] / math.sqrt(2.0 * (n - 1)))

    plateau = None
    for level in range(len(errors) - 1):
        if errors[level + 1] - errors[level] <= uncertainties[level]:
            plateau = level
            break

    if plateau is None:
        plateau = int(np.argmax(errors))
        logger.debug("Blocking plateau not reached over {} levels", len(errors))
    return BlockingResult(
        mean=mean,
        error=errors[plateau],
        level_errors=errors,
        level_error_uncertainties=uncertainties,
        plateau_level=plateau,
        converged=plateau < len(errors) - 1,
    )


def blocked_error(series: NDArray) -> float:
    """Return the blocked standard error of the mean of `series`."""
    return blocking_analysis(series).error
