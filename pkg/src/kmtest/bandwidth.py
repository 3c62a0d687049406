"""Median-heuristic bandwidth for the Gaussian, Laplacian and Matern kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .data import DataError, TwoSampleData

ALL = "all"
UNCENSORED = "uncensored"
SQRT_HALF = "sqrt_half"
SQRT = "sqrt"


class BandwidthError(DataError):
    pass


@dataclass(frozen=True)
class BandwidthRule:
    """``variant`` picks the eligible points, ``scaling`` maps H to sigma.

    With H the median squared pairwise distance, ``sqrt_half`` gives
    sigma = sqrt(H / 2) and ``sqrt`` gives sigma = sqrt(H).
    """

    variant: str = UNCENSORED
    scaling: str = SQRT_HALF

    def __post_init__(self):
        if self.variant not in (ALL, UNCENSORED):
            raise BandwidthError(f"unknown bandwidth variant {self.variant!r}")
        if self.scaling not in (SQRT_HALF, SQRT):
            raise BandwidthError(f"unknown bandwidth scaling {self.scaling!r}")


def median_heuristic_points(points: np.ndarray, event: np.ndarray, rule: BandwidthRule = BandwidthRule()) -> float:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if rule.variant == UNCENSORED:
        points = points[np.asarray(event, dtype=bool)]
    if points.shape[0] < 2:
        raise BandwidthError(f"median heuristic needs at least 2 eligible points, got {points.shape[0]}")
    h = float(np.median(pdist(points, "sqeuclidean")))
    if not h > 0:
        raise BandwidthError("degenerate bandwidth: median squared distance is zero")
    return float(np.sqrt(h / 2 if rule.scaling == SQRT_HALF else h))


def median_heuristic(data: TwoSampleData, rule: BandwidthRule = BandwidthRule()) -> float:
    """Bandwidth from the pooled sample of both groups."""
    points, event, _ = data.pooled()
    return median_heuristic_points(points, event, rule)
