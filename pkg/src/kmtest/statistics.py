"""Kaplan-Meier weighted energy distance and MMD statistics.

Every statistic is built from three weighted averages of a pair function h,

    within_j = sum_{i,k} W^j_i W^j_k h(X_ji, X_jk) / sum_{i,k} W^j_i W^j_k
    cross    = sum_{i,k} W^0_i W^1_k h(X_0i, X_1k) / sum_{i,k} W^0_i W^1_k

combined as ``2 cross - within_0 - within_1`` for energy (h a distance) and
``within_0 + within_1 - 2 cross`` for MMD (h a kernel). The U form drops the
diagonal pairs from the within averages; the unnormalized V form omits all
denominators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .data import CensoredSample, DataError, TwoSampleData, order_sample
from .kernels import KernelSpec, gram
from .weights import WeightedSample, km_weights

U = "u"
V = "v"
UNNORMALIZED_V = "unnormalized_v"
FORMS = (U, V, UNNORMALIZED_V)

PairFunction = Union[KernelSpec, Callable[[np.ndarray, np.ndarray], np.ndarray]]


class StatisticError(DataError):
    pass


@dataclass(frozen=True)
class StatisticSpec:
    kernel: KernelSpec
    form: str = V

    def __post_init__(self):
        if self.form not in FORMS:
            raise StatisticError(f"unknown statistic form {self.form!r}")

    @property
    def measure(self) -> str:
        return "energy" if self.kernel.is_energy else "mmd"

    @property
    def min_events(self) -> int:
        """Fewest events per group for which the statistic is defined."""
        return 2 if self.form == U else 1

    def describe(self) -> dict:
        return {"form": self.form, "measure": self.measure, "kernel": self.kernel.kind, "params": self.kernel.params()}


@dataclass(frozen=True)
class StatisticValue:
    raw: float
    n0: int
    n1: int

    @property
    def scaled(self) -> float:
        return scale_factor(self.n0, self.n1) * self.raw


def scale_factor(n0: int, n1: int) -> float:
    return n0 * n1 / (n0 + n1)


def _pair_matrix(h: PairFunction, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if isinstance(h, KernelSpec):
        return gram(h, x, y)
    return np.asarray(h(x, y), dtype=float)


def cross_term(w0: WeightedSample, w1: WeightedSample, h: PairFunction) -> float:
    """Weighted average of ``h`` over the cross product of the two samples."""
    a, b = w0.weights, w1.weights
    norm = a.sum() * b.sum()
    if not norm > 0:
        raise StatisticError("cross term normalizer is zero")
    ia, ib = np.flatnonzero(a), np.flatnonzero(b)
    k = _pair_matrix(h, w0.points[ia], w1.points[ib])
    return float(a[ia] @ k @ b[ib] / norm)


def within_term(w: WeightedSample, h: PairFunction, exclude_diagonal: bool) -> float:
    """Weighted average of ``h`` over pairs of one sample.

    The diagonal pairs are dropped when ``exclude_diagonal`` (U form).
    """
    idx = np.flatnonzero(w.weights)
    a = w.weights[idx]
    k = _pair_matrix(h, w.points[idx], w.points[idx])
    total = a.sum()
    num = a @ k @ a
    norm = total * total
    if exclude_diagonal:
        num -= np.sum(a * a * np.diag(k))
        norm -= np.sum(a * a)
    if not norm > 0:
        raise StatisticError(
            "within-group normalizer is zero" + (" (U form needs at least two events)" if exclude_diagonal else "")
        )
    return float(num / norm)


def compute_statistic(spec: StatisticSpec, w0: WeightedSample, w1: WeightedSample) -> StatisticValue:
    """Raw and scaled statistic for two weighted samples."""
    h = spec.kernel
    if h.needs_bandwidth:
        raise StatisticError("kernel bandwidth is 'auto'; resolve it first")
    n0, n1 = w0.n, w1.n
    # fixed evaluation order makes the value exactly symmetric in (w0, w1)
    if _order_key(w1) < _order_key(w0):
        w0, w1 = w1, w0
    if spec.form == UNNORMALIZED_V:
        s0, s1 = w0.weight_sum, w1.weight_sum
        cross = cross_term(w0, w1, h) * s0 * s1
        in0 = within_term(w0, h, False) * s0 * s0
        in1 = within_term(w1, h, False) * s1 * s1
    else:
        excl = spec.form == U
        cross = cross_term(w0, w1, h)
        in0 = within_term(w0, h, excl)
        in1 = within_term(w1, h, excl)
    raw = 2 * cross - (in0 + in1) if h.is_energy else (in0 + in1) - 2 * cross
    return StatisticValue(float(raw), n0, n1)


def _order_key(w: WeightedSample) -> tuple:
    return (w.n, w.points.tobytes(), w.events.tobytes(), w.weights.tobytes())


def weigh(sample: CensoredSample) -> WeightedSample:
    """Order a sample and attach its Kaplan-Meier weights."""
    return km_weights(order_sample(sample)[0])


def statistic(spec: StatisticSpec, data: TwoSampleData) -> StatisticValue:
    """Statistic on raw two-sample data; covariates, when present, join the time in each point."""
    return compute_statistic(spec, weigh(data.group0), weigh(data.group1))


def compute_statistic_multivariate(spec: StatisticSpec, data: TwoSampleData) -> StatisticValue:
    if data.group0.covariates is None:
        raise StatisticError("multivariate statistic needs covariates")
    return statistic(spec, data)


def batched_raw(
    k: np.ndarray,
    diag: np.ndarray,
    w0: np.ndarray,
    w1: np.ndarray,
    form: str,
    energy: bool,
) -> np.ndarray:
    """Raw statistic for many weight assignments over one fixed Gram matrix.

    ``k`` is the (m, m) matrix of h over the pooled points, ``w0``/``w1`` are
    (B, m) weight matrices (zero outside each group). Rows whose normalizers
    vanish come back as NaN.
    """
    k0, k1 = w0 @ k, w1 @ k
    a00 = np.einsum("bi,bi->b", k0, w0)
    a11 = np.einsum("bi,bi->b", k1, w1)
    # both orderings so that swapping the groups gives bit-identical values
    a01 = 0.5 * (np.einsum("bi,bi->b", k0, w1) + np.einsum("bi,bi->b", k1, w0))
    s0 = w0.sum(axis=1)
    s1 = w1.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        if form == UNNORMALIZED_V:
            cross, in0, in1 = a01, a00, a11
        elif form == V:
            cross, in0, in1 = a01 / (s0 * s1), a00 / (s0 * s0), a11 / (s1 * s1)
        else:
            q0 = np.einsum("bi,bi->b", w0 * w0, np.broadcast_to(diag, w0.shape))
            q1 = np.einsum("bi,bi->b", w1 * w1, np.broadcast_to(diag, w1.shape))
            n0 = s0 * s0 - np.einsum("bi,bi->b", w0, w0)
            n1 = s1 * s1 - np.einsum("bi,bi->b", w1, w1)
            cross = a01 / (s0 * s1)
            in0 = np.where(n0 > 0, (a00 - q0) / n0, np.nan)
            in1 = np.where(n1 > 0, (a11 - q1) / n1, np.nan)
        raw = 2 * cross - (in0 + in1) if energy else (in0 + in1) - 2 * cross
    return np.where((s0 > 0) & (s1 > 0), raw, np.nan)
