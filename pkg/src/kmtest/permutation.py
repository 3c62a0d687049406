"""Permutation calibration of the censored two-sample statistics."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .bandwidth import BandwidthRule, median_heuristic
from .data import DataError, TwoSampleData
from .kernels import gram
from .statistics import StatisticSpec, StatisticValue, batched_raw
from .weights import masked_km_weights

EXACT = "exact"
MONTE_CARLO = "monte_carlo"
AUTO = "auto"

BLOCK = 256
MAX_DEGENERATE_FRACTION = 0.5


class PermutationError(DataError):
    pass


@dataclass(frozen=True)
class PermutationPlan:
    """How to calibrate: ``auto`` enumerates exactly when C(n, n0) <= exact_threshold."""

    mode: str = AUTO
    permutations: int = 1000
    seed: int = 0
    exact_threshold: int = 200_000
    workers: int = 1

    def __post_init__(self):
        if self.mode not in (AUTO, EXACT, MONTE_CARLO):
            raise PermutationError(f"unknown permutation mode {self.mode!r}")
        if self.permutations < 1:
            raise PermutationError("need at least one permutation")
        if not 0 <= self.seed < 2**64:
            raise PermutationError("seed must be a 64-bit unsigned integer")

    def resolve(self, n: int, n0: int) -> str:
        if self.mode != AUTO:
            return self.mode
        return EXACT if math.comb(n, n0) <= self.exact_threshold else MONTE_CARLO


@dataclass(frozen=True)
class TestResult:
    statistic: StatisticValue
    p_value: float
    n_permutations: int
    mode: str
    spec: StatisticSpec
    group_sizes: tuple[int, int]
    sigma: float | None = None
    n_exceed: int = 0
    n_degenerate: int = 0
    seed: int | None = None
    labels: tuple[str, str] = ("", "")
    extra: dict = field(default_factory=dict, compare=False)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self) -> dict:
        return {
            **self.spec.describe(),
            "statistic": self.statistic.raw,
            "scaled_statistic": self.statistic.scaled,
            "p_value": self.p_value,
            "mode": self.mode,
            "n_permutations": self.n_permutations,
            "n_exceed": self.n_exceed,
            "n_degenerate": self.n_degenerate,
            "sigma_used": self.sigma,
            "group_sizes": list(self.group_sizes),
            "group_labels": list(self.labels),
            "seed": self.seed,
        }


def enumerate_assignments(n: int, n0: int, threshold: int | None = None) -> Iterator[tuple[int, ...]]:
    """All n0-subsets of range(n) in lexicographic order."""
    if not 0 < n0 < n:
        raise PermutationError(f"need 0 < n0 < n, got n={n}, n0={n0}")
    total = math.comb(n, n0)
    if threshold is not None and total > threshold:
        raise PermutationError(f"C({n}, {n0}) = {total} exceeds the exact-enumeration threshold {threshold}")
    return itertools.combinations(range(n), n0)


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for permutation block ``block``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


class PermutationEngine:
    """Re-evaluates one statistic under arbitrary group assignments.

    The pooled sample is ordered once and the pair matrix over the pooled
    uncensored points is computed once; each assignment only re-derives the
    Kaplan-Meier weights of the two groups.
    """

    def __init__(self, data: TwoSampleData, spec: StatisticSpec):
        if spec.kernel.needs_bandwidth:
            raise PermutationError("kernel bandwidth is 'auto'; resolve it first")
        self.spec = spec
        self.n0, self.n1 = data.sizes
        self.n = self.n0 + self.n1
        pts, event, group = data.pooled()
        self.order = np.lexsort((~event, pts[:, 0]))
        self.rank = np.empty(self.n, dtype=int)
        self.rank[self.order] = np.arange(self.n)
        self.event = event[self.order]
        self.events_idx = np.flatnonzero(self.event)
        ev_pts = pts[self.order][self.events_idx]
        self.k = gram(spec.kernel, ev_pts)
        self.diag = np.diag(self.k).copy()
        self.scale = float(np.max(np.abs(self.k))) if self.k.size else 1.0
        self.observed_mask = (group[self.order] == 0)[None, :]

    def masks_from_subsets(self, subsets: np.ndarray) -> np.ndarray:
        """Masks (in pooled sorted order) for group-0 index subsets of the pooled input order."""
        subsets = np.atleast_2d(subsets)
        masks = np.zeros((subsets.shape[0], self.n), dtype=bool)
        np.put_along_axis(masks, self.rank[subsets], True, axis=1)
        return masks

    def evaluate(self, masks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Raw statistics and degenerate flags for a (B, n) block of group-0 masks."""
        w0 = masked_km_weights(self.event, masks)[:, self.events_idx]
        w1 = masked_km_weights(self.event, ~masks)[:, self.events_idx]
        raw = batched_raw(self.k, self.diag, w0, w1, self.spec.form, self.spec.kernel.is_energy)
        ev0 = (masks & self.event).sum(axis=1)
        ev1 = self.event.sum() - ev0
        m = self.spec.min_events
        degenerate = (ev0 < m) | (ev1 < m) | ~np.isfinite(raw)
        return raw, degenerate

    def observed(self) -> float:
        raw, bad = self.evaluate(self.observed_mask)
        if bad[0]:
            raise PermutationError(
                f"statistic undefined on the observed groups (each group needs at least {self.spec.min_events} event(s))"
            )
        return float(raw[0])

    def random_masks(self, seed: int, block: int, size: int) -> np.ndarray:
        u = block_generator(seed, block).random((size, self.n))
        chosen = np.argsort(u, axis=1, kind="stable")[:, : self.n0]
        masks = np.zeros((size, self.n), dtype=bool)
        np.put_along_axis(masks, chosen, True, axis=1)
        return masks


def _map(fn, items, workers: int):
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def resolve_spec(data: TwoSampleData, spec: StatisticSpec, bandwidth: BandwidthRule | None = None) -> tuple[StatisticSpec, float | None]:
    """Fix an 'auto' bandwidth on the observed pooled data."""
    if spec.kernel.needs_bandwidth:
        sigma = median_heuristic(data, bandwidth or BandwidthRule())
        return StatisticSpec(spec.kernel.with_sigma(sigma), spec.form), sigma
    sigma = spec.kernel.sigma if isinstance(spec.kernel.sigma, float) else None
    return spec, sigma


def permutation_test(
    data: TwoSampleData,
    spec: StatisticSpec,
    plan: PermutationPlan = PermutationPlan(),
    bandwidth: BandwidthRule | None = None,
) -> TestResult:
    """Permutation p-value of ``spec`` on ``data``.

    Exact mode returns #{assignments with statistic >= observed} / C(n, n0)
    over all assignments, the observed one included. Monte Carlo mode returns
    (1 + #exceedances) / (1 + B). Assignments leaving a group without enough
    events count as exceedances.
    """
    spec, sigma = resolve_spec(data, spec, bandwidth)
    eng = PermutationEngine(data, spec)
    obs = eng.observed()
    tol = 1e-10 * max(abs(obs), eng.scale, 1e-300)
    mode = plan.resolve(eng.n, eng.n0)

    def tally(raw_bad):
        raw, bad = raw_bad
        return int(np.sum(bad | (raw >= obs - tol))), int(bad.sum())

    if mode == EXACT:
        combos = enumerate_assignments(eng.n, eng.n0, plan.exact_threshold)
        chunks = iter(lambda: list(itertools.islice(combos, BLOCK * 4)), [])

        def run_exact(chunk):
            return tally(eng.evaluate(eng.masks_from_subsets(np.array(chunk))))

        counts = _map(run_exact, chunks, plan.workers)
        total = math.comb(eng.n, eng.n0)
    else:
        B = plan.permutations
        blocks = [(b, min(BLOCK, B - b * BLOCK)) for b in range(-(-B // BLOCK))]

        def run_mc(item):
            b, size = item
            return tally(eng.evaluate(eng.random_masks(plan.seed, b, size)))

        counts = _map(run_mc, blocks, plan.workers)
        total = B

    exceed = sum(c for c, _ in counts)
    degenerate = sum(d for _, d in counts)
    if degenerate > MAX_DEGENERATE_FRACTION * total:
        raise PermutationError(
            f"{degenerate} of {total} permuted assignments left a group without enough events; too few events to test"
        )
    p = exceed / total if mode == EXACT else (1 + exceed) / (1 + total)
    return TestResult(
        statistic=StatisticValue(obs, eng.n0, eng.n1),
        p_value=float(p),
        n_permutations=total,
        mode=mode,
        spec=spec,
        group_sizes=(eng.n0, eng.n1),
        sigma=sigma,
        n_exceed=exceed,
        n_degenerate=degenerate,
        seed=plan.seed if mode == MONTE_CARLO else None,
        labels=data.labels,
    )
