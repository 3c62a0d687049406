"""Lifetime generators, censoring, digitized survival curves and the Monte Carlo harness."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy import integrate, optimize, stats

from .bandwidth import BandwidthRule
from .data import CensoredSample, DataError, TwoSampleData
from .permutation import AUTO, PermutationError, PermutationPlan, permutation_test
from .statistics import StatisticSpec


class SimulationError(ValueError):
    pass


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox stream for ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def derived_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1, np.uint64)[0])


# -- survival curves ----------------------------------------------------------


def pava_nonincreasing(y, w=None) -> np.ndarray:
    """L2 projection of ``y`` onto nonincreasing sequences (pool adjacent violators)."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    # blocks as (mean, weight, length); a violation is a later block above an earlier one
    means, weights, lengths = [], [], []
    for yi, wi in zip(y, w):
        means.append(yi)
        weights.append(wi)
        lengths.append(1)
        while len(means) > 1 and means[-2] < means[-1]:
            m2, w2, l2 = means.pop(), weights.pop(), lengths.pop()
            m1, w1, l1 = means.pop(), weights.pop(), lengths.pop()
            wt = w1 + w2
            means.append((m1 * w1 + m2 * w2) / wt)
            weights.append(wt)
            lengths.append(l1 + l2)
    return np.repeat(means, lengths)


@dataclass(frozen=True)
class SurvivalCurve:
    """Piecewise-linear survival curve through ``(t, s)`` knots.

    Beyond the last knot the remaining mass ``s[-1]`` sits at ``t[-1]``.
    """

    t: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        s = np.asarray(self.s, dtype=float)
        if t.size < 2 or t.shape != s.shape:
            raise SimulationError("a survival curve needs at least two (t, S) knots")
        if np.any(np.diff(t) <= 0) or t[0] < 0:
            raise SimulationError("curve times must be nonnegative and strictly increasing")
        if np.any(np.diff(s) > 0) or s[0] > 1 or s[-1] < 0:
            raise SimulationError("curve values must be nonincreasing within [0, 1]")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "s", s)

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    def survival(self, x) -> np.ndarray:
        """S(x) for x < t_max, zero from t_max on (the endpoint atom included)."""
        x = np.asarray(x, dtype=float)
        return np.where(x < self.t_max, np.interp(x, self.t, self.s), 0.0)

    def truncated(self, tau: float) -> "SurvivalCurve":
        if not 0 < tau <= self.t_max:
            raise SimulationError(f"truncation point {tau} outside (0, {self.t_max}]")
        keep = self.t < tau
        return SurvivalCurve(np.append(self.t[keep], tau), np.append(self.s[keep], np.interp(tau, self.t, self.s)))


def load_curve(points: Sequence[tuple[float, float]]) -> SurvivalCurve:
    """Build a curve from digitized ``(t, S)`` points.

    Points are sorted by time (duplicate times averaged), projected onto
    nonincreasing sequences, and ``(0, 1)`` is prepended when no knot sits
    at time zero.
    """
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise SimulationError("empty curve")
    t, s = pts[:, 0], pts[:, 1]
    if not (np.all(np.isfinite(pts)) and np.all(t >= 0)):
        raise SimulationError("curve times must be finite and nonnegative")
    if np.any((s < 0) | (s > 1)):
        raise SimulationError("curve values must lie in [0, 1]")
    if pts.shape[0] < 2:
        raise SimulationError("a survival curve needs at least two points")
    tu, inv = np.unique(t, return_inverse=True)
    su = np.bincount(inv, weights=s) / np.bincount(inv)
    su = pava_nonincreasing(su, np.bincount(inv).astype(float))
    if tu[0] > 0:
        tu, su = np.insert(tu, 0, 0.0), np.insert(su, 0, 1.0)
    return SurvivalCurve(tu, su)


def read_curve_csv(path: str | Path) -> SurvivalCurve:
    """Read a ``t,s`` curve file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"t", "s"} <= set(reader.fieldnames):
            raise SimulationError(f"{path}: curve file needs columns t,s")
        try:
            pts = [(float(r["t"]), float(r["s"])) for r in reader]
        except (TypeError, ValueError) as exc:
            raise SimulationError(f"{path}: non-numeric curve value ({exc})") from None
    return load_curve(pts)


def curve_quantile(curve: SurvivalCurve, u) -> np.ndarray:
    """Invert the piecewise-linear CDF ``1 - S``; ``u >= F(t_max)`` maps to ``t_max``."""
    cdf = 1.0 - curve.s
    if cdf[-1] <= 0:
        raise SimulationError("degenerate curve: S never drops below 1")
    u = np.asarray(u, dtype=float)
    idx = np.searchsorted(cdf, u, side="right")
    inside = (idx > 0) & (idx < cdf.size)
    out = np.full(u.shape, curve.t_max)
    out[idx == 0] = curve.t[0]
    i = idx[inside]
    lo, hi = cdf[i - 1], cdf[i]
    frac = (u[inside] - lo) / (hi - lo)
    out[inside] = curve.t[i - 1] + frac * (curve.t[i] - curve.t[i - 1])
    return out


def sample_from_curve(curve: SurvivalCurve, n: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-transform draws from the curve."""
    if curve.s[-1] >= 1:
        raise SimulationError("degenerate curve: S never drops below 1")
    return curve_quantile(curve, rng.random(n))


# -- lifetime generators --------------------------------------------------------


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise SimulationError("exponential rate must be positive")

    def sample(self, n, rng):
        return rng.exponential(1.0 / self.rate, n)

    def survival(self, x):
        return np.exp(-self.rate * np.asarray(x, dtype=float))

    support_end = math.inf


@dataclass(frozen=True)
class Gamma:
    shape: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise SimulationError("gamma shape and scale must be positive")

    def sample(self, n, rng):
        return rng.gamma(self.shape, self.scale, n)

    def survival(self, x):
        return stats.gamma.sf(x, self.shape, scale=self.scale)

    support_end = math.inf


@dataclass(frozen=True)
class LogNormal:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise SimulationError("lognormal sigma must be positive")

    def sample(self, n, rng):
        return rng.lognormal(self.mu, self.sigma, n)

    def survival(self, x):
        return stats.lognorm.sf(x, self.sigma, scale=math.exp(self.mu))

    support_end = math.inf


@dataclass(frozen=True)
class CurveSampler:
    curve: SurvivalCurve

    def sample(self, n, rng):
        return sample_from_curve(self.curve, n, rng)

    def survival(self, x):
        return self.curve.survival(x)

    @property
    def support_end(self) -> float:
        return self.curve.t_max


LifetimeGenerator = Union[Exponential, Gamma, LogNormal, CurveSampler]


def sample_lifetimes(gen: LifetimeGenerator, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 0:
        raise SimulationError("sample size must be nonnegative")
    return gen.sample(n, rng)


# -- censoring ------------------------------------------------------------------


@dataclass(frozen=True)
class NoCensoring:
    def bound(self, gens, sizes) -> float:
        return math.inf


@dataclass(frozen=True)
class Uniform:
    """C ~ Uniform(0, upper)."""

    upper: float

    def __post_init__(self):
        if not self.upper > 0:
            raise SimulationError("censoring upper bound must be positive")

    def bound(self, gens, sizes) -> float:
        return self.upper


@dataclass(frozen=True)
class UniformOnSupport:
    """C ~ Uniform(0, multiplier * tau), tau the common support end of the arms."""

    multiplier: float = 3.0

    def __post_init__(self):
        if not self.multiplier > 0:
            raise SimulationError("censoring multiplier must be positive")

    def bound(self, gens, sizes) -> float:
        tau = min(g.support_end for g in gens)
        if not math.isfinite(tau):
            raise SimulationError("uniform-on-support censoring needs generators with bounded support")
        return self.multiplier * tau


POOLED = "pooled"
GROUP0 = "group0"


@dataclass(frozen=True)
class TargetRate:
    """Uniform(0, b) censoring with b chosen so that P(C < T) equals ``rate``.

    Both arms share the one censoring distribution. With ``reference="pooled"``
    T follows the size-weighted mixture of the arms' lifetime laws; with
    ``"group0"`` the rate is hit in the first (reference) arm only.
    """

    rate: float
    reference: str = POOLED

    def __post_init__(self):
        if not 0 < self.rate < 1:
            raise SimulationError("target censoring rate must lie in (0, 1)")
        if self.reference not in (POOLED, GROUP0):
            raise SimulationError(f"unknown censoring reference {self.reference!r}")

    def bound(self, gens, sizes) -> float:
        if self.reference == GROUP0:
            return calibrate_uniform_bound(gens[:1], sizes[:1], self.rate)
        return calibrate_uniform_bound(gens, sizes, self.rate)


CensoringModel = Union[NoCensoring, Uniform, UniformOnSupport, TargetRate]


def censoring_fraction(gens: Sequence[LifetimeGenerator], sizes: Sequence[int], b: float) -> float:
    """P(C < T) for C ~ Uniform(0, b): (1/b) * integral_0^b S(c) dc, S the mixture survival."""
    total = float(sum(sizes))
    out = 0.0
    for g, n in zip(gens, sizes):
        breaks = None
        if isinstance(g, CurveSampler):
            breaks = [x for x in g.curve.t if 0 < x < b]
        val, _ = integrate.quad(g.survival, 0.0, b, points=breaks, limit=200, epsabs=1e-12, epsrel=1e-10)
        out += n / total * val / b
    return out


def calibrate_uniform_bound(gens: Sequence[LifetimeGenerator], sizes: Sequence[int], rate: float) -> float:
    f = lambda b: censoring_fraction(gens, sizes, b) - rate
    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            raise SimulationError(f"cannot reach censoring rate {rate}")
    lo = hi / 2.0
    while f(lo) < 0:
        lo /= 2.0
        if lo < 1e-12:
            raise SimulationError(f"cannot reach censoring rate {rate}")
    return float(optimize.brentq(f, lo, hi, xtol=1e-12, rtol=1e-10))


def apply_censoring(lifetimes, upper: float, rng: np.random.Generator, label: str = "") -> CensoredSample:
    """Observe min(T, C) with C ~ Uniform(0, upper); ``upper=inf`` means no censoring."""
    t = np.asarray(lifetimes, dtype=float)
    if not upper > 0:
        raise SimulationError("censoring upper bound must be positive")
    if math.isinf(upper):
        return CensoredSample(t, np.ones(t.size, dtype=bool), label)
    c = rng.uniform(0.0, upper, t.size)
    return CensoredSample(np.minimum(t, c), t <= c, label)


# -- Monte Carlo harness ----------------------------------------------------------


@dataclass(frozen=True)
class TestConfig:
    spec: StatisticSpec
    bandwidth: BandwidthRule = BandwidthRule()
    name: str = ""

    __test__ = False

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        k = self.spec.kernel
        params = ",".join(f"{a}={b}" for a, b in k.params().items())
        return f"{k.kind}({params})/{self.spec.form}"


@dataclass(frozen=True)
class ScenarioSpec:
    group0: LifetimeGenerator
    group1: LifetimeGenerator
    censoring: CensoringModel
    n0: int
    n1: int
    tests: tuple[TestConfig, ...]
    replications: int = 500
    permutations: int = 1000
    alpha_level: float = 0.05
    seed: int = 0
    permutation_mode: str = AUTO
    workers: int = 1
    labels: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n0 < 2 or self.n1 < 2:
            raise SimulationError("group sizes must be at least 2")
        if self.replications < 1:
            raise SimulationError("need at least one replication")
        if not 0 < self.alpha_level < 1:
            raise SimulationError("alpha_level must lie in (0, 1)")
        if not self.tests:
            raise SimulationError("scenario needs at least one test")


def simulate_data(s: ScenarioSpec, replication: int, upper: float | None = None) -> TwoSampleData:
    """The two censored samples of one replication."""
    if upper is None:
        upper = s.censoring.bound((s.group0, s.group1), (s.n0, s.n1))
    rng = stream(s.seed, replication)
    t0 = sample_lifetimes(s.group0, s.n0, rng)
    t1 = sample_lifetimes(s.group1, s.n1, rng)
    return TwoSampleData(apply_censoring(t0, upper, rng, "0"), apply_censoring(t1, upper, rng, "1"))


def _replication_pvalues(s: ScenarioSpec, upper: float, r: int) -> list[float]:
    data = simulate_data(s, r, upper)
    out = []
    for j, test in enumerate(s.tests):
        plan = PermutationPlan(s.permutation_mode, s.permutations, derived_seed(s.seed, r, j + 1))
        try:
            out.append(permutation_test(data, test.spec, plan, test.bandwidth).p_value)
        except (PermutationError, DataError):
            out.append(math.nan)
    return out


def run_monte_carlo(s: ScenarioSpec) -> list[dict]:
    """Rejection rate and p-value moments per test over ``s.replications`` draws.

    Replications on which a test is undefined (a group without enough
    events) are excluded for that test and counted in ``n_excluded``.
    """
    upper = s.censoring.bound((s.group0, s.group1), (s.n0, s.n1))
    reps = range(s.replications)
    job = lambda r: _replication_pvalues(s, upper, r)
    if s.workers == 1:
        pvals = [job(r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=s.workers) as pool:
            pvals = list(pool.map(job, reps))
    p = np.array(pvals, dtype=float).reshape(s.replications, len(s.tests))

    rows = []
    for j, test in enumerate(s.tests):
        col = p[:, j][np.isfinite(p[:, j])]
        n_eff = col.size
        rows.append(
            {
                **s.labels,
                "n0": s.n0,
                "n1": s.n1,
                "test": test.label,
                "form": test.spec.form,
                "measure": test.spec.measure,
                "kernel": test.spec.kernel.kind,
                "params": test.spec.kernel.params(),
                "rejection_rate": float(np.mean(col <= s.alpha_level)) if n_eff else math.nan,
                "mean_p": float(col.mean()) if n_eff else math.nan,
                "sd_p": float(col.std(ddof=1)) if n_eff > 1 else math.nan,
                "n_effective": int(n_eff),
                "n_excluded": int(s.replications - n_eff),
                "censoring_upper": upper,
            }
        )
    return rows


def curve_scenario(curve0: SurvivalCurve, curve1: SurvivalCurve, multiplier: float = 3.0, **kwargs) -> ScenarioSpec:
    """Scenario sampling both arms from curves cut at their common right end.

    Censoring is Uniform(0, multiplier * tau), tau = min of the curves' right ends.
    """
    tau = min(curve0.t_max, curve1.t_max)
    g0 = CurveSampler(curve0.truncated(tau))
    g1 = CurveSampler(curve1.truncated(tau))
    return ScenarioSpec(g0, g1, UniformOnSupport(multiplier), **kwargs)
