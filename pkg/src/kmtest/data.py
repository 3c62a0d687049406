"""Censored two-sample data: containers, CSV ingestion and preprocessing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or inconsistent censored data."""


class CensoredObservation(NamedTuple):
    time: float
    event: bool
    covariates: tuple[float, ...] | None = None


@dataclass(frozen=True)
class CensoredSample:
    """One group's observed times, event indicators and optional covariates.

    ``covariates`` is an ``(n, k)`` array or ``None``. Arrays are copied and
    marked read-only on construction.
    """

    time: np.ndarray
    event: np.ndarray
    label: str = ""
    covariates: np.ndarray | None = None

    def __post_init__(self):
        time = np.array(self.time, dtype=float).reshape(-1)
        event = np.array(self.event, dtype=bool).reshape(-1)
        if time.size == 0:
            raise DataError("sample must be nonempty")
        if event.shape != time.shape:
            raise DataError("time and event must have the same length")
        if not np.all(np.isfinite(time)) or np.any(time < 0):
            raise DataError("times must be finite and nonnegative")
        time.setflags(write=False)
        event.setflags(write=False)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        if self.covariates is not None:
            cov = np.array(self.covariates, dtype=float)
            if cov.ndim == 1:
                cov = cov.reshape(-1, 1)
            if cov.shape[0] != time.size:
                raise DataError("covariates must have one row per observation")
            if not np.all(np.isfinite(cov)):
                raise DataError("covariates must be finite")
            cov.setflags(write=False)
            object.__setattr__(self, "covariates", cov)

    @classmethod
    def from_observations(cls, observations: Sequence[CensoredObservation], label: str = ""):
        obs = list(observations)
        if not obs:
            raise DataError("sample must be nonempty")
        covs = [o.covariates for o in obs]
        if all(c is None for c in covs):
            cov = None
        elif any(c is None for c in covs) or len({len(c) for c in covs}) != 1:
            raise DataError("covariate dimension must be the same for every observation")
        else:
            cov = np.array(covs, dtype=float)
        return cls([o.time for o in obs], [o.event for o in obs], label, cov)

    def __len__(self) -> int:
        return self.time.size

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    @property
    def dim(self) -> int:
        """Number of covariate columns (0 when absent)."""
        return 0 if self.covariates is None else self.covariates.shape[1]

    @property
    def observations(self) -> list[CensoredObservation]:
        if self.covariates is None:
            return [CensoredObservation(float(t), bool(e)) for t, e in zip(self.time, self.event)]
        return [
            CensoredObservation(float(t), bool(e), tuple(float(v) for v in c))
            for t, e, c in zip(self.time, self.event, self.covariates)
        ]

    def points(self) -> np.ndarray:
        """``(n, 1 + k)`` array of (time, covariates...) rows."""
        if self.covariates is None:
            return self.time.reshape(-1, 1)
        return np.column_stack([self.time, self.covariates])

    def take(self, index) -> "CensoredSample":
        cov = None if self.covariates is None else self.covariates[index]
        return CensoredSample(self.time[index], self.event[index], self.label, cov)


@dataclass(frozen=True)
class TwoSampleData:
    group0: CensoredSample
    group1: CensoredSample
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.group0.dim != self.group1.dim:
            raise DataError("covariate dimensions differ between groups")

    @property
    def sizes(self) -> tuple[int, int]:
        return len(self.group0), len(self.group1)

    @property
    def labels(self) -> tuple[str, str]:
        return self.group0.label, self.group1.label

    def pooled(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Aggregate (points, event, group) arrays, group0 rows first."""
        pts = np.vstack([self.group0.points(), self.group1.points()])
        event = np.concatenate([self.group0.event, self.group1.event])
        group = np.repeat([0, 1], self.sizes)
        return pts, event, group


def order_sample(sample: CensoredSample) -> tuple[CensoredSample, np.ndarray]:
    """Sort ascending by time; at tied times events precede censorings.

    Returns the ordered sample and ``order`` with ``ordered[k] = original[order[k]]``.
    The sort is stable, so fully tied rows keep their input order.
    """
    order = np.lexsort((~sample.event, sample.time))
    return sample.take(order), order


def truncate(data: TwoSampleData, tau: float | None = None) -> TwoSampleData:
    """Censor every observation beyond ``tau`` at ``tau``.

    ``tau`` defaults to the smaller of the two groups' largest times.
    """
    if tau is None:
        tau = min(data.group0.time.max(), data.group1.time.max())
    if not tau > 0:
        raise DataError(f"truncation point must be positive, got {tau}")

    def cut(s: CensoredSample) -> CensoredSample:
        over = s.time > tau
        return replace(s, time=np.where(over, tau, s.time), event=s.event & ~over)

    return TwoSampleData(cut(data.group0), cut(data.group1), data.meta)


def mark_last_uncensored(sample: CensoredSample) -> CensoredSample:
    """Set the event flag of the largest observation (after tie ordering)."""
    _, order = order_sample(sample)
    event = sample.event.copy()
    event[order[-1]] = True
    return replace(sample, event=event)


def _parse_float(value: str, column: str, row: int) -> float:
    try:
        out = float(value)
    except ValueError:
        raise DataError(f"row {row}: non-numeric {column} value {value!r}") from None
    if not math.isfinite(out):
        raise DataError(f"row {row}: non-finite {column} value {value!r}")
    return out


def read_csv(
    path: str | Path,
    time: str = "time",
    event: str = "event",
    group: str = "group",
    covariates: Sequence[str] | None = None,
) -> TwoSampleData:
    """Read a two-group censored dataset.

    Rows are split by the group column in order of first appearance. With
    ``covariates=None`` every column other than time/event/group is used as
    a covariate; pass ``[]`` to ignore extra columns.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (time, event, group) if c not in header]
        if missing:
            raise DataError(f"missing column(s): {', '.join(missing)}")
        if covariates is None:
            covariates = [c for c in header if c not in (time, event, group)]
        absent = [c for c in covariates if c not in header]
        if absent:
            raise DataError(f"missing covariate column(s): {', '.join(absent)}")

        rows: dict[str, list[CensoredObservation]] = {}
        for i, rec in enumerate(reader, start=2):
            t = _parse_float(rec[time], time, i)
            if t < 0:
                raise DataError(f"row {i}: negative time {t}")
            e_raw = rec[event].strip()
            if e_raw not in ("0", "1", "0.0", "1.0"):
                raise DataError(f"row {i}: event value {e_raw!r} outside {{0,1}}")
            cov = tuple(_parse_float(rec[c], c, i) for c in covariates) if covariates else None
            rows.setdefault(rec[group], []).append(CensoredObservation(t, e_raw.startswith("1"), cov))

    if len(rows) != 2:
        raise DataError(f"expected exactly two groups, found {len(rows)}: {sorted(rows)}")
    (l0, o0), (l1, o1) = rows.items()
    return TwoSampleData(
        CensoredSample.from_observations(o0, l0),
        CensoredSample.from_observations(o1, l1),
        {"covariate_names": list(covariates)},
    )


def write_csv(data: TwoSampleData, path: str | Path, covariate_names: Sequence[str] | None = None) -> None:
    """Write the canonical ``time,event,group[,cov...]`` format."""
    k = data.group0.dim
    names = list(covariate_names or data.meta.get("covariate_names") or [f"cov{j + 1}" for j in range(k)])
    if len(names) != k:
        raise DataError("covariate name count does not match covariate dimension")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "event", "group", *names])
        for s in (data.group0, data.group1):
            for obs in s.observations:
                w.writerow([repr(obs.time), int(obs.event), s.label, *(repr(v) for v in obs.covariates or ())])
