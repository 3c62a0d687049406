"""Kaplan-Meier jump weights for ordered right-censored samples.

The weight of the i-th ordered observation in a group of size n is

    W_i = d_i / (n - i + 1) * prod_{j < i} ((n - j) / (n - j + 1)) ** d_j

Consecutive events telescope: a run of events occupying ranks a..b
contributes (n - b) / (n - a + 1) to every later product, and each event in
the run gets weight C / (n - a + 1), where C is the product over earlier runs.
Evaluating the product run by run gives exactly 1/n without censoring and
keeps the rounding error proportional to the number of runs rather than n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CensoredSample, DataError


@dataclass(frozen=True)
class WeightedSample:
    """Ordered sample with Kaplan-Meier weights attached.

    ``points`` holds the (time, covariates...) rows used by distance and
    kernel evaluations; weights depend only on time order and events.
    """

    times: np.ndarray
    events: np.ndarray
    weights: np.ndarray
    points: np.ndarray

    @property
    def weight_sum(self) -> float:
        return float(self.weights.sum())

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def n_events(self) -> int:
        return int(self.events.sum())


def masked_km_weights(event: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Kaplan-Meier weights for many groups drawn from one ordered pool.

    Parameters
    ----------
    event : (n,) bool array
        Event indicators of the pooled sample, already in time order.
    mask : (B, n) bool array
        Row b selects the members of group b. Since the pool is ordered,
        every group is ordered too.

    Returns
    -------
    (B, n) float array
        Weights of each group's members, zero outside the group.
    """
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    B, n = mask.shape
    rows = np.arange(B)[:, None]
    pos = np.arange(n)

    d = mask & np.asarray(event, dtype=bool)[None, :]
    rank = np.cumsum(mask, axis=1)
    size = rank[:, -1:]

    # previous / next member of the same group, -1 / n when there is none
    last = np.maximum.accumulate(np.where(mask, pos, -1), axis=1)
    prev = np.concatenate([np.full((B, 1), -1), last[:, :-1]], axis=1)
    first = np.minimum.accumulate(np.where(mask, pos, n)[:, ::-1], axis=1)[:, ::-1]
    nxt = np.concatenate([first[:, 1:], np.full((B, 1), n)], axis=1)

    prev_d = np.where(prev >= 0, d[rows, np.clip(prev, 0, None)], False)
    next_d = np.where(nxt < n, d[rows, np.clip(nxt, None, n - 1)], False)
    start = d & ~prev_d
    end = d & ~next_d

    run_start = np.maximum.accumulate(np.where(start, rank, 0), axis=1)
    denom = (size - run_start + 1).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(end, (size - rank) / denom, 1.0)
    carried = np.ones((B, n))
    carried[:, 1:] = np.cumprod(factor[:, :-1], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d, carried / denom, 0.0)


def is_ordered(sample: CensoredSample) -> bool:
    t, e = sample.time, sample.event
    return bool(np.all((t[1:] > t[:-1]) | ((t[1:] == t[:-1]) & (e[:-1] >= e[1:]))))


def km_weights(sample: CensoredSample) -> WeightedSample:
    """Kaplan-Meier weights of an ordered sample (see :func:`kmtest.data.order_sample`)."""
    if not is_ordered(sample):
        raise DataError("sample must be ordered by time with events before censorings at ties")
    if sample.n_events == 0:
        raise DataError("no events: Kaplan-Meier weights all zero")
    w = masked_km_weights(sample.event, np.ones((1, len(sample)), dtype=bool))[0]
    return WeightedSample(sample.time, sample.event, w, sample.points())


def normalize_weights(ws: WeightedSample) -> WeightedSample:
    """Rescale the weights to sum to one."""
    total = ws.weight_sum
    if not total > 0:
        raise DataError("cannot normalize weights with zero total mass")
    return WeightedSample(ws.times, ws.events, ws.weights / total, ws.points)
