"""Distances and kernels on times or (time, covariates) vectors."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np
from scipy.spatial.distance import cdist

ENERGY = "energy"
GAUSSIAN = "gaussian"
LAPLACIAN = "laplacian"
RATIONAL_QUADRATIC = "rational_quadratic"
MATERN = "matern"
DISTANCE_INDUCED = "distance_induced"

KINDS = (ENERGY, GAUSSIAN, LAPLACIAN, RATIONAL_QUADRATIC, MATERN, DISTANCE_INDUCED)
BANDWIDTH_KINDS = (GAUSSIAN, LAPLACIAN, MATERN)
MATERN_NU = (0.5, 1.5, 2.5)

AUTO = "auto"
Sigma = Union[float, str, None]


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """Which distance or kernel to use, with its parameters.

    ``sigma`` may be ``"auto"`` for the bandwidth kernels; it must be
    resolved (see :mod:`kmtest.bandwidth`) before evaluation.
    """

    kind: str
    alpha: float = 1.0
    sigma: Sigma = None
    c: float = 1.0
    beta: float = 1.0
    nu: float = 0.5
    origin: float | tuple[float, ...] = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KernelError(f"unknown kernel kind {self.kind!r}")
        if self.kind in (ENERGY, DISTANCE_INDUCED) and not 0 < self.alpha <= 2:
            raise KernelError(f"alpha must lie in (0, 2], got {self.alpha}")
        if self.kind in BANDWIDTH_KINDS:
            if self.sigma is None:
                object.__setattr__(self, "sigma", AUTO)
            elif self.sigma != AUTO:
                if not float(self.sigma) > 0:
                    raise KernelError(f"sigma must be positive, got {self.sigma}")
                object.__setattr__(self, "sigma", float(self.sigma))
        if self.kind == RATIONAL_QUADRATIC and not (self.c > 0 and self.beta > 0):
            raise KernelError("rational quadratic needs c > 0 and beta > 0")
        if self.kind == MATERN and self.nu not in MATERN_NU:
            raise KernelError(f"Matern nu must be one of {MATERN_NU}, got {self.nu}")

    @property
    def is_energy(self) -> bool:
        return self.kind == ENERGY

    @property
    def needs_bandwidth(self) -> bool:
        return self.kind in BANDWIDTH_KINDS and self.sigma == AUTO

    def with_sigma(self, sigma: float) -> "KernelSpec":
        return replace(self, sigma=float(sigma))

    def params(self) -> dict:
        if self.kind in (ENERGY, DISTANCE_INDUCED):
            out = {"alpha": self.alpha}
            if self.kind == DISTANCE_INDUCED:
                out["origin"] = self.origin
            return out
        if self.kind == RATIONAL_QUADRATIC:
            return {"c": self.c, "beta": self.beta}
        out = {"sigma": self.sigma}
        if self.kind == MATERN:
            out["nu"] = self.nu
        return out


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x.reshape(1, 1)
    if x.ndim == 1:
        return x.reshape(-1, 1)
    return x


def pairwise_distances(x, y=None) -> np.ndarray:
    """Euclidean distance matrix between the rows of ``x`` and ``y``."""
    x = _as_points(x)
    y = x if y is None else _as_points(y)
    if x.shape[1] != y.shape[1]:
        raise KernelError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[1] == 1:
        return np.abs(x - y.T)
    return cdist(x, y)


def _matern(r: np.ndarray, nu: float) -> np.ndarray:
    # r already divided by sigma
    if nu == 0.5:
        return np.exp(-r)
    if nu == 1.5:
        s = np.sqrt(3.0) * r
        return (1.0 + s) * np.exp(-s)
    s = np.sqrt(5.0) * r
    return (1.0 + s + s * s / 3.0) * np.exp(-s)


def kernel_from_distances(spec: KernelSpec, dist: np.ndarray, norm_x=None, norm_y=None) -> np.ndarray:
    """Apply ``spec`` to a matrix of Euclidean distances.

    For the energy kind this returns ``dist ** alpha`` (a distance, not a
    kernel); the distance-induced kind also needs the norms of both point
    sets measured from the origin.
    """
    if spec.kind in BANDWIDTH_KINDS and spec.sigma == AUTO:
        raise KernelError("bandwidth is 'auto'; resolve it before evaluating the kernel")
    if spec.kind == ENERGY:
        return dist if spec.alpha == 1 else dist**spec.alpha
    if spec.kind == GAUSSIAN:
        r = dist / float(spec.sigma)
        return np.exp(-(r * r))
    if spec.kind == LAPLACIAN:
        return np.exp(-dist / float(spec.sigma))
    if spec.kind == MATERN:
        return _matern(dist / float(spec.sigma), spec.nu)
    if spec.kind == RATIONAL_QUADRATIC:
        return (dist + spec.c) ** (-spec.beta)
    a = spec.alpha
    return np.asarray(norm_x).reshape(-1, 1) ** a + np.asarray(norm_y).reshape(1, -1) ** a - dist**a


def gram(spec: KernelSpec, x, y=None) -> np.ndarray:
    """Matrix of ``h(x_i, y_j)`` for the distance or kernel in ``spec``."""
    x = _as_points(x)
    y = x if y is None else _as_points(y)
    dist = pairwise_distances(x, y)
    if spec.kind != DISTANCE_INDUCED:
        return kernel_from_distances(spec, dist)
    origin = np.broadcast_to(np.asarray(spec.origin, dtype=float), (x.shape[1],))
    nx = pairwise_distances(x, origin.reshape(1, -1))
    ny = pairwise_distances(y, origin.reshape(1, -1))
    return kernel_from_distances(spec, dist, nx, ny)


def eval_distance(x, y, alpha: float) -> float:
    """``||x - y|| ** alpha``."""
    if not 0 < alpha <= 2:
        raise KernelError(f"alpha must lie in (0, 2], got {alpha}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise KernelError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(np.linalg.norm(x - y) ** alpha)


def eval_kernel(spec: KernelSpec, x, y) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    y = np.atleast_1d(np.asarray(y, dtype=float)).reshape(1, -1)
    return float(gram(spec, x, y)[0, 0])


def eval_distance_induced_kernel(alpha: float, x, y, origin=0.0) -> float:
    """``||x - o||^a + ||y - o||^a - ||x - y||^a``."""
    return eval_kernel(KernelSpec(DISTANCE_INDUCED, alpha=alpha, origin=origin), x, y)
