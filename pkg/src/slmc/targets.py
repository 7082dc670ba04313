"""Target distributions ``pi ~ exp(-V)`` described by their potential ``V``.

All methods accept a single point of shape ``(d,)`` or a batch ``(..., d)``.
Gradient evaluations are metered in directional-derivative units: a full
gradient costs ``d`` per point, a derivative along ``r`` directions costs
``r``. Counters are owned by the caller.
"""

from __future__ import annotations

import csv
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .linalg import as_spd, random_orthogonal

FUNNEL_ROTATION = np.array([[np.sqrt(3.0) / 2.0, 0.5], [-0.5, np.sqrt(3.0) / 2.0]])


class HessianUnavailable(NotImplementedError):
    pass


@dataclass
class OracleCounter:
    """Running count of directional-derivative oracle calls."""

    count: int = 0

    def add(self, n) -> None:
        self.count += int(n)


def _n_points(x: np.ndarray) -> int:
    return int(np.prod(x.shape[:-1], dtype=int))


class Potential(ABC):
    dim: int

    @abstractmethod
    def value(self, x) -> np.ndarray: ...

    @abstractmethod
    def _grad(self, x: np.ndarray) -> np.ndarray: ...

    def gradient(self, x, counter: OracleCounter | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if counter is not None:
            counter.add(self.dim * _n_points(x))
        return self._grad(x)

    def directional_gradient(self, x, U, counter: OracleCounter | None = None) -> np.ndarray:
        """``U^T grad V(x)`` for a ``d x r`` (or batched ``(..., d, r)``) ``U``;
        costs ``r`` oracle calls per point."""
        x = np.asarray(x, dtype=float)
        U = np.asarray(U, dtype=float)
        if counter is not None:
            counter.add(U.shape[-1] * _n_points(x))
        return np.einsum("...dr,...d->...r", U, self._grad(x))

    def hessian(self, x) -> np.ndarray:
        raise HessianUnavailable(f"{type(self).__name__} does not provide a Hessian")

    @property
    def has_hessian(self) -> bool:
        return type(self).hessian is not Potential.hessian

    def score(self, x) -> np.ndarray:
        """``grad log pi = -grad V``."""
        return -self._grad(np.asarray(x, dtype=float))


class GaussianTarget(Potential):
    """Centered Gaussian, ``V(x) = x^T P x / 2`` with precision ``P``."""

    def __init__(self, precision):
        self.precision = as_spd(precision)
        self.dim = self.precision.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        C = np.linalg.inv(self.precision)
        return 0.5 * (C + C.T)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.precision, x)

    def _grad(self, x):
        return x @ self.precision

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.precision, x.shape[:-1] + self.precision.shape).copy()

    def sample(self, n: int, rng) -> np.ndarray:
        L = np.linalg.cholesky(self.covariance)
        return rng.normal(size=(n, self.dim)) @ L.T


def gaussian_target(precision) -> GaussianTarget:
    return GaussianTarget(precision)


def ill_conditioned_problem(rng) -> tuple[np.ndarray, np.ndarray]:
    """The 20-dimensional block-structured precision and its rotation ``U``.

    ``P = blkdiag(U blkdiag((G + 10 I)(G + 10 I)^T, I_5) U^T, I_10)`` with
    ``G`` a 5x5 standard Gaussian matrix and ``U`` a Haar-random 10x10
    orthogonal matrix, drawn in that order from ``rng``.
    """
    G = rng.normal(size=(5, 5))
    U = random_orthogonal(10, rng)
    B = G + 10.0 * np.eye(5)
    inner = np.eye(10)
    inner[:5, :5] = B @ B.T
    upper = U @ inner @ U.T
    P = np.eye(20)
    P[:10, :10] = 0.5 * (upper + upper.T)
    return P, U


def ill_conditioned_precision(rng) -> np.ndarray:
    return ill_conditioned_problem(rng)[0]


@dataclass
class LogisticDataset:
    X: np.ndarray  # (n, 2) covariates
    y: np.ndarray  # (n,) labels in {0, 1}
    prior_covariance: np.ndarray = field(default_factory=lambda: np.diag([1.0, 100.0]))

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(-1, 2) if np.size(self.X) else np.zeros((0, 2))
        self.y = np.asarray(self.y, dtype=int).reshape(-1)
        self.prior_covariance = as_spd(self.prior_covariance)
        if len(self.X) != len(self.y):
            raise ValueError("X and y have different lengths")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise ValueError("labels must be 0 or 1")

    @property
    def n(self) -> int:
        return len(self.y)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "y"])
            for (a, b), lab in zip(self.X, self.y):
                w.writerow([repr(float(a)), repr(float(b)), int(lab)])

    @classmethod
    def from_csv(cls, path, prior_covariance=None) -> "LogisticDataset":
        with open(Path(path), newline="") as fh:
            rows = list(csv.DictReader(fh))
        X = np.array([[float(r["x1"]), float(r["x2"])] for r in rows])
        y = np.array([int(r["y"]) for r in rows])
        if prior_covariance is None:
            return cls(X, y)
        return cls(X, y, prior_covariance)


def generate_logistic_data(n: int, rng, theta_true=(1.0, 1.0)) -> LogisticDataset:
    """``X_i ~ N(0, diag(10, 0.1))``, ``y_i ~ Bernoulli(ilogit(theta_true . X_i))``,
    prior covariance ``diag(1, 100)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    X = rng.normal(size=(n, 2)) * np.sqrt([10.0, 0.1])
    p = expit(X @ np.asarray(theta_true, dtype=float))
    y = (rng.uniform(size=n) < p).astype(int)
    return LogisticDataset(X, y)


class LogisticPosterior(Potential):
    """Bayesian logistic regression posterior with a Gaussian prior."""

    def __init__(self, data: LogisticDataset):
        self.data = data
        self.dim = 2
        self.prior_precision = np.linalg.inv(data.prior_covariance)

    def value(self, theta):
        theta = np.asarray(theta, dtype=float)
        z = theta @ self.data.X.T
        # log(1 + e^z) without overflow
        nll = np.sum(np.logaddexp(0.0, z) - self.data.y * z, axis=-1)
        return 0.5 * np.einsum("...i,ij,...j->...", theta, self.prior_precision, theta) + nll

    def _grad(self, theta):
        z = theta @ self.data.X.T
        resid = self.data.y - expit(z)
        return theta @ self.prior_precision - resid @ self.data.X

    def hessian(self, theta):
        theta = np.asarray(theta, dtype=float)
        s = expit(theta @ self.data.X.T)
        w = s * (1.0 - s)
        X = self.data.X
        return self.prior_precision + np.einsum("...n,ni,nj->...ij", w, X, X)


def logistic_posterior(data: LogisticDataset) -> LogisticPosterior:
    return LogisticPosterior(data)


class FunnelTarget(Potential):
    """Two-dimensional Neal funnel: ``y ~ N(0, sigma^2)``, ``x | y ~ N(0, e^y)``.

    Points are ordered ``(x, y)``; ``y`` is the neck coordinate.
    ``V(x, y) = y^2 / (2 sigma^2) + x^2 e^{-y} / 2 + y / 2``.
    """

    def __init__(self, sigma: float = 3.0):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)
        self.dim = 2

    def value(self, p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        return y**2 / (2 * self.sigma**2) + 0.5 * x**2 * np.exp(-y) + 0.5 * y

    def _grad(self, p):
        x, y = p[..., 0], p[..., 1]
        e = np.exp(-y)
        return np.stack([x * e, y / self.sigma**2 - 0.5 * x**2 * e + 0.5], axis=-1)

    def hessian(self, p):
        p = np.asarray(p, dtype=float)
        x, y = p[..., 0], p[..., 1]
        e = np.exp(-y)
        H = np.empty(p.shape[:-1] + (2, 2))
        H[..., 0, 0] = e
        H[..., 0, 1] = H[..., 1, 0] = -x * e
        H[..., 1, 1] = 1.0 / self.sigma**2 + 0.5 * x**2 * e
        return H

    def sample(self, n: int, rng) -> np.ndarray:
        y = self.sigma * rng.normal(size=n)
        x = np.exp(0.5 * y) * rng.normal(size=n)
        return np.stack([x, y], axis=-1)


def funnel_target(sigma: float = 3.0) -> FunnelTarget:
    return FunnelTarget(sigma)


class RotatedTarget(Potential):
    """``V_rot(x) = V(W x)`` for an orthogonal ``W``."""

    def __init__(self, inner: Potential, W):
        W = np.asarray(W, dtype=float)
        d = inner.dim
        if W.shape != (d, d) or np.max(np.abs(W.T @ W - np.eye(d))) > 1e-10:
            raise ValueError("rotation must be an orthogonal d x d matrix")
        self.inner = inner
        self.W = W
        self.dim = d

    def value(self, x):
        return self.inner.value(np.asarray(x, dtype=float) @ self.W.T)

    def _grad(self, x):
        return self.inner._grad(x @ self.W.T) @ self.W

    def hessian(self, x):
        H = self.inner.hessian(np.asarray(x, dtype=float) @ self.W.T)
        return np.einsum("ki,...kl,lj->...ij", self.W, H, self.W)

    @property
    def has_hessian(self) -> bool:
        return self.inner.has_hessian

    def sample(self, n: int, rng) -> np.ndarray:
        # If z ~ pi then W^T z has density proportional to exp(-V(W x)).
        return self.inner.sample(n, rng) @ self.W


def rotate_target(inner: Potential, W) -> RotatedTarget:
    return RotatedTarget(inner, W)
