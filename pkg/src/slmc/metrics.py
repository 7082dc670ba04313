"""Sample-quality metrics and exact Gaussian oracles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .linalg import EigenblockPartition, as_spd, spd_sqrt, sym_eigen


def test_error(samples, true_mean: float) -> float:
    """``|mean_i |1^T x_i| - true_mean|``."""
    X = np.asarray(samples, dtype=float)
    if X.size == 0:
        raise ValueError("no samples")
    return float(abs(np.mean(np.abs(X.sum(axis=-1))) - true_mean))


test_error.__test__ = False  # not a pytest test despite the name


def abs_sum_gaussian_mean(Sigma) -> float:
    """``E|1^T X|`` for ``X ~ N(0, Sigma)``: a half-normal mean ``sqrt(2 s^2 / pi)``
    with ``s^2 = 1^T Sigma 1``."""
    S = as_spd(Sigma)
    s2 = float(np.sum(S))
    return float(np.sqrt(2.0 * s2 / np.pi))


def median_heuristic(samples) -> float:
    """Median of the pairwise Euclidean distances (lower middle for an even
    number of pairs)."""
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(X) < 2:
        raise ValueError("median heuristic needs at least two points")
    dist = np.sort(pdist(X))
    c = float(dist[(len(dist) - 1) // 2])
    if c <= 0:
        raise ValueError("median pairwise distance is zero; points are (mostly) identical")
    return c


@dataclass(frozen=True)
class KsdConfig:
    bandwidth: float | str = "median"
    beta: float = -0.5

    def __post_init__(self):
        if self.beta != -0.5:
            raise ValueError("only the IMQ exponent beta = -1/2 is supported")
        if self.bandwidth != "median" and not float(self.bandwidth) > 0:
            raise ValueError("explicit bandwidth must be positive")


def ksd(samples, scores, config: KsdConfig | None = None) -> float:
    """Kernelized Stein discrepancy with the IMQ kernel ``(c^2 + |x-y|^2)^{-1/2}``.

    Returns the square root of the V-statistic ``mean_{i,j} k_0(x_i, x_j)``
    (diagonal included), where ``scores`` holds ``grad log pi`` at each point.
    """
    config = config or KsdConfig()
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if scores is None:
        raise ValueError("KSD needs the score grad log pi at every sample")
    S = np.asarray(scores, dtype=float).reshape(X.shape)
    c = median_heuristic(X) if config.bandwidth == "median" else float(config.bandwidth)
    if not c > 0:
        raise ValueError("bandwidth must be positive")
    n, d = X.shape
    U = X[:, None, :] - X[None, :, :]  # x_i - x_j
    r2 = np.einsum("ijk,ijk->ij", U, U)
    q = c * c + r2
    k = q**-0.5
    q32 = q**-1.5
    trace_term = d * q32 - 3.0 * r2 * q**-2.5
    # grad_y k = u q^{-3/2}, grad_x k = -grad_y k, with u = x - y
    gy_dot_sx = q32 * np.einsum("ijk,ik->ij", U, S)
    gx_dot_sy = -q32 * np.einsum("ijk,jk->ij", U, S)
    k0 = trace_term + gx_dot_sy + gy_dot_sx + k * (S @ S.T)
    v = float(np.sum(k0)) / (n * n)
    return float(np.sqrt(max(v, 0.0)))


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    eig = sym_eigen(0.5 * (M + M.T))
    lam = np.clip(eig.eigenvalues, 0.0, None)
    Q = eig.eigenvectors
    return (Q * np.sqrt(lam)) @ Q.T


def gaussian_w2(m1, S1, m2, S2) -> float:
    """Closed-form 2-Wasserstein distance between two Gaussians."""
    m1, m2 = np.atleast_1d(np.asarray(m1, dtype=float)), np.atleast_1d(np.asarray(m2, dtype=float))
    S1, S2 = np.atleast_2d(S1).astype(float), np.atleast_2d(S2).astype(float)
    R = spd_sqrt(S2)
    cross = _psd_sqrt(R @ S1 @ R)
    tr = np.trace(S1) + np.trace(S2) - 2.0 * np.trace(cross)
    return float(np.sqrt(np.sum((m1 - m2) ** 2) + max(tr, 0.0)))


def ks_statistic_1d(samples, cdf) -> float:
    """Two-sided Kolmogorov-Smirnov distance between the empirical CDF of
    ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    if n == 0:
        raise ValueError("no samples")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def _block_terms(partition: EigenblockPartition, h: float, phi=None):
    phi = partition.phi if phi is None else np.asarray(phi, dtype=float)
    P = [partition.block_matrix(i) for i in range(partition.n_blocks)]
    return phi, P, [h / p for p in phi]


def slmc_gaussian_moment_recursion(Sigma, partition: EigenblockPartition, h: float, steps: int, mean0, cov0, phi=None):
    """Exact mean and covariance of SLMC on ``N(0, Sigma)``.

    Since the block is drawn independently of the state,
    ``mu_{k+1} = sum_i phi_i (I - h_i P_i Sigma^{-1}) mu_k`` and
    ``C_{k+1} = sum_i phi_i [(I - h_i P_i Sigma^{-1}) C_k (.)^T + 2 h_i P_i]``
    with ``h_i = h / phi_i``. Here ``C`` is the covariance (second moment
    about the running mean), tracked through the raw second moment.
    Returns arrays of shape ``(steps+1, d)`` and ``(steps+1, d, d)``.
    """
    prec = np.linalg.inv(as_spd(Sigma))
    d = prec.shape[0]
    phi, P, hs = _block_terms(partition, h, phi)
    T = [np.eye(d) - hi * Pi @ prec for hi, Pi in zip(hs, P)]
    mean_map = sum(p * Ti for p, Ti in zip(phi, T))
    noise = sum(p * 2.0 * hi * Pi for p, hi, Pi in zip(phi, hs, P))
    mu = np.asarray(mean0, dtype=float).copy()
    M2 = np.asarray(cov0, dtype=float) + np.outer(mu, mu)
    means, covs = [mu.copy()], [M2 - np.outer(mu, mu)]
    for _ in range(steps):
        M2 = sum(p * Ti @ M2 @ Ti.T for p, Ti in zip(phi, T)) + noise
        mu = mean_map @ mu
        means.append(mu.copy())
        covs.append(M2 - np.outer(mu, mu))
    return np.array(means), np.array(covs)


def plmc_gaussian_moment_recursion(Sigma, A, h: float, steps: int, mean0, cov0):
    """``mu_{k+1} = (I - h A Sigma^{-1}) mu_k``,
    ``C_{k+1} = (I - h A Sigma^{-1}) C_k (.)^T + 2 h A``. LMC is ``A = I``."""
    prec = np.linalg.inv(as_spd(Sigma))
    A = np.asarray(A, dtype=float)
    T = np.eye(len(A)) - h * A @ prec
    mu = np.asarray(mean0, dtype=float).copy()
    C = np.asarray(cov0, dtype=float).copy()
    means, covs = [mu.copy()], [C.copy()]
    for _ in range(steps):
        mu = T @ mu
        C = T @ C @ T.T + 2.0 * h * A
        means.append(mu.copy())
        covs.append(C.copy())
    return np.array(means), np.array(covs)


def slmc_stationary_covariance(Sigma, partition: EigenblockPartition, h: float, phi=None) -> np.ndarray:
    """Fixed point of the SLMC covariance recursion, solved as a linear
    system in ``vec(C)``. Raises if the recursion is not contractive."""
    prec = np.linalg.inv(as_spd(Sigma))
    d = prec.shape[0]
    phi, P, hs = _block_terms(partition, h, phi)
    K = np.zeros((d * d, d * d))
    b = np.zeros((d, d))
    for p, hi, Pi in zip(phi, hs, P):
        T = np.eye(d) - hi * Pi @ prec
        K += p * np.kron(T, T)
        b += p * 2.0 * hi * Pi
    rho = np.max(np.abs(np.linalg.eigvals(K)))
    if rho >= 1.0:
        raise ValueError(f"covariance recursion is not contractive (spectral radius {rho:.4g})")
    C = np.linalg.solve(np.eye(d * d) - K, b.reshape(-1)).reshape(d, d)
    return 0.5 * (C + C.T)


def ensemble_moments(X: np.ndarray):
    """Sample mean and covariance of an ``(n, d)`` ensemble, together with
    their per-entry standard errors."""
    X = np.asarray(X, dtype=float)
    n = len(X)
    mu = X.mean(axis=0)
    Z = X - mu
    C = Z.T @ Z / (n - 1)
    se_mu = Z.std(axis=0, ddof=1) / np.sqrt(n)
    prods = Z[:, :, None] * Z[:, None, :]
    se_C = prods.std(axis=0, ddof=1) / np.sqrt(n)
    return mu, C, se_mu, se_C
