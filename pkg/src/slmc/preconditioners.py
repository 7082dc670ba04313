"""Preconditioner schedules ``A_k`` and their eigenblock partitions.

A schedule is queried once per step with ``next(k, ensemble=..., grad=...)``
and returns ``(A_k, partition)``. Fixed and ensemble-average schedules are
stateless between calls. The adaptive ones (RMSProp, Adagrad) keep one
accumulator per chain, so a schedule instance belongs to a single ensemble.
"""

from __future__ import annotations

import logging

import numpy as np

from .linalg import (
    DivergenceError,
    EigenDecomposition,
    EigenblockPartition,
    as_spd,
    eigenblock_partition,
    sym_eigen,
)
from .targets import Potential

log = logging.getLogger(__name__)

DEFAULT_CAP = 1e6
DECAY = 0.99
MIX = 0.01
EPS = 1e-8


def _reorder(lam: np.ndarray, Q: np.ndarray) -> EigenDecomposition:
    # Descending order; ties keep their incoming order.
    order = np.argsort(-lam, axis=-1, kind="stable")
    lam = np.take_along_axis(lam, order, axis=-1)
    Q = np.take_along_axis(Q, order[..., None, :], axis=-1)
    return EigenDecomposition(lam, Q)


def _cap_eig(eig: EigenDecomposition, cap: float) -> EigenDecomposition:
    if np.all(eig.eigenvalues <= cap):
        return eig
    lam = np.minimum(eig.eigenvalues, cap)
    return EigenDecomposition(lam, eig.eigenvectors)


class Schedule:
    uses_gradient = False
    uses_ensemble = False
    theory_covered = True

    def __init__(self, r: int, phi=None, cap: float = DEFAULT_CAP):
        self.r = int(r)
        self.phi = phi
        self.cap = float(cap)
        self._last_norm = None
        self.norm_ratios: list[float] = []

    def next(self, k: int, ensemble=None, grad=None) -> tuple[np.ndarray, EigenblockPartition]:
        raise NotImplementedError

    def _emit(self, eig: EigenDecomposition) -> tuple[np.ndarray, EigenblockPartition]:
        eig = _cap_eig(eig, self.cap)
        part = eigenblock_partition(eig, self.r, self.phi)
        A = eig.reconstruct()
        A = 0.5 * (A + np.swapaxes(A, -1, -2))
        self._monitor(eig)
        return A, part

    def _monitor(self, eig: EigenDecomposition) -> None:
        # Drift proxy for the bounded-change assumption; diagnostic only.
        norm = float(np.max(eig.eigenvalues[..., 0]))
        if self._last_norm is not None:
            ratio = norm / self._last_norm
            self.norm_ratios.append(ratio)
            log.debug("spectral norm ratio ||A_k|| / ||A_k-1|| = %.6g", ratio)
        self._last_norm = norm


class FixedSchedule(Schedule):
    """The same matrix and partition at every step."""

    def __init__(self, A=None, r: int = 1, phi=None, cap: float = DEFAULT_CAP, eig: EigenDecomposition | None = None):
        super().__init__(r, phi, cap)
        if eig is None:
            eig = sym_eigen(as_spd(A))
        self.A, self.partition = self._emit(eig)

    def next(self, k, ensemble=None, grad=None):
        return self.A, self.partition


def fixed_schedule(A, r: int, phi=None, cap: float = DEFAULT_CAP) -> FixedSchedule:
    return FixedSchedule(A, r, phi, cap)


def basis_schedule(eigenvalues, basis, r: int, phi=None) -> FixedSchedule:
    """Fixed schedule whose eigenblocks come from a given orthonormal basis.

    Useful when ``A`` has a degenerate spectrum (e.g. ``A = I``) and the
    choice of basis inside an eigenspace matters.
    """
    return FixedSchedule(r=r, phi=phi, eig=EigenDecomposition.from_basis(eigenvalues, basis))


class AverageHessianSchedule(Schedule):
    """``A_k`` is the inverse of the ensemble-average Hessian at the current
    particle positions. Eigenvalues of the average Hessian are floored at
    ``floor * lambda_max`` before inversion."""

    uses_ensemble = True

    def __init__(self, pot: Potential, r: int, phi=None, floor: float = 1e-10, cap: float = DEFAULT_CAP):
        if not pot.has_hessian:
            raise ValueError("average-Hessian schedule needs a potential with a Hessian")
        super().__init__(r, phi, cap)
        self.pot = pot
        self.floor = floor

    def next(self, k, ensemble=None, grad=None):
        if ensemble is None or np.size(ensemble) == 0:
            raise ValueError("average-Hessian schedule needs the current ensemble positions")
        X = np.asarray(ensemble, dtype=float).reshape(-1, self.pot.dim)
        H = np.mean(self.pot.hessian(X), axis=0)
        eig = sym_eigen(0.5 * (H + H.T))
        lam = np.maximum(eig.eigenvalues, self.floor * eig.eigenvalues[0])
        return self._emit(_reorder(1.0 / lam, eig.eigenvectors))


def avg_hessian_schedule(pot: Potential, r: int, phi=None) -> AverageHessianSchedule:
    return AverageHessianSchedule(pot, r, phi)


class _AdaptiveSchedule(Schedule):
    uses_gradient = True
    theory_covered = False

    def __init__(self, r: int = 1, phi=None, decay: float = DECAY, mix: float = MIX, eps: float = EPS, cap: float = DEFAULT_CAP):
        super().__init__(r, phi, cap)
        self.decay, self.mix, self.eps = decay, mix, eps
        self.S = None  # accumulator, one d x d matrix per chain

    def _outer(self, g: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def next(self, k, ensemble=None, grad=None):
        if grad is None:
            raise ValueError(f"{type(self).__name__} needs the gradient at the current position")
        g = np.asarray(grad, dtype=float)
        if self.S is None:
            self.S = np.zeros(g.shape + g.shape[-1:])
        self.S = self.decay * self.S + self.mix * self._outer(g)
        if not np.all(np.isfinite(self.S)):
            raise DivergenceError(f"{type(self).__name__} accumulator overflowed")
        eig = sym_eigen(self.S)
        # S is PSD; clamp roundoff below zero before regularising.
        lam = np.clip(eig.eigenvalues, 0.0, None) + self.eps
        # A_k = (S + eps I)^(-1/2) shares the eigenvectors of S.
        return self._emit(_reorder(lam**-0.5, eig.eigenvectors))


class RMSPropSchedule(_AdaptiveSchedule):
    """Diagonal accumulator ``S_k = 0.99 S_{k-1} + 0.01 diag(g_k^2)``."""

    def _outer(self, g):
        return g[..., :, None] * np.eye(g.shape[-1]) * g[..., None, :]


class AdagradSchedule(_AdaptiveSchedule):
    """Full-matrix accumulator ``S_k = 0.99 S_{k-1} + 0.01 g_k g_k^T``."""

    def _outer(self, g):
        return g[..., :, None] * g[..., None, :]


def rmsprop_schedule(r: int = 1, phi=None, **kw) -> RMSPropSchedule:
    return RMSPropSchedule(r, phi, **kw)


def adagrad_schedule(r: int = 1, phi=None, **kw) -> AdagradSchedule:
    return AdagradSchedule(r, phi, **kw)


def smoothness_phi(partition: EigenblockPartition, hessian) -> np.ndarray:
    """Sampling probabilities proportional to each block's relative
    smoothness ``lambda_max(D^1/2 W^T H W D^1/2)``."""
    H = np.asarray(hessian, dtype=float)
    M = []
    for W, D in partition.blocks:
        s = np.sqrt(np.diag(D))
        B = s[:, None] * (W.T @ H @ W) * s[None, :]
        M.append(np.linalg.eigvalsh(0.5 * (B + B.T))[-1])
    M = np.asarray(M)
    return M / M.sum()


__all__ = [
    "AdagradSchedule",
    "AverageHessianSchedule",
    "FixedSchedule",
    "RMSPropSchedule",
    "Schedule",
    "adagrad_schedule",
    "avg_hessian_schedule",
    "basis_schedule",
    "fixed_schedule",
    "rmsprop_schedule",
    "smoothness_phi",
]
