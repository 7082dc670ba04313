"""Dense symmetric linear algebra and eigenblock partitions.

Everything here works on plain ``numpy`` arrays. Symmetric and positive
definite matrices are validated on entry rather than wrapped in classes.
Most routines accept a leading batch shape, which the adaptive
preconditioners use to keep one matrix per chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPD_RTOL = 1e-12
PHI_FLOOR = 1e-12


class EigenConvergenceError(np.linalg.LinAlgError):
    """Raised when the symmetric eigensolver fails to converge."""


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix expected to be SPD has a nonpositive eigenvalue."""


def as_symmetric(A, rtol: float = 1e-10) -> np.ndarray:
    """Validate ``A`` as a (batch of) symmetric matrices and return the
    exactly symmetric part ``(A + A^T) / 2``."""
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    At = np.swapaxes(A, -1, -2)
    scale = max(np.max(np.abs(A), initial=0.0), 1.0)
    if np.max(np.abs(A - At), initial=0.0) > rtol * scale:
        raise ValueError("matrix is not symmetric")
    if np.array_equal(A, At):
        return A.copy()
    return 0.5 * (A + At)


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs sorted by descending eigenvalue.

    ``eigenvectors[..., :, i]`` is paired with ``eigenvalues[..., i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[-1]

    def reconstruct(self) -> np.ndarray:
        Q, lam = self.eigenvectors, self.eigenvalues
        return np.einsum("...ik,...k,...jk->...ij", Q, lam, Q)

    @classmethod
    def from_basis(cls, eigenvalues, basis, atol: float = 1e-10) -> "EigenDecomposition":
        """Wrap a caller-supplied orthonormal basis, e.g. to choose blocks
        of a matrix with a degenerate spectrum such as the identity."""
        lam = np.asarray(eigenvalues, dtype=float)
        Q = np.asarray(basis, dtype=float)
        d = Q.shape[-1]
        if Q.shape[-2:] != (d, d) or lam.shape[-1] != d:
            raise ValueError("basis must be d x d with d eigenvalues")
        err = np.max(np.abs(np.swapaxes(Q, -1, -2) @ Q - np.eye(d)))
        if err > atol:
            raise ValueError(f"basis is not orthogonal (max deviation {err:.3g})")
        return cls(lam, Q)


def _fix_signs(Q: np.ndarray) -> np.ndarray:
    # First entry with |v| > 1e-12 of every eigenvector is made nonnegative.
    significant = np.abs(Q) > 1e-12
    first = np.argmax(significant, axis=-2)
    lead = np.take_along_axis(Q, first[..., None, :], axis=-2)
    signs = np.where(lead < 0, -1.0, 1.0)
    return Q * signs


def sym_eigen(A) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix (or a batch of them).

    Eigenvalues are returned in descending order. Ties keep the order the
    solver produced them in (a stable sort), and exactly diagonal inputs
    return unit vectors, so ``sym_eigen(I)`` yields ``e_1, ..., e_d``.
    Each eigenvector is sign-normalised so that its first significantly
    nonzero entry is nonnegative.

    Raises:
        EigenConvergenceError: if LAPACK reports non-convergence.
    """
    S = as_symmetric(A)
    d = S.shape[-1]
    try:
        w, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise EigenConvergenceError(f"symmetric eigensolver did not converge for a {d}x{d} input: {exc}") from exc

    offdiag = S * (1.0 - np.eye(d))
    is_diag = np.all(offdiag == 0.0, axis=(-2, -1))
    if np.any(is_diag):
        diag = np.diagonal(S, axis1=-2, axis2=-1)
        eye = np.broadcast_to(np.eye(d), S.shape)
        w = np.where(is_diag[..., None], diag, w)
        V = np.where(is_diag[..., None, None], eye, V)

    order = np.argsort(-w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    V = np.take_along_axis(V, order[..., None, :], axis=-1)
    return EigenDecomposition(w, _fix_signs(V))


class DivergenceError(FloatingPointError):
    """A chain produced a non-finite gradient, position or preconditioner."""

    def __init__(self, message: str, position=None):
        super().__init__(message)
        self.position = position


def check_spd(eig: EigenDecomposition, rtol: float = SPD_RTOL) -> None:
    lam = eig.eigenvalues
    if not np.all(np.isfinite(lam)):
        raise NotPositiveDefiniteError("matrix has non-finite eigenvalues")
    lam_max = np.max(lam, axis=-1, keepdims=True)
    bad = (lam <= rtol * np.abs(lam_max)) | (lam_max <= 0)
    if np.any(bad):
        worst = float(np.min(lam))
        raise NotPositiveDefiniteError(f"matrix is not positive definite: eigenvalue {worst!r} <= {rtol} * lambda_max")


def as_spd(A) -> np.ndarray:
    """Validate ``A`` as symmetric positive definite and return it."""
    S = as_symmetric(A)
    check_spd(sym_eigen(S))
    return S


def spd_power(A, power: float, eig: EigenDecomposition | None = None) -> np.ndarray:
    """``A**power`` for SPD ``A`` via its eigendecomposition."""
    eig = sym_eigen(A) if eig is None else eig
    check_spd(eig)
    Q, lam = eig.eigenvectors, eig.eigenvalues
    out = np.einsum("...ik,...k,...jk->...ij", Q, lam**power, Q)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def spd_sqrt(A) -> np.ndarray:
    """Symmetric square root ``Q diag(sqrt(lam)) Q^T`` of an SPD matrix.

    Raises:
        NotPositiveDefiniteError: naming the offending eigenvalue.
    """
    return spd_power(A, 0.5)


def spd_inv(A) -> np.ndarray:
    return spd_power(A, -1.0)


def random_orthogonal(n: int, rng) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
    diagonal of R made positive."""
    Z = rng.normal(size=(n, n))
    Q, R = np.linalg.qr(Z)
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def random_semi_orthogonal(d: int, r: int, rng) -> np.ndarray:
    return random_orthogonal(d, rng)[:, :r]


def n_blocks(d: int, r: int) -> int:
    return -(-d // r)


def uniform_phi(nb: int) -> np.ndarray:
    return np.full(nb, 1.0 / nb)


def validate_phi(phi, nb: int) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (nb,):
        raise ValueError(f"phi must have {nb} entries (one per block), got shape {phi.shape}")
    if np.any(~np.isfinite(phi)) or np.any(phi < PHI_FLOOR):
        raise ValueError(f"phi entries must be >= {PHI_FLOOR}, got min {np.min(phi)!r}")
    if abs(phi.sum() - 1.0) > 1e-12:
        raise ValueError(f"phi must sum to 1 (got {phi.sum()!r})")
    return phi


@dataclass(frozen=True)
class EigenblockPartition:
    """A positive definite matrix split into rank-``r`` eigenblocks.

    Blocks are stored padded to rank ``r``: ``W[..., i]`` is ``d x r`` and
    a short final block (when ``r`` does not divide ``d``) has trailing zero
    columns in ``W`` and zeros in ``D``. ``ranks[i]`` is the true rank.
    """

    W: np.ndarray  # (..., nb, d, r)
    D: np.ndarray  # (..., nb, r)
    ranks: np.ndarray  # (nb,)
    phi: np.ndarray  # (nb,)
    rank: int
    dim: int

    @property
    def n_blocks(self) -> int:
        return len(self.ranks)

    @property
    def batch_shape(self) -> tuple:
        return self.W.shape[:-3]

    @property
    def blocks(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Unpadded ``(W_i, diag(D_i))`` pairs (unbatched partitions only)."""
        if self.batch_shape:
            raise ValueError("blocks is only defined for unbatched partitions")
        return [(self.W[i, :, :k], np.diag(self.D[i, :k])) for i, k in enumerate(self.ranks)]

    def block_matrix(self, i: int) -> np.ndarray:
        W, D = self.W[..., i, :, :], self.D[..., i, :]
        return np.einsum("...ik,...k,...jk->...ij", W, D, W)

    def reconstruct(self, power: float = 1.0) -> np.ndarray:
        """``sum_i W_i D_i^power W_i^T``; ``power=1`` gives back ``A``."""
        Dp = np.where(self.D > 0, self.D, 1.0) ** power * (self.D > 0)
        return np.einsum("...bik,...bk,...bjk->...ij", self.W, Dp, self.W)


def eigenblock_partition(eig: EigenDecomposition, r: int, phi=None) -> EigenblockPartition:
    """Split an eigendecomposition into contiguous rank-``r`` blocks.

    Block ``i`` holds eigenvector columns ``i*r .. min((i+1)*r, d) - 1`` in
    descending eigenvalue order, so block 0 is the top eigenspace. ``phi``
    defaults to uniform sampling probabilities.
    """
    d = eig.dim
    if not 1 <= r <= d:
        raise ValueError(f"rank r must satisfy 1 <= r <= d={d}, got {r}")
    # The eigenpairs are given explicitly, so any positive spectrum is usable
    # however badly conditioned.
    check_spd(eig, rtol=0.0)
    nb = n_blocks(d, r)
    phi = uniform_phi(nb) if phi is None else validate_phi(phi, nb)

    pad = nb * r - d
    Q = eig.eigenvectors
    lam = eig.eigenvalues
    if pad:
        Q = np.concatenate([Q, np.zeros(Q.shape[:-1] + (pad,))], axis=-1)
        lam = np.concatenate([lam, np.zeros(lam.shape[:-1] + (pad,))], axis=-1)
    batch = Q.shape[:-2]
    # (..., d, nb*r) -> (..., d, nb, r) -> (..., nb, d, r)
    W = np.moveaxis(Q.reshape(batch + (d, nb, r)), -2, -3)
    D = lam.reshape(batch + (nb, r))
    ranks = np.full(nb, r)
    ranks[-1] = d - (nb - 1) * r
    return EigenblockPartition(W=np.ascontiguousarray(W), D=D, ranks=ranks, phi=phi, rank=r, dim=d)


def partition_matrix(A, r: int, phi=None) -> EigenblockPartition:
    return eigenblock_partition(sym_eigen(A), r, phi)


@dataclass(frozen=True)
class BlockDraw:
    """One sampled eigenblock per chain, with the step ``h / phi_i``."""

    block_index: np.ndarray
    W: np.ndarray  # (..., d, r)
    D: np.ndarray  # (..., r)
    effective_step: np.ndarray
    rank: np.ndarray


def inverse_cdf_index(phi: np.ndarray, u) -> np.ndarray:
    cdf = np.cumsum(phi)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(phi) - 1)


def sample_block(partition: EigenblockPartition, h: float, rng, size=None) -> BlockDraw:
    """Draw block ``i`` with probability ``phi_i`` (one uniform per draw).

    ``rng`` is a :class:`~slmc.streams.RandomStream` (its selection
    substream is used) or anything with a ``uniform(size=...)`` method.
    For a batched partition one block is drawn per batch element; ``size``
    draws that many blocks from an unbatched partition.
    """
    if not h > 0:
        raise ValueError(f"base step h must be positive, got {h!r}")
    batch = partition.batch_shape
    shape = batch if batch else (() if size is None else (size,) if np.isscalar(size) else tuple(size))
    draw_uniform = getattr(rng, "select", None) or rng.uniform
    u = draw_uniform(size=shape)
    idx = inverse_cdf_index(partition.phi, u)
    if batch:
        gather = idx.reshape(batch + (1,))
        W = np.take_along_axis(partition.W, gather[..., None, None], axis=-3)[..., 0, :, :]
        D = np.take_along_axis(partition.D, gather[..., None], axis=-2)[..., 0, :]
    else:
        W = partition.W[idx]
        D = partition.D[idx]
    h_eff = h / partition.phi[idx]
    return BlockDraw(block_index=idx, W=W, D=D, effective_step=h_eff, rank=partition.ranks[idx])
