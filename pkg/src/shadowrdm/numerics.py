"""Dense linear-algebra kernels and seeded random sampling shared by all modules.

Everything here is real arithmetic: the Hamiltonians in this package are real,
so anti-Hermitian one-body generators are antisymmetric and the rotations they
exponentiate are orthogonal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "RngStream",
    "symmetrize",
    "sym_eigendecomposition",
    "project_psd",
    "expm_antisymmetric",
    "sample_haar_orthogonal",
    "orthogonality_defect",
]

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RngStream:
    """Seeded random stream; identical seed and algorithm give bit-identical draws.

    A stream is single-consumer: to parallelize, derive independent child
    streams with :meth:`derived` instead of sharing one generator.
    """

    seed: int
    algorithm: str = "pcg64"

    def generator(self) -> np.random.Generator:
        if self.algorithm != "pcg64":
            raise ValueError(f"unsupported rng algorithm: {self.algorithm!r}")
        return np.random.Generator(np.random.PCG64(self.seed & _MASK64))

    def derived(self, salt: int) -> "RngStream":
        """Child stream whose seed mixes the parent seed with ``salt``."""
        return RngStream(_splitmix64((self.seed & _MASK64) ^ _splitmix64(salt & _MASK64)),
                         self.algorithm)


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Exact symmetric part (m + m.T)/2."""
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def _check_square_finite(m: np.ndarray, what: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what}: expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{what}: non-finite entries")
    return m


def sym_eigendecomposition(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix with eigenvalues sorted descending.

    Returns ``(w, v)`` with ``m = v @ diag(w) @ v.T`` and ``v`` orthogonal.
    The input is symmetrized before factorization; degenerate eigenvalues keep
    the deterministic LAPACK ordering, so repeated calls agree bit for bit.
    """
    m = _check_square_finite(m, "sym_eigendecomposition")
    w, v = np.linalg.eigh(symmetrize(m))
    return w[::-1].copy(), np.ascontiguousarray(v[:, ::-1])


def project_psd(m: np.ndarray) -> np.ndarray:
    """Nearest positive-semidefinite matrix in Frobenius norm (eigenvalue clipping)."""
    w, v = sym_eigendecomposition(m)
    w = np.maximum(w, 0.0)
    return symmetrize((v * w) @ v.T)


def expm_antisymmetric(a: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Orthogonal matrix exp(a) for antisymmetric a.

    Uses Pade scaling-and-squaring; rejects inputs whose antisymmetry defect
    exceeds ``tol``.
    """
    a = _check_square_finite(a, "expm_antisymmetric")
    defect = np.max(np.abs(a + a.T)) if a.size else 0.0
    if defect > tol:
        raise ValueError(f"matrix is not antisymmetric: max|a + a.T| = {defect:.3e}")
    return scipy.linalg.expm(a)


def orthogonality_defect(u: np.ndarray) -> float:
    """max |u.T u - I|, the bound used by every orthogonality contract here."""
    u = np.asarray(u, dtype=float)
    return float(np.max(np.abs(u.T @ u - np.eye(u.shape[1]))))


def sample_haar_orthogonal(dim: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix of size ``dim``.

    QR decomposition of an i.i.d. standard-Gaussian matrix, with the R-diagonal
    sign correction; without that correction the distribution is not Haar.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    z = gen.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    d = np.sign(np.diag(r))
    d[d == 0.0] = 1.0
    return q * d
