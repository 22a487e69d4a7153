"""Dense complex linear algebra on M_p.

Conventions used throughout the package:

* matrices are ``complex128`` numpy arrays of shape ``(p, p)``;
* vectorization stacks columns, so column ``j`` of ``X`` occupies
  ``vec(X)[p*j : p*j + p]`` and ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.
"""

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import ConvergenceFailure, EmptyInput, NonSquare, Overflow, ShapeMismatch

DEFAULT_RANK_TOL = 1e-9

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def as_matrix(X):
    """Return X as a finite 2-d complex128 array."""
    A = np.array(X, dtype=np.complex128)
    if A.ndim != 2:
        raise ShapeMismatch(f"expected a 2-d array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def as_square(X):
    A = as_matrix(X)
    if A.shape[0] != A.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {A.shape}")
    return A


def dag(X):
    return np.conj(np.swapaxes(X, -1, -2))


def hermitian(X):
    """Symmetrize: (X + X^*) / 2."""
    A = as_square(X)
    return 0.5 * (A + A.conj().T)


def hermiticity_defect(X):
    """max |X - X^*| relative to 1 + max |X|."""
    A = as_square(X)
    return np.max(np.abs(A - A.conj().T)) / (1.0 + np.max(np.abs(A)))


def vectorize(X):
    """Column-stacking vectorization of a square matrix."""
    A = as_square(X)
    return A.reshape(-1, order="F")


def devectorize(v, p=None):
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim != 1:
        raise ShapeMismatch("expected a 1-d coordinate vector")
    if p is None:
        p = int(round(np.sqrt(v.size)))
    if p * p != v.size:
        raise ShapeMismatch(f"{v.size} coordinates do not form a square matrix")
    return v.reshape(p, p, order="F")


def sandwich(A, B):
    """Matrix of X -> A X B on column-stacked coordinates."""
    return np.kron(np.asarray(B).T, np.asarray(A))


def hs_inner(A, B):
    """Hilbert-Schmidt inner product Tr[A^* B]."""
    A = as_square(A)
    B = as_square(B)
    if A.shape != B.shape:
        raise ShapeMismatch(f"shapes {A.shape} and {B.shape} differ")
    return complex(np.vdot(A, B))


def hs_norm(A):
    return float(np.sqrt(hs_inner(A, A).real))


def hermitian_eig(A, max_sweeps=60):
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    A : array_like
        Square matrix; it is symmetrized before use.
    max_sweeps : int, optional
        Cap on the number of full Jacobi sweeps.

    Returns
    -------
    eigenvalues : ndarray
        Real eigenvalues in ascending order.
    eigenvectors : ndarray
        Unitary matrix whose columns are the matching eigenvectors.

    Raises
    ------
    ConvergenceFailure
        If the off-diagonal mass has not vanished after ``max_sweeps``.
    """
    H = hermitian(A)
    w, V, converged = _kernels.jacobi_eigh(np.ascontiguousarray(H), max_sweeps)
    if not converged:
        raise ConvergenceFailure(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    return w, V


class RankInfo:
    """Result of a singular-value rank decision."""

    def __init__(self, rank, basis, singular_values, threshold):
        self.rank = rank
        self.basis = basis
        self.singular_values = singular_values
        self.threshold = threshold

    def borderline(self, factor=10.0):
        """Singular values within ``factor`` of the cut-off, either side."""
        s = self.singular_values
        lo, hi = self.threshold / factor, self.threshold * factor
        return s[(s > lo) & (s < hi)]


def rank_decomposition(vectors, tol_rel=DEFAULT_RANK_TOL):
    """SVD of the stacked coordinate vectors with a relative rank cut-off."""
    if tol_rel <= 0:
        raise ValueError("tol_rel must be positive")
    vectors = [np.asarray(v, dtype=np.complex128) for v in vectors]
    if not vectors:
        raise EmptyInput("no vectors given")
    n = vectors[0].size
    if any(v.ndim != 1 or v.size != n for v in vectors):
        raise ShapeMismatch("all vectors must be 1-d of the same length")
    M = np.column_stack(vectors)
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    smax = s[0] if s.size else 0.0
    threshold = tol_rel * smax
    rank = int(np.sum(s > threshold)) if smax > 0 else 0
    basis = [U[:, k].copy() for k in range(rank)]
    return RankInfo(rank, basis, s, threshold)


def numerical_rank(vectors, tol_rel=DEFAULT_RANK_TOL):
    """Rank and an orthonormal basis of the span of coordinate vectors.

    Singular values above ``tol_rel`` times the largest one count toward the rank.
    """
    info = rank_decomposition(vectors, tol_rel)
    return info.rank, info.basis


def matrix_exp(M):
    """Matrix exponential by scaling and squaring with a Pade core."""
    A = as_square(M)
    with np.errstate(over="raise", invalid="raise"):
        try:
            E = scipy.linalg.expm(A)
        except FloatingPointError as exc:
            raise Overflow(str(exc)) from exc
    if not np.all(np.isfinite(E)):
        raise Overflow("matrix exponential overflowed")
    return E
