"""Absolute continuity of finite-dimensional states via kernel containment.

rho1 << rho2 holds iff ker(rho1) contains ker(rho2).
"""

import numpy as np

from . import matops
from .errors import ShapeMismatch
from .model import density_matrix

DEFAULT_KERNEL_TOL = 1e-9


def kernel(rho, tol_abs=DEFAULT_KERNEL_TOL):
    """Orthonormal basis (as columns of a p x k array) of eigenvectors with eigenvalue <= tol_abs."""
    if tol_abs <= 0:
        raise ValueError("tol_abs must be positive")
    w, V = matops.hermitian_eig(rho)
    return V[:, w <= tol_abs]


def range_basis(rho, tol_abs=DEFAULT_KERNEL_TOL):
    w, V = matops.hermitian_eig(rho)
    return V[:, w > tol_abs]


def is_absolutely_continuous(rho1, rho2, tol_abs=DEFAULT_KERNEL_TOL):
    """True iff every kernel vector v of rho2 satisfies ||rho1 v|| <= tol_abs."""
    R1 = matops.as_square(rho1)
    R2 = matops.as_square(rho2)
    if R1.shape != R2.shape:
        raise ShapeMismatch(f"states of shapes {R1.shape} and {R2.shape}")
    K2 = kernel(R2, tol_abs)
    if K2.shape[1] == 0:
        return True
    return bool(np.all(np.linalg.norm(R1 @ K2, axis=0) <= tol_abs))


def domination_constant(rho1, rho2, tol_abs=DEFAULT_KERNEL_TOL):
    """Largest eps with rho2 - eps * rho1 >= 0, or 0.0 if rho1 is not dominated.

    Computed on the range of rho2 as 1 / lambda_max(rho2^{-1/2} rho1 rho2^{-1/2}).
    """
    if not is_absolutely_continuous(rho1, rho2, tol_abs):
        return 0.0
    R1 = matops.as_square(rho1)
    w, V = matops.hermitian_eig(rho2)
    keep = w > tol_abs
    Vr = V[:, keep]
    inv_sqrt = Vr / np.sqrt(w[keep])
    T = inv_sqrt.conj().T @ R1 @ inv_sqrt
    top = matops.hermitian_eig(T)[0][-1]
    return float(1.0 / top) if top > 0 else np.inf


def random_density_matrix(p, rank=None, rng=None, support=None):
    """Random state of the given rank, optionally supported in the span of the columns of ``support``."""
    rng = np.random.default_rng() if rng is None else rng
    if support is None:
        support = np.eye(p, dtype=complex)
    k = support.shape[1]
    rank = k if rank is None else rank
    G = rng.normal(size=(k, rank)) + 1j * rng.normal(size=(k, rank))
    A = support @ G
    return density_matrix(A @ A.conj().T)
