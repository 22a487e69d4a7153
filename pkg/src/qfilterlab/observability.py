"""Observable space of a model and the observability rank test.

The observable space is the smallest subspace of M_p that contains the
identity and is invariant under the generator and the measurement
superoperator.  It is grown as

    Z_0 = span{I},   Z_n = span{Z_{n-1}, L[Z_{n-1}], K[Z_{n-1}]}

until the dimension stops increasing (at most p^2 rounds).  Each round
re-orthonormalizes the whole candidate set with one SVD.
"""

from dataclasses import dataclass, field

import numpy as np

from . import matops
from .matops import DEFAULT_RANK_TOL
from .model import generator, measurement_superop
from .errors import ShapeMismatch


@dataclass(frozen=True)
class ObservableSpace:
    dim_p: int
    basis: list
    iterations_used: int
    dimensions: list = field(default_factory=list)
    borderline_singular_values: list = field(default_factory=list)
    tol_rel: float = DEFAULT_RANK_TOL

    @property
    def dimension(self):
        return len(self.basis)

    @property
    def is_full(self):
        return self.dimension == self.dim_p ** 2

    @property
    def borderline(self):
        """True if some singular value fell within a factor 10 of the rank cut-off."""
        return len(self.borderline_singular_values) > 0

    def basis_matrices(self):
        return [matops.devectorize(b, self.dim_p) for b in self.basis]

    def projector(self):
        """Orthogonal projector onto the space, on column-stacked coordinates."""
        if not self.basis:
            return np.zeros((self.dim_p ** 2,) * 2, dtype=complex)
        B = np.column_stack(self.basis)
        return B @ B.conj().T


def observable_space(m, tol_rel=DEFAULT_RANK_TOL):
    """Grow Z_n from the identity until it stabilizes."""
    p = m.p
    Lmat = generator(m).matrix
    Kmat = measurement_superop(m).matrix
    info = matops.rank_decomposition([matops.vectorize(np.eye(p))], tol_rel)
    basis = info.basis
    dims = [info.rank]
    borderline = list(info.borderline())
    n = 0
    while True:
        n += 1
        candidates = list(basis)
        candidates += [Lmat @ b for b in basis]
        candidates += [Kmat @ b for b in basis]
        info = matops.rank_decomposition(candidates, tol_rel)
        borderline.extend(info.borderline())
        dims.append(info.rank)
        if info.rank <= len(basis) or n >= p * p:
            # dimension did not grow: the previous basis spans the fixed point
            if info.rank > len(basis):
                basis = info.basis
            break
        basis = info.basis
    return ObservableSpace(p, basis, n, dims, [float(s) for s in borderline], tol_rel)


def is_observable(m, tol_rel=DEFAULT_RANK_TOL):
    return observable_space(m, tol_rel).is_full


def project_observable(space, X):
    """Orthogonal projection of X onto the space and the Hilbert-Schmidt residual norm."""
    X = matops.as_square(X)
    if X.shape != (space.dim_p, space.dim_p):
        raise ShapeMismatch(f"expected a {space.dim_p}x{space.dim_p} matrix")
    x = matops.vectorize(X)
    proj = np.zeros_like(x)
    for b in space.basis:
        proj = proj + np.vdot(b, x) * b
    residual = float(np.linalg.norm(x - proj))
    return matops.devectorize(proj, space.dim_p), residual


def contains(space, X, tol=None):
    """Whether X lies in the space up to a relative residual of ``tol``."""
    tol = 10 * space.tol_rel if tol is None else tol
    _, residual = project_observable(space, X)
    return residual <= tol * max(matops.hs_norm(X), 1e-300)


def invariance_residuals(m, space):
    """Largest residuals of L[b] and K[b] off the space, over basis elements b."""
    P = space.projector()
    eye = np.eye(P.shape[0])
    out = {}
    for name, S in (("generator", generator(m)), ("measurement", measurement_superop(m))):
        res = [np.linalg.norm((eye - P) @ (S.matrix @ b)) for b in space.basis]
        out[name] = max(res) if res else 0.0
    return out


def unobservable_direction(space, rng=None):
    """A Hermitian, traceless matrix orthogonal to the space (None if the space is full).

    Adding a small multiple of it to a density matrix leaves every observation
    law unchanged.
    """
    if space.is_full:
        return None
    rng = np.random.default_rng(0) if rng is None else rng
    P = space.projector()
    p = space.dim_p
    # the space is closed under adjoints, so its complement is too
    for _ in range(20):
        Z = rng.normal(size=(p, p)) + 1j * rng.normal(size=(p, p))
        z = matops.vectorize(Z + Z.conj().T)
        d = z - P @ z
        D = matops.hermitian(matops.devectorize(d, p))
        if np.linalg.norm(D) > 1e-6:
            return D / np.linalg.norm(D)
    return None
