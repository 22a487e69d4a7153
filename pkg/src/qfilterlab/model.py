"""Finite-dimensional quantum stochastic model and its superoperators.

The scattering matrix is fixed to the identity; neither the generator, the
filters nor the characteristic functions depend on it.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import matops
from .errors import BadEta, BadShape, NonHermitianH, NotADensityMatrix, ShapeMismatch

HERMITIAN_TOL = 1e-8
PSD_TOL = 1e-8


class Detection(enum.Enum):
    HOMODYNE = "homodyne"
    COUNTING = "counting"


def density_matrix(rho, psd_tol=PSD_TOL):
    """Clean up a candidate density matrix.

    The input is symmetrized, eigenvalues in ``[-psd_tol, 0)`` are clipped to
    zero and the result is scaled to unit trace.  Anything further from a
    state raises :class:`NotADensityMatrix`.
    """
    R = np.asarray(rho, dtype=np.complex128)
    if R.ndim == 1:
        R = np.diag(R)
    R = matops.as_square(R)
    if matops.hermiticity_defect(R) > HERMITIAN_TOL:
        raise NotADensityMatrix("density matrix is not Hermitian")
    w, V = matops.hermitian_eig(R)
    scale = max(abs(w).max(), 1e-300)
    if w[0] < -psd_tol * scale:
        raise NotADensityMatrix(f"negative eigenvalue {w[0]:.3g}")
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        R = (V * w) @ V.conj().T
    else:
        R = matops.hermitian(R)
    tr = np.trace(R).real
    if tr <= 0:
        raise NotADensityMatrix("density matrix has zero trace")
    return R / tr


def pure_state(p, k):
    """Projector onto the k-th basis vector (0-based)."""
    R = np.zeros((p, p), dtype=np.complex128)
    R[k, k] = 1.0
    return R


def maximally_mixed(p):
    return np.eye(p, dtype=np.complex128) / p


@dataclass(frozen=True)
class QsdeModel:
    """Coefficients of a Hudson-Parthasarathy model with S = I.

    ``lindblads[0]`` is the monitored channel.  Construct through
    :func:`validate_model` (or :meth:`create`) to get shape and
    Hermiticity checks.
    """

    H: np.ndarray
    lindblads: tuple
    eta: float = 1.0
    detection: Detection = Detection.HOMODYNE

    @property
    def p(self):
        return self.H.shape[0]

    @property
    def L1(self):
        return self.lindblads[0]

    @classmethod
    def create(cls, H, lindblads, eta=1.0, detection="homodyne"):
        return validate_model(cls(H, tuple(lindblads), eta, Detection(detection)))

    def measurement_observable(self):
        """L1 + L1^* for homodyne detection, L1^* L1 for counting."""
        L = self.L1
        if self.detection is Detection.HOMODYNE:
            return L + L.conj().T
        return L.conj().T @ L

    def conjugated(self, U):
        """The same model in a rotated basis: H -> U H U^*, L -> U L U^*."""
        U = np.asarray(U, dtype=np.complex128)
        Ud = U.conj().T
        return validate_model(QsdeModel(
            U @ self.H @ Ud, tuple(U @ L @ Ud for L in self.lindblads),
            self.eta, self.detection))

    def with_detection(self, detection):
        return QsdeModel(self.H, self.lindblads, self.eta, Detection(detection))


def validate_model(m):
    """Check shapes, efficiency and Hermiticity; returns a cleaned copy."""
    try:
        H = matops.as_square(m.H)
    except ValueError as exc:
        raise BadShape(f"Hamiltonian: {exc}") from exc
    p = H.shape[0]
    lindblads = []
    for k, L in enumerate(m.lindblads):
        try:
            L = matops.as_matrix(L)
        except ValueError as exc:
            raise BadShape(f"Lindblad operator {k}: {exc}") from exc
        if L.shape != (p, p):
            raise BadShape(f"Lindblad operator {k} has shape {L.shape}, expected {(p, p)}")
        lindblads.append(L)
    if not lindblads:
        raise BadShape("at least one Lindblad operator (the monitored channel) is required")
    eta = float(m.eta)
    if not 0.0 < eta <= 1.0:
        raise BadEta(f"detection efficiency must lie in (0, 1], got {eta}")
    if matops.hermiticity_defect(H) > HERMITIAN_TOL:
        raise NonHermitianH("Hamiltonian is not Hermitian")
    return QsdeModel(matops.hermitian(H), tuple(lindblads), eta, Detection(m.detection))


@dataclass(frozen=True)
class Superoperator:
    """Linear map on M_p stored as a p^2 x p^2 matrix on column-stacked coordinates."""

    dim_p: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.matrix.shape != (self.dim_p ** 2, self.dim_p ** 2):
            raise ShapeMismatch(
                f"superoperator matrix {self.matrix.shape} does not act on M_{self.dim_p}")

    def apply(self, X):
        X = matops.as_square(X)
        if X.shape != (self.dim_p, self.dim_p):
            raise ShapeMismatch(f"expected a {self.dim_p}x{self.dim_p} matrix")
        return matops.devectorize(self.matrix @ matops.vectorize(X), self.dim_p)

    __call__ = apply

    def predual(self):
        return predual(self)

    def __add__(self, other):
        return Superoperator(self.dim_p, self.matrix + other.matrix)

    def __mul__(self, c):
        return Superoperator(self.dim_p, c * self.matrix)

    __rmul__ = __mul__

    @classmethod
    def identity(cls, p):
        return cls(p, np.eye(p * p, dtype=np.complex128))


def generator(m):
    """Heisenberg-picture Lindblad generator

    X -> i[H, X] + sum_k (L_k^* X L_k - (L_k^* L_k X + X L_k^* L_k) / 2).
    """
    p = m.p
    eye = np.eye(p)
    G = 1j * (matops.sandwich(m.H, eye) - matops.sandwich(eye, m.H))
    for L in m.lindblads:
        Ld = L.conj().T
        LdL = Ld @ L
        G = G + matops.sandwich(Ld, L) - 0.5 * (matops.sandwich(LdL, eye) + matops.sandwich(eye, LdL))
    return Superoperator(p, G)


def measurement_superop(m):
    """X -> L1^* X + X L1 (homodyne) or X -> L1^* X L1 (counting)."""
    p = m.p
    L = m.L1
    Ld = L.conj().T
    if m.detection is Detection.HOMODYNE:
        eye = np.eye(p)
        S = matops.sandwich(Ld, eye) + matops.sandwich(eye, L)
    else:
        S = matops.sandwich(Ld, L)
    return Superoperator(p, S)


def _transpose_permutation(p):
    """Permutation P with vec(X^T) = P vec(X)."""
    idx = np.arange(p * p).reshape(p, p, order="F").T.reshape(-1, order="F")
    return np.eye(p * p)[idx]


def predual(s):
    """Map s_* with Tr[s_*(rho) X] = Tr[rho s(X)] for all rho, X."""
    P = _transpose_permutation(s.dim_p)
    return Superoperator(s.dim_p, P @ s.matrix.T @ P)
