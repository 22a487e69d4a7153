"""Characteristic functions of the observation process.

For times 0 = t_0 <= t_1 <= ... <= t_k the operator

    U = exp((L + i lam_1 sqrt(eta) K) t_1) ... exp((L + i lam_k sqrt(eta) K)(t_k - t_{k-1})) I

(homodyne) or the same with ``(exp(i lam) - 1) eta J`` in place of
``i lam sqrt(eta) K`` (counting) gives the joint characteristic function of
the increments Y_{t_l} - Y_{t_{l-1}} as Tr[rho U], times
exp(-sum lam_l^2 (t_l - t_{l-1}) / 2) in the homodyne case.
"""

from dataclasses import dataclass

import numpy as np

from . import matops
from .errors import GridMisaligned, ShapeMismatch
from .model import Detection, generator, measurement_superop


@dataclass(frozen=True)
class TimeLambdaGrid:
    times: tuple
    lambdas: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        lam = np.asarray(self.lambdas, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise GridMisaligned("at least one time is required")
        if lam.shape != t.shape:
            raise GridMisaligned("times and lambdas must have equal length")
        if t[0] <= 0 or np.any(np.diff(t) < 0):
            raise GridMisaligned("times must be positive and ascending")
        object.__setattr__(self, "times", tuple(float(x) for x in t))
        object.__setattr__(self, "lambdas", tuple(float(x) for x in lam))

    @property
    def increments(self):
        return np.diff(np.concatenate([[0.0], self.times]))

    def negated(self):
        return TimeLambdaGrid(self.times, tuple(-x for x in self.lambdas))


def _deformed(m, lam, Lmat, Smat):
    if m.detection is Detection.HOMODYNE:
        return Lmat + 1j * lam * np.sqrt(m.eta) * Smat
    return Lmat + (np.exp(1j * lam) - 1.0) * m.eta * Smat


def upsilon(m, grid):
    """The operator U in M_p, built right to left on vec(I)."""
    Lmat = generator(m).matrix
    Smat = measurement_superop(m).matrix
    v = matops.vectorize(np.eye(m.p, dtype=complex))
    for lam, dt in zip(reversed(grid.lambdas), reversed(grid.increments)):
        if dt == 0:
            continue
        v = matops.matrix_exp(_deformed(m, lam, Lmat, Smat) * dt) @ v
    return matops.devectorize(v, m.p)


def char_fn(m, rho, grid):
    """E[exp(i sum_l lam_l (Y_{t_l} - Y_{t_{l-1}}))] under the initial state rho."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (m.p, m.p):
        raise ShapeMismatch("state does not match the model dimension")
    value = complex(np.trace(rho @ upsilon(m, grid)))
    if m.detection is Detection.HOMODYNE:
        lam = np.asarray(grid.lambdas)
        value *= np.exp(-0.5 * np.sum(lam ** 2 * grid.increments))
    return value


def grid_indices(grid, dt, n_steps):
    """Simulation-grid step indices of the grid times.

    Each time must lie strictly within dt/2 of a grid point that the records cover.
    """
    idx = []
    for t in grid.times:
        k = int(np.floor(t / dt + 0.5))
        if abs(t - k * dt) >= 0.5 * dt or k > n_steps:
            raise GridMisaligned(f"time {t} is not on the simulation grid (dt={dt}, "
                                 f"{n_steps} steps)")
        idx.append(k)
    return np.asarray(idx)


def mc_char_fn(records, dt, grid):
    """Monte Carlo estimate of the characteristic function from observation records.

    Parameters
    ----------
    records : array_like or iterable of FilterPairPath
        Per-step increments, shape (n_paths, n_steps), or simulated paths.
    dt : float
        Step of the records.
    grid : TimeLambdaGrid

    Returns
    -------
    estimate : complex
    std_error : float
        Jackknife standard error of the sample mean.
    """
    if not isinstance(records, np.ndarray):
        records = [r.observations if hasattr(r, "observations") else r for r in records]
    X = np.asarray(records, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    n_paths, n_steps = X.shape
    idx = grid_indices(grid, dt, n_steps)
    Y = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(X, axis=1)], axis=1)
    at = Y[:, idx]
    incr = np.diff(np.concatenate([np.zeros((n_paths, 1)), at], axis=1), axis=1)
    z = np.exp(1j * incr @ np.asarray(grid.lambdas))
    return jackknife_mean(z)


def jackknife_mean(z):
    """Sample mean and its jackknife standard error."""
    z = np.asarray(z)
    n = z.size
    est = z.mean()
    if n < 2:
        return complex(est), 0.0
    loo = (z.sum() - z) / (n - 1)
    se = np.sqrt((n - 1) / n * np.sum(np.abs(loo - loo.mean()) ** 2))
    return complex(est), float(se)
