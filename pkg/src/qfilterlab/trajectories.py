"""Observation records and paired quantum filters.

Filters are integrated in state (Schroedinger) form with Euler-Maruyama,
then symmetrized, clipped to the PSD cone and renormalized after every step.
The true filter generates the observation record; the misspecified filter
is driven by the very same increments.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels, matops
from .abscont import is_absolutely_continuous
from .errors import JumpFromDarkState, NumericalFailure, ShapeMismatch, StepTooLarge
from .model import Detection, density_matrix, generator, measurement_superop, predual

log = logging.getLogger(__name__)

JUMP_PROB_WARNING = 0.1


@dataclass(frozen=True)
class SimulationGrid:
    dt: float = 1e-3
    n_steps: int = 10_000
    stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1 or self.stride < 1:
            raise ValueError("n_steps and stride must be positive")

    @property
    def t_final(self):
        return self.dt * self.n_steps

    @classmethod
    def covering(cls, t_final, dt=1e-3, stride=1):
        return cls(dt, int(round(t_final / dt)), stride)


@dataclass(frozen=True)
class SeedSpec:
    """Seed for one path; distinct (master_seed, path_index) give independent streams."""

    master_seed: int
    path_index: int = 0

    def rng(self):
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.path_index,))
        return np.random.default_rng(ss)


@dataclass
class FilterPairPath:
    times: np.ndarray
    rho_true: np.ndarray
    rho_mis: np.ndarray
    observations: np.ndarray
    dt: float
    n_clips: int = 0
    min_eigenvalue: float = 0.0
    max_trace_deviation: float = 0.0
    max_jump_probability: float = 0.0

    def expectation(self, X, which="true"):
        R = self.rho_true if which == "true" else self.rho_mis
        return np.einsum("ij,tji->t", np.asarray(X, dtype=complex), R).real

    def abs_diff(self, X):
        X = np.asarray(X, dtype=complex)
        return np.abs(np.einsum("ij,tji->t", X, self.rho_true - self.rho_mis).real)

    def trace_distance(self):
        return trace_distance(self.rho_true, self.rho_mis)

    def observation_process(self):
        """Y on the full simulation grid, starting from Y_0 = 0."""
        return np.concatenate([[0.0], np.cumsum(self.observations)])


def trace_distance(a, b):
    """Half the trace norm of a - b; works on stacks of matrices."""
    d = np.asarray(a) - np.asarray(b)
    return 0.5 * np.abs(np.linalg.eigvalsh(d)).sum(axis=-1)


def _coefficients(m):
    Ls = np.ascontiguousarray(np.array(m.lindblads, dtype=np.complex128))
    K = -1j * m.H - 0.5 * sum(L.conj().T @ L for L in m.lindblads)
    return np.ascontiguousarray(K), Ls


def _finish(raw):
    out, clipped, min_eig, tr, _ = _kernels.reproject(np.ascontiguousarray(raw))
    if abs(tr - 1.0) > _kernels.TRACE_GUARD:
        raise StepTooLarge(f"trace {tr:.3f} before renormalization; reduce dt")
    return out


def homodyne_step(m, rho, dY, dt):
    """One Euler-Maruyama step of the diffusive filter, reprojected onto the states."""
    if m.detection is not Detection.HOMODYNE:
        raise ValueError("homodyne_step needs a homodyne model")
    if not dt > 0:
        raise ValueError("dt must be positive")
    K, Ls = _coefficients(m)
    raw = _kernels.homodyne_raw(np.ascontiguousarray(rho, dtype=complex), float(dY), K, Ls, m.eta, dt)
    return _finish(raw)


def counting_step(m, rho, jumped, dt):
    """One step of the counting filter: a jump update or the no-jump drift."""
    if m.detection is not Detection.COUNTING:
        raise ValueError("counting_step needs a counting model")
    if not dt > 0:
        raise ValueError("dt must be positive")
    K, Ls = _coefficients(m)
    raw, ok = _kernels.counting_raw(np.ascontiguousarray(rho, dtype=complex), bool(jumped), K, Ls, m.eta, dt)
    if not ok:
        raise JumpFromDarkState("jump recorded while Tr[L1 rho L1^*] vanishes")
    return _finish(raw)


def sample_observation_increment(m, rho_true, dt, rng):
    """Draw dY for one step under the true conditional state."""
    rho = np.asarray(rho_true, dtype=complex)
    L = m.L1
    if m.detection is Detection.HOMODYNE:
        mean = np.sqrt(m.eta) * np.trace((L + L.conj().T) @ rho).real * dt
        return mean + np.sqrt(dt) * rng.standard_normal()
    prob = min(m.eta * np.trace(L @ rho @ L.conj().T).real * dt, 1.0)
    return bool(rng.random() < prob)


def _draw_noise(m, n_steps, rng):
    if m.detection is Detection.HOMODYNE:
        return rng.standard_normal(n_steps)
    return rng.random(n_steps)


def simulate_pair(m, rho1, rho2, grid, seed, check_abscont=True, track_mis=True):
    """Simulate one observation record under rho1 with filters started at rho1 and rho2.

    Parameters
    ----------
    m : QsdeModel
    rho1, rho2 : array_like
        True initial state and filter initialization.
    grid : SimulationGrid
    seed : SeedSpec or numpy Generator
    check_abscont : bool
        Warn when rho1 is not absolutely continuous w.r.t. rho2.
    track_mis : bool
        If False only the true filter is integrated and ``rho_mis`` mirrors it.

    Raises
    ------
    JumpFromDarkState
        The misspecified filter saw a jump it deems impossible.
    StepTooLarge
        Clipping removed more than half the trace in one step.
    """
    rho1 = density_matrix(rho1)
    rho2 = density_matrix(rho2)
    if rho1.shape != (m.p, m.p) or rho2.shape != (m.p, m.p):
        raise ShapeMismatch("initial states do not match the model dimension")
    if check_abscont and not is_absolutely_continuous(rho1, rho2):
        warnings.warn("true initial state is not absolutely continuous with respect to the "
                      "filter initialization; filter stability is not guaranteed", stacklevel=2)
    rng = seed.rng() if isinstance(seed, SeedSpec) else seed
    noise = _draw_noise(m, grid.n_steps, rng)
    return run_with_noise(m, rho1, rho2, grid, noise, track_mis)


def run_with_noise(m, rho1, rho2, grid, noise, track_mis=True):
    """Like :func:`simulate_pair` but with explicit driving noise.

    ``noise`` holds standard normals (homodyne) or uniforms on [0, 1)
    (counting), one per step.
    """
    K, Ls = _coefficients(m)
    mode = _kernels.HOMODYNE if m.detection is Detection.HOMODYNE else _kernels.COUNTING
    noise = np.ascontiguousarray(noise, dtype=np.float64)
    (states, steps, obs, n_clips, min_eig, max_dev, max_prob,
     status, status_step, branch) = _kernels.run_pair(
        mode, K, Ls, float(m.eta), float(grid.dt),
        np.ascontiguousarray(rho1, dtype=complex), np.ascontiguousarray(rho2, dtype=complex),
        noise, int(grid.stride), bool(track_mis))
    if status == _kernels.DARK_JUMP:
        which = "misspecified" if branch == 1 else "true"
        raise JumpFromDarkState(
            f"{which} filter received a jump at step {status_step} while its jump intensity "
            f"vanishes (absolute continuity fails)", step=int(status_step), branch=which)
    if status == _kernels.STEP_TOO_LARGE:
        raise StepTooLarge(f"trace deviation above {_kernels.TRACE_GUARD} at step {status_step}; reduce dt")
    if max_prob > JUMP_PROB_WARNING:
        warnings.warn(f"per-step jump probability reached {max_prob:.3f}; dt is coarse "
                      "for the jump intensity", stacklevel=3)
    return FilterPairPath(
        times=steps * grid.dt,
        rho_true=states[:, 0],
        rho_mis=states[:, 1],
        observations=obs,
        dt=grid.dt,
        n_clips=int(n_clips),
        min_eigenvalue=float(min_eig),
        max_trace_deviation=float(max_dev),
        max_jump_probability=float(max_prob),
    )


def simulate_paths(m, rho1, rho2, grid, master_seed, n_paths, track_mis=True, check_abscont=True):
    """Yield (path_index, FilterPairPath or exception) for consecutive path indices.

    Numerical failures are yielded rather than raised so callers can count them.
    """
    if check_abscont and not is_absolutely_continuous(density_matrix(rho1), density_matrix(rho2)):
        warnings.warn("true initial state is not absolutely continuous with respect to the "
                      "filter initialization; filter stability is not guaranteed", stacklevel=2)
    for i in range(n_paths):
        try:
            path = simulate_pair(m, rho1, rho2, grid, SeedSpec(master_seed, i),
                                 check_abscont=False, track_mis=track_mis)
        except NumericalFailure as exc:
            log.debug("path %d aborted: %s", i, exc)
            yield i, exc
            continue
        yield i, path


def filter_on_record(m, rho0, observations, dt):
    """Run the state-form filter on a given record of increments.

    Returns the conditional states on every step, shape (n_steps + 1, p, p).
    """
    rho = density_matrix(rho0)
    K, Ls = _coefficients(m)
    homodyne = m.detection is Detection.HOMODYNE
    out = np.empty((len(observations) + 1, m.p, m.p), dtype=complex)
    out[0] = rho
    for k, dY in enumerate(observations):
        if homodyne:
            raw = _kernels.homodyne_raw(rho, float(dY), K, Ls, m.eta, dt)
        else:
            raw, ok = _kernels.counting_raw(rho, bool(dY), K, Ls, m.eta, dt)
            if not ok:
                raise JumpFromDarkState("jump recorded while the filter's intensity vanishes", step=k)
        rho = _finish(raw)
        out[k + 1] = rho
    return out


def heisenberg_filter_path(m, rho0, observations, dt):
    """Integrate the filter as a linear functional X -> pi_t(X).

    The functional is stored as a row vector f with pi(X) = f . vec(X) and
    advanced as

        f <- f exp(L dt) + innovation term

    i.e. exact Heisenberg semigroup for the drift and an Euler step for the
    observation-driven part.  Returns an array of shape (n_steps + 1, p, p)
    holding the density matrices that represent the functionals.
    """
    p = m.p
    rho0 = np.asarray(rho0, dtype=complex)
    E = matops.matrix_exp(generator(m).matrix * dt)
    S = measurement_superop(m).matrix
    meas = matops.vectorize(m.measurement_observable())
    f = matops.vectorize(rho0.T)
    se = np.sqrt(m.eta)
    out = np.empty((len(observations) + 1, p, p), dtype=complex)
    out[0] = rho0
    for k, dY in enumerate(observations):
        pm = (f @ meas).real
        if m.detection is Detection.HOMODYNE:
            f = f @ E + se * (f @ S - pm * f) * (dY - se * pm * dt)
        else:
            if dY and pm <= _kernels.DARK_THRESHOLD:
                raise JumpFromDarkState("jump recorded while the filter's intensity vanishes", step=k)
            jump = (f @ S) / pm - f if pm > _kernels.DARK_THRESHOLD else np.zeros_like(f)
            f = f @ E + jump * (dY - m.eta * pm * dt)
        out[k + 1] = matops.devectorize(f, p).T
    return out


def unconditional_state(m, rho, t):
    """exp(t L_*) rho: the average of the conditional state over records."""
    G = predual(generator(m)).matrix
    return matops.devectorize(matops.matrix_exp(G * t) @ matops.vectorize(rho), m.p)
