"""Experiment configuration, orchestration and CSV output.

Config files are JSON.  Complex scalars are numbers or ``[re, im]`` pairs,
matrices are row-major nested lists of such scalars, and density matrices
may also be given as ``{"diag": [...]}`` (renormalized to unit trace).
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import matops
from .abscont import DEFAULT_KERNEL_TOL, domination_constant, is_absolutely_continuous, kernel
from .charfn import TimeLambdaGrid, char_fn, mc_char_fn
from .errors import ConfigError, NotADensityMatrix, NumericalFailure, QFilterError
from .matops import DEFAULT_RANK_TOL
from .model import QsdeModel, density_matrix
from .observability import observable_space, project_observable
from .trajectories import SimulationGrid, simulate_paths

Z_FAIL = 5.0


# -- parsing -----------------------------------------------------------------

def parse_scalar(x):
    if isinstance(x, bool):
        raise ConfigError(f"not a number: {x!r}")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise ConfigError(f"cannot read complex scalar from {x!r}")


def parse_matrix(obj, p=None, name="matrix"):
    if isinstance(obj, dict) and "diag" in obj:
        A = np.diag([parse_scalar(v) for v in obj["diag"]])
    elif isinstance(obj, list) and obj and all(isinstance(row, list) for row in obj):
        try:
            A = np.array([[parse_scalar(v) for v in row] for row in obj], dtype=complex)
        except ValueError as exc:
            raise ConfigError(f"{name}: rows have unequal length") from exc
    else:
        raise ConfigError(f"{name}: expected a nested list or {{'diag': [...]}}")
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigError(f"{name}: not a square matrix")
    if p is not None and A.shape[0] != p:
        raise ConfigError(f"{name}: expected dimension {p}, got {A.shape[0]}")
    return A


def matrix_to_json(A, digits=None):
    out = []
    for row in np.asarray(A):
        r = []
        for v in row:
            re, im = float(v.real), float(v.imag)
            if digits is not None:
                re, im = round(re, digits) + 0.0, round(im, digits) + 0.0
            r.append([re, im])
        out.append(r)
    return out


def parse_model(obj):
    if not isinstance(obj, dict):
        raise ConfigError("model: expected an object")
    try:
        H = parse_matrix(obj["H"], obj.get("p"), "model.H")
        p = H.shape[0]
        lindblads = [parse_matrix(L, p, f"model.lindblads[{k}]")
                     for k, L in enumerate(obj["lindblads"])]
        return QsdeModel.create(H, lindblads, obj.get("eta", 1.0), obj.get("detection", "homodyne"))
    except KeyError as exc:
        raise ConfigError(f"model: missing field {exc}") from exc
    except (QFilterError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"model: {exc}") from exc


def parse_state(obj, p, name):
    try:
        return density_matrix(parse_matrix(obj, p, name))
    except NotADensityMatrix as exc:
        raise ConfigError(f"{name}: {exc}") from exc


@dataclass
class ExperimentConfig:
    model: QsdeModel
    rho_true: np.ndarray
    rho_filter: np.ndarray
    grid: SimulationGrid = field(default_factory=SimulationGrid)
    n_paths: int = 100
    master_seed: int = 0
    observables: dict = field(default_factory=dict)
    out_dir: Path = None
    charfn_grids: list = field(default_factory=list)
    tol_rank: float = DEFAULT_RANK_TOL
    tol_kernel: float = DEFAULT_KERNEL_TOL

    def __post_init__(self):
        if self.n_paths < 1:
            raise ConfigError("n_paths must be at least 1")
        if not self.observables:
            self.observables = {"M": self.model.measurement_observable()}
        for name, X in self.observables.items():
            if matops.hermiticity_defect(X) > 1e-8:
                raise ConfigError(f"observable {name!r} is not Hermitian")
            self.observables[name] = matops.hermitian(X)


def parse_config(obj):
    """Build an :class:`ExperimentConfig` from a decoded JSON document."""
    if not isinstance(obj, dict):
        raise ConfigError("config: expected a JSON object")
    if "model" not in obj:
        raise ConfigError("config: missing 'model'")
    model = parse_model(obj["model"])
    p = model.p
    rho_true = parse_state(obj.get("rho_true", {"diag": [1.0] * p}), p, "rho_true")
    rho_filter = parse_state(obj.get("rho_filter", {"diag": [1.0] * p}), p, "rho_filter")

    g = obj.get("grid", {})
    outputs = obj.get("outputs", {})
    try:
        dt = float(g.get("dt", 1e-3))
        if "n_steps" in g:
            n_steps = int(g["n_steps"])
        elif "t_final" in g:
            n_steps = int(round(float(g["t_final"]) / dt))
        else:
            n_steps = 10_000
        stride = int(outputs.get("stride", g.get("stride", 1)))
        grid = SimulationGrid(dt, n_steps, stride)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from exc

    observables = {}
    for name, spec in obj.get("observables", {}).items():
        if spec == "measurement":
            observables[name] = model.measurement_observable()
        else:
            observables[name] = parse_matrix(spec, p, f"observables.{name}")

    grids = []
    for k, gg in enumerate(obj.get("charfn", {}).get("grids", [])):
        try:
            grids.append(TimeLambdaGrid(tuple(gg["times"]), tuple(gg["lambdas"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"charfn.grids[{k}]: {exc}") from exc

    tols = obj.get("tolerances", {})
    out_dir = outputs.get("dir")
    try:
        return ExperimentConfig(
            model=model, rho_true=rho_true, rho_filter=rho_filter, grid=grid,
            n_paths=int(obj.get("n_paths", 100)), master_seed=int(obj.get("master_seed", 0)),
            observables=observables, out_dir=Path(out_dir) if out_dir else None,
            charfn_grids=grids,
            tol_rank=float(tols.get("rank", DEFAULT_RANK_TOL)),
            tol_kernel=float(tols.get("kernel", DEFAULT_KERNEL_TOL)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path):
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(obj)


# -- reports -----------------------------------------------------------------

def run_observability_report(model, observables=None, tol_rank=DEFAULT_RANK_TOL):
    """Dimension, basis and verdict of the observable space, plus projection residuals."""
    space = observable_space(model, tol_rank)
    observables = dict(observables or {})
    observables.setdefault("M", model.measurement_observable())
    residuals = {}
    for name, X in observables.items():
        _, res = project_observable(space, X)
        norm = matops.hs_norm(X)
        residuals[name] = {"residual": res, "relative": res / norm if norm > 0 else 0.0,
                           "in_space": bool(res <= 10 * tol_rank * max(norm, 1e-300))}
    return {
        "p": model.p,
        "detection": model.detection.value,
        "dimension": space.dimension,
        "full_dimension": model.p ** 2,
        "observable": space.is_full,
        "iterations": space.iterations_used,
        "dimension_per_iteration": space.dimensions,
        "borderline": space.borderline,
        "borderline_singular_values": space.borderline_singular_values,
        "tol_rank": tol_rank,
        "basis": [matrix_to_json(B, 12) for B in space.basis_matrices()],
        "projection_residuals": residuals,
    }


def format_observability_report(rep):
    verdict = "observable" if rep["observable"] else "NOT observable"
    lines = [
        f"model: p={rep['p']}, {rep['detection']} detection",
        f"observable space: dim {rep['dimension']} of {rep['full_dimension']} -> {verdict}",
        f"growth per iteration: {rep['dimension_per_iteration']}",
    ]
    if rep["borderline"]:
        lines.append(f"WARNING: singular values near the rank cut-off: {rep['borderline_singular_values']}")
    for name, r in rep["projection_residuals"].items():
        where = "in" if r["in_space"] else "outside"
        lines.append(f"  {name}: residual {r['residual']:.3e} ({where} the observable space)")
    return "\n".join(lines)


def run_abscont_report(rho_true, rho_filter, tol_kernel=DEFAULT_KERNEL_TOL):
    ac = is_absolutely_continuous(rho_true, rho_filter, tol_kernel)
    return {
        "absolutely_continuous": ac,
        "kernel_dim_true": int(kernel(rho_true, tol_kernel).shape[1]),
        "kernel_dim_filter": int(kernel(rho_filter, tol_kernel).shape[1]),
        "domination_constant": domination_constant(rho_true, rho_filter, tol_kernel) if ac else 0.0,
        "tol_kernel": tol_kernel,
    }


def format_abscont_report(rep):
    verdict = "holds" if rep["absolutely_continuous"] else "FAILS"
    return "\n".join([
        f"absolute continuity rho_true << rho_filter: {verdict}",
        f"  kernel dims: true {rep['kernel_dim_true']}, filter {rep['kernel_dim_filter']}",
        f"  domination constant: {rep['domination_constant']:.6g}",
    ])


@dataclass
class StabilityReport:
    times: np.ndarray
    mean_abs_diff: dict
    stderr: dict
    trace_distance: np.ndarray
    stderr_trace_distance: np.ndarray
    metadata: dict

    def columns(self):
        cols = ["t"]
        for name in self.mean_abs_diff:
            cols += [f"mean_abs_diff_{name}", f"stderr_{name}"]
        return cols + ["trace_distance", "stderr_trace_distance"]

    def rows(self):
        for k, t in enumerate(self.times):
            row = [t]
            for name in self.mean_abs_diff:
                row += [self.mean_abs_diff[name][k], self.stderr[name][k]]
            yield row + [self.trace_distance[k], self.stderr_trace_distance[k]]

    def write_csv(self, path):
        write_csv(path, self.columns(), self.rows())


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


class _Moments:
    """Running sums in path-index order."""

    def __init__(self):
        self.n = 0
        self.s1 = None
        self.s2 = None

    def add(self, x):
        x = np.asarray(x, dtype=float)
        if self.s1 is None:
            self.s1 = np.zeros_like(x)
            self.s2 = np.zeros_like(x)
        self.n += 1
        self.s1 += x
        self.s2 += x * x

    def mean(self):
        return self.s1 / self.n

    def stderr(self):
        if self.n < 2:
            return np.zeros_like(self.s1)
        var = (self.s2 - self.s1 ** 2 / self.n) / (self.n - 1)
        return np.sqrt(np.clip(var, 0.0, None) / self.n)


def run_stability(cfg, progress=None):
    """Monte Carlo estimate of E|pi_t^{rho1}(X) - pi_t^{rho2}(X)| and of the trace distance.

    Paths aborted by a numerical failure (e.g. a jump the misspecified filter
    deems impossible) are excluded from the averages and counted in the
    metadata.
    """
    m = cfg.model
    space = observable_space(m, cfg.tol_rank)
    ac = is_absolutely_continuous(cfg.rho_true, cfg.rho_filter, cfg.tol_kernel)
    moments = {name: _Moments() for name in cfg.observables}
    td = _Moments()
    aborts = {}
    n_clips = 0
    min_eig = np.inf
    times = None
    for i, path in simulate_paths(m, cfg.rho_true, cfg.rho_filter, cfg.grid, cfg.master_seed,
                                  cfg.n_paths, check_abscont=False):
        if progress is not None:
            progress(i)
        if isinstance(path, Exception):
            key = type(path).__name__
            aborts[key] = aborts.get(key, 0) + 1
            continue
        times = path.times
        for name, X in cfg.observables.items():
            moments[name].add(path.abs_diff(X))
        td.add(path.trace_distance())
        n_clips += path.n_clips
        min_eig = min(min_eig, path.min_eigenvalue)
    if td.n == 0:
        raise NumericalFailure(f"all {cfg.n_paths} paths aborted: {aborts}")
    metadata = {
        "observable": space.is_full,
        "observable_space_dim": space.dimension,
        "observability_borderline": space.borderline,
        "absolutely_continuous": ac,
        "n_paths": cfg.n_paths,
        "n_paths_used": td.n,
        "aborts": aborts,
        "clip_events": n_clips,
        "min_eigenvalue_before_clipping": float(min_eig),
        "master_seed": cfg.master_seed,
        "dt": cfg.grid.dt,
        "n_steps": cfg.grid.n_steps,
    }
    return StabilityReport(
        times=times,
        mean_abs_diff={k: v.mean() for k, v in moments.items()},
        stderr={k: v.stderr() for k, v in moments.items()},
        trace_distance=td.mean(),
        stderr_trace_distance=td.stderr(),
        metadata=metadata,
    )


def observation_records(cfg, t_max=None):
    """Observation increments of cfg.n_paths records under rho_true, shape (n_paths, n_steps)."""
    n = cfg.grid.n_steps
    if t_max is not None:
        n = max(1, int(math.floor(t_max / cfg.grid.dt + 0.5)))
    grid = SimulationGrid(cfg.grid.dt, n, n)
    out = []
    for _, path in simulate_paths(cfg.model, cfg.rho_true, cfg.rho_true, grid, cfg.master_seed,
                                  cfg.n_paths, track_mis=False, check_abscont=False):
        if isinstance(path, Exception):
            raise path
        out.append(path.observations)
    return np.array(out), grid.dt


@dataclass
class CharFnRow:
    grid_id: int
    exact: complex
    mc: complex
    stderr: float

    @property
    def zscore(self):
        err = abs(self.mc - self.exact)
        if self.stderr == 0:
            return 0.0 if err == 0 else math.inf
        return err / self.stderr


def run_charfn_check(cfg, grids=None):
    """Exact characteristic function vs Monte Carlo estimate on each grid."""
    grids = list(grids if grids is not None else cfg.charfn_grids)
    if not grids:
        raise ConfigError("no characteristic-function grids given")
    t_max = max(g.times[-1] for g in grids)
    records, dt = observation_records(cfg, t_max)
    rows = []
    for k, g in enumerate(grids):
        exact = char_fn(cfg.model, cfg.rho_true, g)
        mc, se = mc_char_fn(records, dt, g)
        rows.append(CharFnRow(k, exact, mc, se))
    return rows


def charfn_passed(rows, z_fail=Z_FAIL):
    return all(abs(r.zscore) <= z_fail for r in rows)


def write_charfn_csv(path, rows):
    header = ["grid_id", "exact_re", "exact_im", "mc_re", "mc_im", "stderr", "zscore"]
    write_csv(path, header, ([r.grid_id, r.exact.real, r.exact.imag, r.mc.real, r.mc.imag,
                              r.stderr, r.zscore] for r in rows))


def write_simulation_csv(cfg, out_dir):
    """Per-path filter expectations and observation increments."""
    out_dir = Path(out_dir)
    names = list(cfg.observables)
    traj_header = ["path", "t"]
    for name in names:
        traj_header += [f"true_{name}", f"filter_{name}"]
    traj_header.append("trace_distance")
    traj_rows, obs_rows = [], []
    summary = {"clip_events": 0, "min_eigenvalue_before_clipping": math.inf, "aborts": {}}
    for i, path in simulate_paths(cfg.model, cfg.rho_true, cfg.rho_filter, cfg.grid,
                                  cfg.master_seed, cfg.n_paths):
        if isinstance(path, Exception):
            key = type(path).__name__
            summary["aborts"][key] = summary["aborts"].get(key, 0) + 1
            continue
        summary["clip_events"] += path.n_clips
        summary["min_eigenvalue_before_clipping"] = min(
            summary["min_eigenvalue_before_clipping"], path.min_eigenvalue)
        vals = [(path.expectation(X, "true"), path.expectation(X, "mis")) for X in cfg.observables.values()]
        tdist = path.trace_distance()
        for k, t in enumerate(path.times):
            row = [i, t]
            for a, b in vals:
                row += [a[k], b[k]]
            traj_rows.append(row + [tdist[k]])
        for k, dy in enumerate(path.observations):
            obs_rows.append([i, k + 1, (k + 1) * cfg.grid.dt, dy])
    write_csv(out_dir / "trajectories.csv", traj_header, traj_rows)
    write_csv(out_dir / "observations.csv", ["path", "step", "t", "dY"], obs_rows)
    return summary
