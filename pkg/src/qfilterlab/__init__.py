"""Numerical laboratory for finite-dimensional quantum filtering.

Decides observability and absolute continuity for a quantum stochastic
model, simulates correct and misspecified filters on shared observation
records, and checks filter stability against exact characteristic functions.
"""

from .abscont import is_absolutely_continuous, kernel
from .charfn import TimeLambdaGrid, char_fn, mc_char_fn, upsilon
from .errors import QFilterError
from .model import (Detection, QsdeModel, Superoperator, density_matrix, generator,
                    measurement_superop, predual, validate_model)
from .observability import ObservableSpace, is_observable, observable_space, project_observable
from .trajectories import (FilterPairPath, SeedSpec, SimulationGrid, counting_step, homodyne_step,
                           sample_observation_increment, simulate_pair)

__version__ = "0.1.0"

__all__ = [
    "Detection", "FilterPairPath", "ObservableSpace", "QFilterError", "QsdeModel", "SeedSpec",
    "SimulationGrid", "Superoperator", "TimeLambdaGrid", "char_fn", "counting_step",
    "density_matrix", "generator", "homodyne_step", "is_absolutely_continuous",
    "is_observable", "kernel", "mc_char_fn", "measurement_superop", "observable_space",
    "predual", "project_observable", "sample_observation_increment", "simulate_pair",
    "upsilon", "validate_model",
]
