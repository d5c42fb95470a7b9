"""Random walks on {0, ..., N} absorbed at both ends: range, local times and parities."""
from .errors import StripwalkError
from .model import (
    Alpha,
    Asymmetric,
    Fixed,
    Side,
    Symmetric,
    UniformRandom,
    WalkSpec,
    WeaklyAsymmetric,
    resolve_probabilities,
)
from .rng import Stream
from .walk import EnsembleSummary, Parity, WalkOutcome, parity_of, run_ensemble, simulate_walk

__all__ = [
    "Alpha",
    "Asymmetric",
    "EnsembleSummary",
    "Fixed",
    "Parity",
    "Side",
    "Stream",
    "StripwalkError",
    "Symmetric",
    "UniformRandom",
    "WalkOutcome",
    "WalkSpec",
    "WeaklyAsymmetric",
    "parity_of",
    "resolve_probabilities",
    "run_ensemble",
    "simulate_walk",
]

__version__ = "0.1.0"
