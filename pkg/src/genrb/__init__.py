"""Generative reduced basis methods for parametrized linear PDEs."""

from .activation import ACTIVATION_NAMES, Activation, get_activation
from .artifact import load_rom, save_rom
from .errors import GenRBError
from .genspace import build_generative_spaces
from .greedy import GreedyConfig, greedy_sample, make_training_grid
from .params import ParamBox, ParamSample
from .rom import ReducedModel, estimate_errors, offline_build, online_solve, reconstruct_field
from .space import Basis, DiscreteSpace, SnapshotSet, error_metric, pod, project

__all__ = [
    "ACTIVATION_NAMES",
    "Activation",
    "Basis",
    "DiscreteSpace",
    "GenRBError",
    "GreedyConfig",
    "ParamBox",
    "ParamSample",
    "ReducedModel",
    "SnapshotSet",
    "build_generative_spaces",
    "error_metric",
    "estimate_errors",
    "get_activation",
    "greedy_sample",
    "load_rom",
    "make_training_grid",
    "offline_build",
    "online_solve",
    "pod",
    "project",
    "reconstruct_field",
    "save_rom",
]
