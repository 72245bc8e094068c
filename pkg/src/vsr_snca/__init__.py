"""Embodied neural cellular automaton controllers for 2D voxel soft robots,
with tanh-MLP or leaky integrate-and-fire spiking cells."""

__version__ = "0.1.0"

from .errors import (ConfigError, GenotypeShapeError, InvalidBody, InvalidProtocol,  # noqa: E402
                     InvalidSample, InvalidTerrain, MalformedSpec, NotAVoxel,
                     SimulationDiverged)
from .morphology import MorphologyGrid, parse_morphology  # noqa: E402
from .nca import PRESETS, NcaConfig, build_controller, genotype_length  # noqa: E402
from .terrain import Terrain, make_terrain  # noqa: E402

__all__ = [
    "__version__", "ConfigError", "GenotypeShapeError", "InvalidBody", "InvalidProtocol",
    "InvalidSample", "InvalidTerrain", "MalformedSpec", "NotAVoxel", "SimulationDiverged",
    "MorphologyGrid", "parse_morphology", "PRESETS", "NcaConfig", "build_controller",
    "genotype_length", "Terrain", "make_terrain",
]
