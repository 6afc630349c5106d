import importlib.metadata as metadata
from loguru import logger

logger.disable("bosefield")

__version__ = metadata.metadata("bosefield")["Version"]

from .basis import BasisTable, Grid, build_basis, build_grid, quadrature, synthesize_profile
from .field import EnergyBreakdown, FieldConfiguration, ModelParams, total_energy
from .sampler import MoveParams, SampleStream, minimize_energy, run_chain
from .gpe import GroundState, cutoff_for, imaginary_time_ground_state, thomas_fermi_mu
from .ideal_gas import IdealGasDistribution, classical_pnex, exact_pnex


__all__ = (
    "BasisTable",
    "EnergyBreakdown",
    "FieldConfiguration",
    "Grid",
    "GroundState",
    "IdealGasDistribution",
    "ModelParams",
    "MoveParams",
    "SampleStream",
    "build_basis",
    "build_grid",
    "classical_pnex",
    "cutoff_for",
    "exact_pnex",
    "imaginary_time_ground_state",
    "minimize_energy",
    "quadrature",
    "run_chain",
    "synthesize_profile",
    "thomas_fermi_mu",
    "total_energy",
)
