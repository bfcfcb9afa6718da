"""Wideband full-duplex analog beamforming codebook design."""

from .array import ArrayGeometry, CoverageGrid, Direction, SubcarrierGrid, steering_matrix, steering_vector
from .channel import ChannelTensor, load_channel, save_channel, synth_los_user, synth_nearfield_si
from .design import Codebook, DesignScenario, Label, design, design_cbf, design_narrowband, design_proposed
from .metrics import LinkBudget
from .quantize import QuantizationSpec
from .solver import InfeasibleBudgetError, SolverConfig, solve_subproblem

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "ChannelTensor",
    "Codebook",
    "CoverageGrid",
    "DesignScenario",
    "Direction",
    "InfeasibleBudgetError",
    "Label",
    "LinkBudget",
    "QuantizationSpec",
    "SolverConfig",
    "SubcarrierGrid",
    "design",
    "design_cbf",
    "design_narrowband",
    "design_proposed",
    "load_channel",
    "save_channel",
    "solve_subproblem",
    "steering_matrix",
    "steering_vector",
    "synth_los_user",
    "synth_nearfield_si",
]
