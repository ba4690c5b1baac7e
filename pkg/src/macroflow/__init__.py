"""macroflow: flow-matching generative macro placement with hard-constraint sampling."""

from .core import (
    Canvas,
    ConfigError,
    Macro,
    Netlist,
    PlacementInstance,
    boundary_distances,
    check_positions,
    hpwl,
    in_canvas,
    is_legal,
    overlap_ratio,
    total_overlap,
)
from .estimator import FlowMatchingPlacer, check_instances, check_placements
from .grid import OccupancyGrid, position_mask
from .network import ModelConfig, VelocityModel, time_embed
from .sampling import (
    ProjectionError,
    SamplerConfig,
    SourcePrior,
    constrained_sample,
    constrained_step,
    corrected_velocity,
    euler_sample,
    extrapolate,
    project,
    sample,
    sample_prior,
)
from .synthgen import (
    GenConfig,
    GenerationError,
    boundary_score,
    build_netlist,
    generate_dataset,
    generate_layout,
    generate_sample,
    random_layout,
    sample_position,
)
from .training import TrainConfig, cfm_loss, make_training_pair, train

__version__ = "0.1.0"

__all__ = [
    "Canvas",
    "ConfigError",
    "FlowMatchingPlacer",
    "GenConfig",
    "GenerationError",
    "Macro",
    "ModelConfig",
    "Netlist",
    "OccupancyGrid",
    "PlacementInstance",
    "ProjectionError",
    "SamplerConfig",
    "SourcePrior",
    "TrainConfig",
    "VelocityModel",
    "boundary_distances",
    "boundary_score",
    "build_netlist",
    "cfm_loss",
    "check_instances",
    "check_placements",
    "check_positions",
    "constrained_sample",
    "constrained_step",
    "corrected_velocity",
    "euler_sample",
    "extrapolate",
    "generate_dataset",
    "generate_layout",
    "generate_sample",
    "hpwl",
    "in_canvas",
    "is_legal",
    "make_training_pair",
    "overlap_ratio",
    "position_mask",
    "project",
    "random_layout",
    "sample",
    "sample_position",
    "sample_prior",
    "time_embed",
    "total_overlap",
    "train",
]
