"""Score distillation laboratory over closed-form Gaussian-mixture oracles."""

from .distill import (
    AdamOptimizer,
    DistillConfig,
    OptimConfig,
    RunLog,
    nearest_mode_distance,
    run_distillation,
)
from .errors import ConfigError, UnknownLabelError
from .generators import (
    IdentityLatent,
    SceneGrads,
    Splat2D,
    SplatGenerator,
    SplatScene,
    View,
    ViewJitterSpec,
    canonical_view,
    render,
    render_backward,
    sample_view,
)
from .objectives import (
    GradientReport,
    decomposition_check,
    ism_gradient,
    multistep_bias,
    naive_gradient,
    sds_gradient,
)
from .oracle import SIGMA_MIN, GuidanceSpec, MixtureOracle
from .schedule import NoiseSchedule, make_schedule
from .trajectory import (
    LatentTrajectory,
    add_noise,
    ddim_denoise,
    ddim_invert,
    denoise_hop,
    invert_hop,
    pseudo_gt_single,
)

__all__ = [
    "AdamOptimizer", "ConfigError", "DistillConfig", "GradientReport",
    "GuidanceSpec", "IdentityLatent", "LatentTrajectory", "MixtureOracle",
    "NoiseSchedule", "OptimConfig", "RunLog", "SIGMA_MIN", "SceneGrads",
    "Splat2D", "SplatGenerator", "SplatScene", "UnknownLabelError", "View",
    "ViewJitterSpec", "add_noise", "canonical_view", "ddim_denoise",
    "ddim_invert", "decomposition_check", "denoise_hop", "invert_hop",
    "ism_gradient", "make_schedule", "multistep_bias", "naive_gradient",
    "nearest_mode_distance", "pseudo_gt_single", "render", "render_backward",
    "run_distillation", "sample_view", "sds_gradient",
]

__version__ = "0.1.0"
