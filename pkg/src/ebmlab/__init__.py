"""Energy-based density models trained by contrastive divergence.

Model families: product of Student-t experts over linear filter outputs
(single-layer, hierarchical, topographic, stereo), binary Boltzmann
machines with lateral hidden connections, and sigmoid-net reference
models. Training couples the CD objective with HMC or auxiliary-variable
Gibbs negative phases. Includes the image patch pipeline (whitening,
stereo pairs), receptive-field analysis (Gabor fits, map continuity,
disparity and ocularity measures), and MAP denoising by iterative Wiener
filtering under a trained prior.
"""

from .analysis import (
    amari_distance,
    amari_index,
    disparity_measures,
    dip_test,
    map_report,
    ocularity,
    psnr,
    tuning_curve,
)
from .boltzmann import (
    BoltzmannMachine,
    StereoInputConfig,
    dog_lateral_weights,
    gen_stereo_patterns,
    init_retinotopic_weights,
)
from .denoise import (
    DenoiseJob,
    cubic_shortcut,
    iwf_image,
    iwf_patch,
    make_denoise_job,
    wiener_baseline,
)
from .gabor import GaborFit, fit_gabor, gabor_kernel
from .models import BssIcaEnergy, EnergyModel, QuadraticEnergy, SigmoidNetEnergy
from .pipeline import (
    PatchBatch,
    WhiteningTransform,
    apply_whitener,
    extract_patches,
    fit_whitener,
    invert_whitener,
    make_stereo_pairs,
    preprocess,
    synthesize_images,
)
from .pot import PotModel, build_topographic_pooling, square_log_partition
from .samplers import (
    ChainState,
    HmcConfig,
    adapt_step_size,
    annealed_sample,
    hmc_step,
    leapfrog,
    run_cd_negative_phase,
)
from .training import TrainHistory, TrainSchedule, apply_update, enforce_filter_norm, train

__version__ = "0.1.0"

__all__ = [
    "BoltzmannMachine",
    "BssIcaEnergy",
    "ChainState",
    "DenoiseJob",
    "EnergyModel",
    "GaborFit",
    "HmcConfig",
    "PatchBatch",
    "PotModel",
    "QuadraticEnergy",
    "SigmoidNetEnergy",
    "StereoInputConfig",
    "TrainHistory",
    "TrainSchedule",
    "WhiteningTransform",
    "adapt_step_size",
    "amari_distance",
    "amari_index",
    "annealed_sample",
    "apply_update",
    "apply_whitener",
    "build_topographic_pooling",
    "cubic_shortcut",
    "disparity_measures",
    "dip_test",
    "dog_lateral_weights",
    "enforce_filter_norm",
    "extract_patches",
    "fit_gabor",
    "fit_whitener",
    "gabor_kernel",
    "gen_stereo_patterns",
    "hmc_step",
    "init_retinotopic_weights",
    "invert_whitener",
    "iwf_image",
    "iwf_patch",
    "leapfrog",
    "make_denoise_job",
    "make_stereo_pairs",
    "map_report",
    "ocularity",
    "preprocess",
    "psnr",
    "run_cd_negative_phase",
    "square_log_partition",
    "synthesize_images",
    "train",
    "tuning_curve",
]
