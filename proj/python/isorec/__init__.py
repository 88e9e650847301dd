"""Diffusion-based isotropic reconstruction of anisotropic volumes.

Arrays are float64 numpy arrays in the canonical [-1, 1] range.
Volumes are indexed (z, y, x), axial slices (z, x) or (z, y).
"""

from ._isorec import (
    FormatError,
    IncompatibleCheckpoint,
    Model,
    NoiseSchedule,
    SamplingFailure,
    TrainingFailure,
    __version__,
    downsample_axial,
    gaussian_model,
    linear_schedule,
    load_model,
    pad_axial,
    psnr,
    q_sample,
    read_volume,
    reconstruct_slice,
    reconstruct_volume,
    replicate_rows,
    ssim,
    synthesize,
    unpad_axial,
    write_volume,
)

__all__ = [
    "FormatError",
    "IncompatibleCheckpoint",
    "Model",
    "NoiseSchedule",
    "SamplingFailure",
    "TrainingFailure",
    "__version__",
    "downsample_axial",
    "gaussian_model",
    "linear_schedule",
    "load_model",
    "pad_axial",
    "psnr",
    "q_sample",
    "read_volume",
    "reconstruct_slice",
    "reconstruct_volume",
    "replicate_rows",
    "ssim",
    "synthesize",
    "unpad_axial",
    "write_volume",
]
