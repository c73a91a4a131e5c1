"""Gaussian splatting with semantic pruning, adaptive dropout and occlusion culling."""

from ._core import (
    Camera,
    ConfigError,
    DimensionError,
    Error,
    NumericalError,
    ParseError,
    Scene,
    compare,
    compensation_factor,
    dropout_probability,
    hybrid_score,
    load_views,
    perturbed_init,
    psnr,
    render,
    score,
    ssim,
    synth_scene,
    train,
)

__all__ = [
    "Camera",
    "ConfigError",
    "DimensionError",
    "Error",
    "NumericalError",
    "ParseError",
    "Scene",
    "compare",
    "compensation_factor",
    "dropout_probability",
    "hybrid_score",
    "load_views",
    "perturbed_init",
    "psnr",
    "render",
    "score",
    "ssim",
    "synth_scene",
    "train",
]
