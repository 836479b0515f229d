"""Python bindings for the ship super-resolution toolkit."""

import json

import torch  # noqa: F401  loads libtorch before the extension

from ._shipsr import (
    ArgumentError,
    ConfigurationError,
    DataError,
    DependencyError,
    DimensionError,
    Error,
    IndexError,
    NumericError,
    alpha_bars,
    bicubic_upsample,
    center_crop,
    degrade,
    fit_gaussian,
    frechet_distance,
    psnr,
    read_png,
    render_prompt,
    run_cli,
    ssim,
    write_png,
)
from ._shipsr import default_config as _default_config
from ._shipsr import fingerprint as _fingerprint


def default_config():
    """Default run configuration as a dict."""
    return json.loads(_default_config())


def fingerprint(config):
    """Config fingerprint; accepts a dict or a JSON string."""
    if not isinstance(config, str):
        config = json.dumps(config)
    return _fingerprint(config)


__all__ = [
    "ArgumentError",
    "ConfigurationError",
    "DataError",
    "DependencyError",
    "DimensionError",
    "Error",
    "IndexError",
    "NumericError",
    "alpha_bars",
    "bicubic_upsample",
    "center_crop",
    "default_config",
    "degrade",
    "fingerprint",
    "fit_gaussian",
    "frechet_distance",
    "psnr",
    "read_png",
    "render_prompt",
    "run_cli",
    "ssim",
    "write_png",
]
