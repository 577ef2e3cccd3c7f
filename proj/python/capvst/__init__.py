"""Reversible photorealistic style transfer engine.

Images are float32 arrays shaped (C, H, W) with values in [0, 1].
"""

import json

from ._capvst import (
    ConfigError,
    Engine,
    Error,
    IoError,
    NumericError,
    ShapeError,
    bench_json,
    cholesky,
    cholesky_backward,
    covariance,
    cycle_loss,
    latent_style_distance,
    masked_transfer,
    matting_laplacian,
    matting_loss,
    read_image,
    selftest_json,
    ssim,
    temporal_error,
    transfer,
    wct_svd,
    write_image,
)


def selftest(seed=0):
    """Runs the built-in invariant checks and returns the report as a dict."""
    return json.loads(selftest_json(seed))


def bench(side=512, reps=20, seed=0):
    """Median cWCT and eigendecomposition-WCT timings as a dict."""
    return json.loads(bench_json(side, reps, seed))


__all__ = [
    "ConfigError",
    "Engine",
    "Error",
    "IoError",
    "NumericError",
    "ShapeError",
    "bench",
    "cholesky",
    "cholesky_backward",
    "covariance",
    "cycle_loss",
    "latent_style_distance",
    "masked_transfer",
    "matting_laplacian",
    "matting_loss",
    "read_image",
    "selftest",
    "ssim",
    "temporal_error",
    "transfer",
    "wct_svd",
    "write_image",
]
