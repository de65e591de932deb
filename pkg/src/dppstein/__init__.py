"""Explicit L1 normal-approximation bounds for functionals of determinantal
point processes, with a Laguerre-Gaussian simulator and a Monte-Carlo
verification harness."""

__version__ = "0.1.0"

from .kernels import (  # noqa: E402
    DecayEnvelope,
    LaguerreGaussianSpec,
    fit_decay_envelope,
    kernel_value,
    laguerre,
    max_intensity_alpha,
    spectral_density,
)
from .sampler import PointPattern, SeedSpec, Window, sample_dpp  # noqa: E402
from .statistics import LocalStatistic, eval_functional  # noqa: E402
from .stein_bounds import BoundInputs, BoundReport, wasserstein_bound  # noqa: E402
from .verify import ExperimentConfig, VerificationReport, run_experiment  # noqa: E402

__all__ = [
    "DecayEnvelope",
    "LaguerreGaussianSpec",
    "fit_decay_envelope",
    "kernel_value",
    "laguerre",
    "max_intensity_alpha",
    "spectral_density",
    "PointPattern",
    "SeedSpec",
    "Window",
    "sample_dpp",
    "LocalStatistic",
    "eval_functional",
    "BoundInputs",
    "BoundReport",
    "wasserstein_bound",
    "ExperimentConfig",
    "VerificationReport",
    "run_experiment",
]
