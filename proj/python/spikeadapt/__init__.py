# Copyright 2026 The spikeadapt Authors
# SPDX-License-Identifier: Apache-2.0
"""Python access to the spikeadapt pipeline: data generation, metrics, checks, runs."""

from ._core import (
    SpikeAdaptError,
    class_weights,
    compute_metrics,
    default_config,
    full_run,
    generate,
    latency_ratio,
    montage,
    normalize_config,
    percent_reduction,
    segments,
    verify,
    welch_t_test,
)

__all__ = [
    "SpikeAdaptError",
    "class_weights",
    "compute_metrics",
    "default_config",
    "full_run",
    "generate",
    "latency_ratio",
    "montage",
    "normalize_config",
    "percent_reduction",
    "segments",
    "verify",
    "welch_t_test",
]
