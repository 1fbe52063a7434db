"""Gaussian-process likelihood, fitting, kriging and simulation on a
triangular grid of workers."""

import os

from ._biggp import (
    Cluster,
    Error,
    KrigeProblem,
    builtin_kernels,
    default_replication,
    kernel_parameter_names,
    matern_correlation,
)

__all__ = [
    "Cluster",
    "Error",
    "KrigeProblem",
    "builtin_kernels",
    "default_replication",
    "kernel_parameter_names",
    "matern_correlation",
    "worker_executable",
]


def worker_executable():
    """Path of the worker binary used by the socket backend, or ''."""
    env = os.environ.get("BIGGP_WORKER_EXE")
    if env:
        return env
    bundled = os.path.join(os.path.dirname(__file__), "bin", "biggp")
    return bundled if os.path.exists(bundled) else ""
