"""Parallel external memory simulator: shuffle algorithms, bounds and sweeps."""

from ._core import (
    PemError,
    Params,
    algorithm_names,
    calibrate,
    generate,
    lower_bound,
    oracle_shuffle,
    run_point,
    run_sweep,
    upper_bound,
)

__all__ = [
    "PemError",
    "Params",
    "algorithm_names",
    "calibrate",
    "generate",
    "lower_bound",
    "oracle_shuffle",
    "run_point",
    "run_sweep",
    "upper_bound",
]
