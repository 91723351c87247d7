"""Influence-matrix toolkit for brick-wall Floquet XXZ circuits."""

from .errors import (
    CapacityError,
    ConvergenceError,
    DegenerateError,
    DimensionError,
    FloquetIMError,
    LogBranchError,
    NotEigenvalueError,
    PoleError,
    PrecisionError,
    RangeError,
)
from .params import ModelParams
from .states import InfluenceMatrix, StateVector, load_im_json, save_im_json

__all__ = [
    "CapacityError",
    "ConvergenceError",
    "DegenerateError",
    "DimensionError",
    "FloquetIMError",
    "InfluenceMatrix",
    "LogBranchError",
    "ModelParams",
    "NotEigenvalueError",
    "PoleError",
    "PrecisionError",
    "RangeError",
    "StateVector",
    "load_im_json",
    "save_im_json",
]

__version__ = "0.1.0"
