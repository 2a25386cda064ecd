"""Koopman latent linear vehicle models with condensed-QP MPC.

Pipeline: simulate a nonlinear planar vehicle -> learn a lifted linear
latent model (eigenvalue-parameterized transition) -> evaluate open-loop
prediction -> track references with incremental MPC, against a pure-pursuit
baseline.
"""

__version__ = "0.1.0"

from ._kernels import PLANT_BACKEND, QP_BACKEND
from .errors import (DataError, KoopcarError, LiftModeError, NumericError,
                     QpInputError, TrainingDiverged)

__all__ = [
    "PLANT_BACKEND", "QP_BACKEND",
    "KoopcarError", "DataError", "NumericError", "QpInputError",
    "TrainingDiverged", "LiftModeError",
]
