"""Channel-tampering attacks on fiber CV-QKD: simulation, detection and mitigation."""

from ._kernels import backend
from .errors import (
    BlockedChannelError,
    CvqkdError,
    DegenerateInputError,
    EstimationFailureError,
    InvalidInputError,
    NumericalDomainError,
)
from .params import AttackConfig, AttackKind, FiniteSizeConfig, LinkConfig

__all__ = [
    "AttackConfig",
    "AttackKind",
    "BlockedChannelError",
    "CvqkdError",
    "DegenerateInputError",
    "EstimationFailureError",
    "FiniteSizeConfig",
    "InvalidInputError",
    "LinkConfig",
    "NumericalDomainError",
    "backend",
]

__version__ = "0.1.0"
