"""Exceptional points of single-qubit quantum channels.

Channels are 4x4 superoperators on column-stacked density matrices; their
spectra are studied through the 3x3 distortion block of the affine Bloch map.
"""
__version__ = "0.1.0"

from chanep.channels import (  # noqa: E402
    AffineBloch,
    check_cptp,
    choi_of,
    distortion_of,
    interpolate,
    kraus_to_superop,
    mix,
    superop_to_affine,
)
from chanep.errors import ChannelError, ConvergenceError, EigenSolverError, PreconditionError  # noqa: E402
from chanep.spectral import EPRecord, Kind, Phase, characterize, ep_locate_1d, spectrum  # noqa: E402

__all__ = [
    "__version__",
    "AffineBloch",
    "ChannelError",
    "ConvergenceError",
    "EigenSolverError",
    "EPRecord",
    "Kind",
    "Phase",
    "PreconditionError",
    "characterize",
    "check_cptp",
    "choi_of",
    "distortion_of",
    "ep_locate_1d",
    "interpolate",
    "kraus_to_superop",
    "mix",
    "spectrum",
    "superop_to_affine",
]
