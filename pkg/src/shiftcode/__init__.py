"""Gaussian shift channel toolkit: channel model, capacity, runlength codes, FER simulation."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .codes import CodeId, all_codes, decode, encode, get_code, verify_roundtrip
from .gauss_channel import (
    ChannelParams,
    Rounding,
    RunSequence,
    Thresholded,
    q_function,
    transition_distribution,
)

__all__ = [
    "__version__",
    "KERNEL_BACKEND",
    "CodeId",
    "all_codes",
    "decode",
    "encode",
    "get_code",
    "verify_roundtrip",
    "ChannelParams",
    "Rounding",
    "RunSequence",
    "Thresholded",
    "q_function",
    "transition_distribution",
]
