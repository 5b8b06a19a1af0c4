"""Search for Lyapunov functions of autonomous systems with small smooth networks."""

from .config import RunConfig
from .loss import LossConfig
from .net import LyapunovNetwork, init_network
from .sampler import SamplingDomain
from .systems import BUILTINS, DynamicalSystem, check_equilibrium
from .trainer import TrainConfig, train
from .verifier import verify

__version__ = "0.1.0"
__all__ = [
    "BUILTINS",
    "DynamicalSystem",
    "LossConfig",
    "LyapunovNetwork",
    "RunConfig",
    "SamplingDomain",
    "TrainConfig",
    "check_equilibrium",
    "init_network",
    "train",
    "verify",
]
