"""Random-cluster interfaces on finite slabs: exact oracles, samplers, interfaces, walls and pillars."""

from .lattice import LatticeGeometry
from .model import EdgeConfig, Params, SpinConfig

__all__ = ["LatticeGeometry", "EdgeConfig", "Params", "SpinConfig"]
__version__ = "0.1.0"
