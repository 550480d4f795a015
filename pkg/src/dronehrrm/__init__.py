"""Joint handover and radio-resource management for cellular-connected drones."""
from .config import ScenarioConfig, load_config
from .environment import UavUplinkEnv

__version__ = "0.1.0"
__all__ = ["ScenarioConfig", "load_config", "UavUplinkEnv", "__version__"]
