"""Joint sensing/communication resource allocation for multi-target tracking."""

from .config import ScenarioConfig, load_config, validate_config

__version__ = "0.1.0"

__all__ = ["ScenarioConfig", "load_config", "validate_config", "__version__"]
