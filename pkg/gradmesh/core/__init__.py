from .config import settings
from .exceptions import ConfigurationError, ContractError, GradmeshError, KeyNotFound, ProtocolError

__all__ = ["settings", "GradmeshError", "ConfigurationError", "ContractError", "KeyNotFound", "ProtocolError"]
