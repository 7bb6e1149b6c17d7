import sys

from loguru import logger

from gradmesh.core.config import settings

LOG_FORMAT = "<green>{time:HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan> - {message}"


def configure_logging(level: str | None = None) -> None:
    """Replace loguru's default sink with a single stderr sink at the configured level."""
    logger.remove()
    logger.add(sys.stderr, level=(level or settings.LOG).upper(), format=LOG_FORMAT)
