import logging
import sys

from pythonjsonlogger.json import JsonFormatter

from Utilities.settings import LOG_LEVEL

_configured = False


def configure(level: str | None = None) -> None:
    """Install the JSON handler on the package root logger once."""
    global _configured
    root = logging.getLogger('modescatter')
    root.setLevel((level or LOG_LEVEL).upper())
    if _configured:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonFormatter('%(asctime)s %(levelname)s %(name)s %(message)s'))
    root.addHandler(handler)
    root.propagate = False
    _configured = True


def get_logger(name: str) -> logging.Logger:
    """Get a child of the package logger, e.g. get_logger('forward')."""
    return logging.getLogger(f'modescatter.{name}')
