import logging
import os
from typing import Union

from dotenv import load_dotenv
from pythonjsonlogger import jsonlogger

load_dotenv()

LOG_FORMAT = "[%(asctime)s] %(levelname)s {%(filename)s:%(lineno)d} - %(message)s"

logger = logging.getLogger("vmtunet")
logger.propagate = False

if not logger.handlers:
    _console = logging.StreamHandler()
    _console.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(_console)


def set_log_level(level: Union[str, int]) -> None:
    """Set the vmtunet logger level from a name ('debug', 'info', ...) or a logging constant."""
    if isinstance(level, int):
        logger.setLevel(level)
        return
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise ValueError(f"unknown log level '{level}'")
    logger.setLevel(numeric)


def add_json_file_handler(path: str) -> logging.Handler:
    """
    Attach a JSON-lines file handler, one record per line.

    Numeric fields passed through ``extra=`` (step, energy, loss, ...) are
    written as top-level JSON keys. Returns the handler so callers can
    detach it once a run finishes.
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(
        jsonlogger.JsonFormatter("%(asctime)s %(levelname)s %(name)s %(message)s")
    )
    logger.addHandler(handler)
    return handler


def remove_handler(handler: logging.Handler) -> None:
    logger.removeHandler(handler)
    handler.close()


set_log_level(os.environ.get("VMTUNET_LOG_LEVEL", "info"))
