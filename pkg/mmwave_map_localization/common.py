import logging
from logging.config import dictConfig
from pathlib import Path
from typing import Any, Optional

from multiprocessing_logging import install_mp_handler

SPEED_OF_LIGHT = 299_792_458.0
""" Speed of light in vacuum (m/s) """

EPS_HIT = 1e-9
""" Self-intersection guard used when a ray is relaunched from an interaction point (m) """

EPS_LEN = 1e-6
""" Tolerance on the residual path length of a candidate location (m) """


def logging_config(debug: bool = False, log_file: Optional[Path] = None) -> dict[str, Any]:
    """ Builds the dictConfig dictionary used by the command line tools

    Args:
        debug (bool, optional): log at DEBUG level instead of INFO. Defaults to False.
        log_file (Optional[Path], optional): also log to a rotating file. Defaults to None.

    Returns:
        dict[str, Any]: logging configuration
    """
    handlers: dict[str, Any] = {
        "console": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "default",
        }
    }

    # stdout carries CSV output, so the file handler is opt-in
    if log_file is not None:
        handlers["file"] = {
            "class": "logging.handlers.TimedRotatingFileHandler",
            "filename": str(log_file),
            "formatter": "default",
            "when": "midnight",
            "interval": 1,
            "backupCount": 7
        }

    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "default": {
                "style": "{",
                "format": "[{asctime}] - {levelname} - {filename}:{lineno:d}: {message}",
            }
        },
        "handlers": handlers,
        "root": {
            "level": "DEBUG" if debug else "INFO",
            "handlers": list(handlers)
        }
    }


def setup_logging(debug: bool = False, log_file: Optional[Path] = None) -> None:
    """ Configures root logging and makes it safe for worker processes

    Args:
        debug (bool, optional): log at DEBUG level. Defaults to False.
        log_file (Optional[Path], optional): path of a rotating log file. Defaults to None.
    """
    dictConfig(logging_config(debug, log_file))
    install_mp_handler()

    logging.getLogger(__name__).debug(f'Logging configured (debug={debug}, log_file={log_file})')
