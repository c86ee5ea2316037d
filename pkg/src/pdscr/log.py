"""
Shared logger for the package, configured the same way for the library and the CLI
"""

import os
import logging
from typing import Optional

from logzero import setup_logger, formatter  # type: ignore[import]
from appdirs import user_log_dir  # type: ignore[import]

DEFAULT_LOGLEVEL = logging.WARNING
LOG_FORMAT = "{start}[%(levelname)-7s %(asctime)s %(name)s %(filename)s:%(lineno)d]{end} %(message)s"


def default_logpath() -> str:
    """Returns the path to the pdscr logfile"""
    f = os.path.join(user_log_dir("pdscr"), "pdscr.log")
    os.makedirs(os.path.dirname(f), exist_ok=True)
    return f


def configure(
    loglevel: int = DEFAULT_LOGLEVEL, logfile: Optional[str] = None
) -> logging.Logger:
    """
    (Re)configures the 'pdscr' logger; calling this again replaces the level
    and log file of the existing handlers
    """
    return setup_logger(  # type: ignore[no-any-return]
        name="pdscr",
        level=loglevel,
        logfile=logfile,
        maxBytes=1e7,
        formatter=formatter(LOG_FORMAT),
    )


logger: logging.Logger = configure()
