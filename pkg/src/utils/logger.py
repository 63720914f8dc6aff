"""
Logger utility for RiskTrack
"""
import logging
import logging.handlers
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

ROOT_LOGGER = "risktrack"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logger(name: str = ROOT_LOGGER, log_level: Optional[str] = None,
                 log_file: Optional[str] = None) -> logging.Logger:
    """
    Set up a logger under the risktrack namespace.

    Console output goes through a single handler on the package root logger;
    a rotating file handler is attached when a log file is given.

    Args:
        name: Logger name (prefixed with "risktrack." unless already)
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL);
            RISKTRACK_LOG_LEVEL wins over the default when not given
        log_file: Path to log file, or None for console only

    Returns:
        Logger instance
    """
    if name != ROOT_LOGGER and not name.startswith(ROOT_LOGGER + "."):
        name = f"{ROOT_LOGGER}.{name}"

    root = logging.getLogger(ROOT_LOGGER)
    formatter = logging.Formatter(LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")

    if not any(getattr(h, "_risktrack_console", False) for h in root.handlers):
        level = log_level or os.getenv("RISKTRACK_LOG_LEVEL", "WARNING")
        root.setLevel(getattr(logging, level.upper()))

        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        console_handler._risktrack_console = True
        root.addHandler(console_handler)
        root.propagate = False
    elif log_level:
        root.setLevel(getattr(logging, log_level.upper()))

    if log_file:
        log_path = Path(log_file).resolve()
        attached = {getattr(h, "baseFilename", None) for h in root.handlers}
        if str(log_path) not in attached:
            file_handler = logging.handlers.RotatingFileHandler(
                log_path,
                maxBytes=10485760,  # 10MB
                backupCount=5
            )
            file_handler.setFormatter(formatter)
            root.addHandler(file_handler)

    return logging.getLogger(name)
