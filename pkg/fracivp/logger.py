"""
Logging utilities for frac-ivp.

Provides centralized logging to a log file and to standard error. Standard
output stays free for CSV and report data written by the CLI.
"""
import logging
import os
import sys
from datetime import datetime
from pathlib import Path


class FracIVPLogger:
    """Centralized logger for frac-ivp."""

    _instance = None
    _log_file = None
    _logger = None
    _console_handler = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._initialize()
        return cls._instance

    def _initialize(self):
        """Initialize logger with file and console handlers."""
        self._logger = logging.getLogger('FRAC-IVP')
        self._logger.setLevel(logging.DEBUG)
        self._logger.propagate = False

        # Prevent duplicate handlers
        if self._logger.handlers:
            self._logger.handlers.clear()

        log_dir = self.get_log_directory()
        try:
            log_dir.mkdir(parents=True, exist_ok=True)
            timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
            self._log_file = log_dir / f'frac_ivp_log_{timestamp}.txt'
            file_handler = logging.FileHandler(self._log_file, encoding='utf-8')
        except OSError:
            # Read-only home or sandbox: console only
            self._log_file = None
            file_handler = None

        if file_handler is not None:
            file_handler.setLevel(logging.DEBUG)
            file_formatter = logging.Formatter(
                '%(asctime)s [%(levelname)s] %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            )
            file_handler.setFormatter(file_formatter)
            self._logger.addHandler(file_handler)

        self._console_handler = logging.StreamHandler(sys.stderr)
        self._console_handler.setLevel(logging.INFO)
        self._console_handler.setFormatter(logging.Formatter('[%(levelname)s] %(message)s'))
        self._logger.addHandler(self._console_handler)

        self._logger.debug(f"frac-ivp logging initialized: {self._log_file}")

    def get_logger(self):
        """Get the logger instance."""
        return self._logger

    def get_log_file(self):
        """Get the current log file path, or None when running console-only."""
        return self._log_file

    def set_console_level(self, level):
        """Set the level of the standard-error handler."""
        self._console_handler.setLevel(level)

    @classmethod
    def get_log_directory(cls):
        """Get the logs directory path (FRAC_IVP_LOG_DIR overrides the default)."""
        override = os.environ.get('FRAC_IVP_LOG_DIR')
        if override:
            return Path(override)
        return Path.home() / '.frac-ivp' / 'logs'


# Global logger instance
_frac_logger = FracIVPLogger()


def get_logger():
    """Get the frac-ivp logger instance."""
    return _frac_logger.get_logger()


def get_log_file():
    """Get the current log file path."""
    return _frac_logger.get_log_file()


def set_console_level(level):
    """Set the console (standard error) log level."""
    _frac_logger.set_console_level(level)
