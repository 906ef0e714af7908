"""
Centralized Logging Configuration for dyadika
Console logging on stderr plus optional rotating log files per concern
"""

import logging
import logging.handlers
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional


class DyadikaLogFormatter(logging.Formatter):
    """Custom formatter with color support and structured format"""

    COLORS = {
        'DEBUG': '\033[36m',      # Cyan
        'INFO': '\033[32m',       # Green
        'WARNING': '\033[33m',    # Yellow
        'ERROR': '\033[31m',      # Red
        'CRITICAL': '\033[35m',   # Magenta
    }
    RESET = '\033[0m'

    def __init__(self, color: bool = False):
        super().__init__()
        self.color = color

    def format(self, record):
        if self.color:
            color = self.COLORS.get(record.levelname, '')
            reset = self.RESET
        else:
            color = reset = ''

        # Structure: [TIMESTAMP] [LEVEL] [LOGGER] MESSAGE
        formatted = f"{color}[{self.formatTime(record, '%Y-%m-%d %H:%M:%S')}] " \
                    f"[{record.levelname:8}] [{record.name:24}] {record.getMessage()}{reset}"

        if record.exc_info:
            formatted += f"\n{self.formatException(record.exc_info)}"

        return formatted


def _rotating_handler(path: Path, max_bytes: int, backups: int) -> logging.Handler:
    handler = logging.handlers.RotatingFileHandler(
        path,
        maxBytes=max_bytes,
        backupCount=backups,
        encoding='utf-8'
    )
    handler.setFormatter(DyadikaLogFormatter(color=False))
    return handler


def setup_logging(app_name: str = "dyadika", log_level: str = "INFO",
                  environment: str = "development", log_dir: Optional[str] = "logs",
                  file_logging: bool = False):
    """
    Setup logging for a dyadika run

    Args:
        app_name: Prefix for log file names
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        environment: Environment (development, production, testing)
        log_dir: Directory for rotating log files
        file_logging: Also write rotating files under log_dir

    Reports are written to stdout by the CLI, so nothing here touches stdout.
    """
    logger = logging.getLogger("dyadika")
    logger.setLevel(getattr(logging, log_level.upper(), logging.INFO))
    logger.propagate = False

    # Remove existing handlers to avoid duplicates on repeated runs
    for handler in list(logger.handlers):
        handler.close()
    logger.handlers.clear()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(DyadikaLogFormatter(color=environment == "development"))
    console_handler.setLevel(getattr(logging, log_level.upper(), logging.INFO))
    logger.addHandler(console_handler)

    if file_logging and log_dir:
        directory = Path(log_dir)
        directory.mkdir(parents=True, exist_ok=True)

        main_handler = _rotating_handler(directory / f"{app_name}.log", 10 * 1024 * 1024, 5)
        main_handler.setLevel(logging.DEBUG)
        logger.addHandler(main_handler)

        error_handler = _rotating_handler(directory / f"{app_name}-errors.log", 5 * 1024 * 1024, 3)
        error_handler.setLevel(logging.ERROR)
        logger.addHandler(error_handler)

        # Failed identities and inequalities, kept apart for later inspection
        violation_handler = _rotating_handler(directory / f"{app_name}-violations.log", 5 * 1024 * 1024, 10)
        violation_handler.addFilter(lambda record: hasattr(record, 'violation'))
        logger.addHandler(violation_handler)

        perf_handler = _rotating_handler(directory / f"{app_name}-performance.log", 5 * 1024 * 1024, 3)
        perf_handler.addFilter(lambda record: hasattr(record, 'performance'))
        logger.addHandler(perf_handler)

    startup_logger = get_logger('startup')
    startup_logger.debug("=== dyadika logging started ===")
    startup_logger.debug(f"Environment: {environment}")
    startup_logger.debug(f"Log Level: {log_level}")
    if file_logging and log_dir:
        startup_logger.debug(f"Log Directory: {Path(log_dir).absolute()}")
    startup_logger.debug(f"Timestamp: {datetime.now().isoformat()}")

    return logger


def get_logger(name):
    """Get a logger with standardized naming convention"""
    return logging.getLogger(f"dyadika.{name}")


# Seconds; operations faster than this are not reported
PERFORMANCE_THRESHOLD = 1.0


def log_performance(operation, duration, details=None):
    """Log timing for slow operations"""
    if duration > PERFORMANCE_THRESHOLD:
        logger = get_logger('performance')

        message = f"Slow operation: {operation} took {duration:.2f}s"
        if details:
            message += f" - {details}"

        record = logger.makeRecord(
            logger.name, logging.WARNING, "", 0, message, (), None
        )
        record.performance = True
        logger.handle(record)


def log_violation(check, details=None):
    """Log a failed identity or inequality check"""
    logger = get_logger('violations')

    message = f"Violation [{check}]"
    if details:
        message += f": {details}"

    record = logger.makeRecord(
        logger.name, logging.WARNING, "", 0, message, (), None
    )
    record.violation = True
    logger.handle(record)
