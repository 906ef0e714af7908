"""dyadika: Walsh-Fourier kernels, dyadic Hardy spaces and sharpness experiments"""

from typing import Any, Dict, Optional

from dotenv import load_dotenv

__version__ = "1.0.0"


def create_toolkit(config_path: Optional[str] = None, log_level: Optional[str] = None) -> Dict[str, Any]:
    """Load .env and configuration, then set up logging; returns the merged settings"""
    load_dotenv()

    from dyadika.logging_config import get_logger, setup_logging
    from dyadika.services.config_service import ConfigService

    if config_path is not None:
        ConfigService.use_path(config_path)
    settings = ConfigService.load_config()

    logging_settings = settings.get('logging', {})
    setup_logging(
        log_level=log_level or logging_settings.get('level', 'WARNING'),
        environment=logging_settings.get('environment', 'production'),
        log_dir=logging_settings.get('directory', 'logs'),
        file_logging=logging_settings.get('file_logging', False),
    )

    issues = ConfigService.validate_config_structure()
    if issues['errors']:
        raise ValueError("; ".join(issues['errors']))
    for warning in issues['warnings']:
        get_logger('startup').warning(warning)
    return settings
