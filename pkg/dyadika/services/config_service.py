"""
Configuration Service for dyadika
Reads config.yml (path from DYADIKA_CONFIG) and applies environment overrides
"""

import copy
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from dyadika.logging_config import get_logger

logger = get_logger('config_service')


DEFAULT_CONFIG: Dict[str, Any] = {
    'resolution': {
        'default': 12,
        'max': 24,
        'calibration': 6,
        'integral_extra_bits': 4,
    },
    'tolerance': {
        'fixture_growth': 0.05,
    },
    'sweep': {
        'random_functions': 100,
        'lower_bound_max_bits': 10,
        'integral_stride': 1,
        'threads': 1,
    },
    'bounds': {
        'p_values': ['1/4', '1/3', '1/2'],
        'atoms_per_p': 4,
        'max_orders': 1024,
    },
    'counterexamples': {
        'plan_dir': 'plans',
        'default_plans': ['t1b.json', 't2b.json', 't3b.json', 't4b.json'],
        'budgets': {'T1b': 8, 'T2b': 10},
    },
    'bench': {
        'resolutions': [4, 6, 8, 10, 12],
        'naive_max_resolution': 12,
        'repeats': 3,
    },
    'fixtures': {
        'path': 'fixtures/constants.yml',
    },
    'logging': {
        'level': 'WARNING',
        'environment': 'production',
        'directory': 'logs',
        'file_logging': False,
    },
}


class ConfigService:
    """Service for handling configuration with environment overrides"""

    _config_cache = None
    _path_override = None

    @classmethod
    def config_path(cls) -> Path:
        if cls._path_override is not None:
            return cls._path_override
        return Path(os.getenv('DYADIKA_CONFIG', 'config.yml'))

    @classmethod
    def use_path(cls, path: Optional[Union[str, Path]]):
        """Read configuration from path (None restores DYADIKA_CONFIG) and drop the cache"""
        cls._path_override = Path(path) if path is not None else None
        cls.reload_config()

    @classmethod
    def load_config(cls) -> Dict[str, Any]:
        """Load configuration from config.yml with caching"""
        if cls._config_cache is not None:
            return cls._config_cache

        config = copy.deepcopy(DEFAULT_CONFIG)
        config_path = cls.config_path()
        if not config_path.exists():
            logger.warning(f"Config file not found: {config_path} - using built-in defaults")
        else:
            try:
                with open(config_path, 'r', encoding='utf-8') as f:
                    loaded = yaml.safe_load(f) or {}
                _merge(config, loaded)
                logger.info(f"Configuration loaded from {config_path}")
            except (OSError, yaml.YAMLError) as e:
                logger.error(f"Error loading {config_path}: {e}")

        _apply_environment(config)
        cls._config_cache = config
        return config

    @classmethod
    def reload_config(cls):
        """Force reload of configuration"""
        cls._config_cache = None
        logger.debug("Configuration cache cleared - will reload on next access")

    @classmethod
    def get_resolution_config(cls) -> Dict[str, Any]:
        return cls.load_config().get('resolution', {})

    @classmethod
    def get_tolerance_config(cls) -> Dict[str, Any]:
        return cls.load_config().get('tolerance', {})

    @classmethod
    def get_sweep_config(cls) -> Dict[str, Any]:
        return cls.load_config().get('sweep', {})

    @classmethod
    def get_bounds_config(cls) -> Dict[str, Any]:
        return cls.load_config().get('bounds', {})

    @classmethod
    def get_counterexample_config(cls) -> Dict[str, Any]:
        return cls.load_config().get('counterexamples', {})

    @classmethod
    def get_bench_config(cls) -> Dict[str, Any]:
        return cls.load_config().get('bench', {})

    @classmethod
    def get_logging_config(cls) -> Dict[str, Any]:
        return cls.load_config().get('logging', {})

    @classmethod
    def get_fixture_path(cls) -> Path:
        return Path(cls.load_config().get('fixtures', {}).get('path', 'fixtures/constants.yml'))

    @classmethod
    def validate_config_structure(cls) -> Dict[str, List[str]]:
        """Validate configuration structure and return issues"""
        config = cls.load_config()
        issues = {
            'errors': [],
            'warnings': [],
            'info': []
        }

        for section in DEFAULT_CONFIG:
            if section not in config:
                issues['errors'].append(f"Missing required section: {section}")

        resolution = config.get('resolution', {})
        cap = resolution.get('max', 24)
        for key in ('default', 'calibration'):
            value = resolution.get(key)
            if not isinstance(value, int) or not 1 <= value <= cap:
                issues['errors'].append(f"resolution.{key} must be an integer in [1, {cap}], got {value!r}")
        if cap > 24:
            issues['errors'].append(f"resolution.max {cap} exceeds the hard cap 24")

        for key, value in config.get('tolerance', {}).items():
            if not isinstance(value, (int, float)) or value <= 0:
                issues['errors'].append(f"tolerance.{key} must be positive, got {value!r}")

        naive_cap = config.get('bench', {}).get('naive_max_resolution', 12)
        if naive_cap > 14:
            issues['warnings'].append(f"bench.naive_max_resolution {naive_cap} makes the naive transform very slow")

        if config.get('sweep', {}).get('threads', 1) > (os.cpu_count() or 1):
            issues['info'].append("sweep.threads exceeds the number of CPUs")

        return issues


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> None:
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value


def _apply_environment(config: Dict[str, Any]) -> None:
    """DYADIKA_* variables win over the YAML file"""
    resolution = os.getenv('DYADIKA_RESOLUTION')
    if resolution:
        try:
            config['resolution']['default'] = int(resolution)
        except ValueError:
            logger.warning(f"Ignoring non-integer DYADIKA_RESOLUTION={resolution!r}")

    mode = os.getenv('DYADIKA_MODE')
    if mode:
        config.setdefault('run', {})['mode'] = mode

    level = os.getenv('DYADIKA_LOG_LEVEL')
    if level:
        config['logging']['level'] = level

    environment = os.getenv('DYADIKA_ENV')
    if environment:
        config['logging']['environment'] = environment
