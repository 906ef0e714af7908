"""
Tests for configuration loading, environment overrides and validation
"""

import os
from unittest.mock import patch

import pytest
import yaml

from dyadika import create_toolkit
from dyadika.services.config_service import DEFAULT_CONFIG, ConfigService


class TestConfigService:
    """YAML file plus DYADIKA_* overrides"""

    def teardown_method(self):
        ConfigService.use_path(None)

    def write_config(self, tmp_path, data):
        path = tmp_path / 'config.yml'
        path.write_text(yaml.safe_dump(data))
        return path

    def test_missing_file_uses_defaults(self, tmp_path):
        ConfigService.use_path(tmp_path / 'absent.yml')
        config = ConfigService.load_config()
        assert config['resolution'] == DEFAULT_CONFIG['resolution']
        assert config['bounds']['p_values'] == ['1/4', '1/3', '1/2']

    def test_file_values_merge_into_defaults(self, tmp_path):
        ConfigService.use_path(self.write_config(tmp_path, {'resolution': {'default': 8}}))
        config = ConfigService.load_config()
        assert config['resolution']['default'] == 8
        assert config['resolution']['calibration'] == 6
        assert ConfigService.get_sweep_config()['random_functions'] == 100

    def test_cache_until_reload(self, tmp_path):
        path = self.write_config(tmp_path, {'resolution': {'default': 8}})
        ConfigService.use_path(path)
        assert ConfigService.load_config()['resolution']['default'] == 8
        path.write_text(yaml.safe_dump({'resolution': {'default': 9}}))
        assert ConfigService.load_config()['resolution']['default'] == 8
        ConfigService.reload_config()
        assert ConfigService.load_config()['resolution']['default'] == 9

    @patch.dict(os.environ, {'DYADIKA_RESOLUTION': '10', 'DYADIKA_MODE': 'float', 'DYADIKA_LOG_LEVEL': 'DEBUG'})
    def test_environment_overrides(self, tmp_path):
        ConfigService.use_path(self.write_config(tmp_path, {'resolution': {'default': 8}}))
        config = ConfigService.load_config()
        assert config['resolution']['default'] == 10
        assert config['run']['mode'] == 'float'
        assert ConfigService.get_logging_config()['level'] == 'DEBUG'

    @patch.dict(os.environ, {'DYADIKA_RESOLUTION': 'many'})
    def test_bad_environment_value_is_ignored(self, tmp_path):
        ConfigService.use_path(tmp_path / 'absent.yml')
        assert ConfigService.load_config()['resolution']['default'] == 12

    def test_config_path_from_environment(self, tmp_path):
        path = self.write_config(tmp_path, {})
        with patch.dict(os.environ, {'DYADIKA_CONFIG': str(path)}):
            ConfigService.use_path(None)
            assert ConfigService.config_path() == path

    def test_validation_flags_bad_resolution(self, tmp_path):
        ConfigService.use_path(self.write_config(tmp_path, {'resolution': {'default': 0},
                                                            'tolerance': {'fixture_growth': -1}}))
        errors = ConfigService.validate_config_structure()['errors']
        assert any('resolution.default' in e for e in errors)
        assert any('tolerance.fixture_growth' in e for e in errors)

    def test_valid_defaults(self, tmp_path):
        ConfigService.use_path(tmp_path / 'absent.yml')
        assert ConfigService.validate_config_structure()['errors'] == []

    def test_toolkit_rejects_invalid_config(self, tmp_path):
        path = self.write_config(tmp_path, {'resolution': {'calibration': 40}})
        with pytest.raises(ValueError):
            create_toolkit(config_path=str(path))

    def test_toolkit_returns_settings(self, tmp_path):
        path = self.write_config(tmp_path, {'fixtures': {'path': str(tmp_path / 'constants.yml')}})
        settings = create_toolkit(config_path=str(path), log_level='ERROR')
        assert settings['fixtures']['path'] == str(tmp_path / 'constants.yml')
