"""
Tests for logging setup and the violation/performance channels
"""

import logging
from unittest.mock import patch

from dyadika.logging_config import get_logger, log_performance, log_violation, setup_logging


class TestLogging:
    """Handlers and dedicated log files"""

    def teardown_method(self):
        setup_logging(log_level='WARNING', environment='testing', file_logging=False)

    def test_logger_names(self):
        assert get_logger('transforms').name == 'dyadika.transforms'

    def test_console_only_by_default(self):
        logger = setup_logging(log_level='INFO', environment='testing')
        assert len(logger.handlers) == 1
        assert logger.level == logging.INFO

    def test_repeated_setup_does_not_stack_handlers(self):
        setup_logging(log_level='INFO', environment='testing')
        logger = setup_logging(log_level='INFO', environment='testing')
        assert len(logger.handlers) == 1

    def test_violations_get_their_own_file(self, tmp_path):
        setup_logging(log_level='WARNING', environment='testing', log_dir=str(tmp_path), file_logging=True)
        log_violation('kernel_lower_bound', 'n=3, min=0')
        get_logger('cli').warning('ordinary warning')
        violations = (tmp_path / 'dyadika-violations.log').read_text()
        assert 'Violation [kernel_lower_bound]: n=3, min=0' in violations
        assert 'ordinary warning' not in violations
        assert 'ordinary warning' in (tmp_path / 'dyadika.log').read_text()

    def test_fast_operations_are_not_reported(self, tmp_path):
        setup_logging(log_level='WARNING', environment='testing', log_dir=str(tmp_path), file_logging=True)
        log_performance('analyze', 0.01)
        log_performance('coset_integral_sweep', 12.5, 'M=6')
        performance = (tmp_path / 'dyadika-performance.log').read_text()
        assert 'analyze' not in performance
        assert 'coset_integral_sweep took 12.50s - M=6' in performance

    @patch('dyadika.logging_config.PERFORMANCE_THRESHOLD', 0.0)
    def test_threshold_can_be_lowered(self, tmp_path):
        setup_logging(log_level='WARNING', environment='testing', log_dir=str(tmp_path), file_logging=True)
        log_performance('analyze', 0.01)
        assert 'analyze' in (tmp_path / 'dyadika-performance.log').read_text()
