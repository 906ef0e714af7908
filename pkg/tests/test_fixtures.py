"""
Tests for the frozen-constant store
"""

from fractions import Fraction
from pathlib import Path
from unittest.mock import MagicMock

import pytest
import yaml

from dyadika.services.fixtures import FIXTURE_VERSION, FixtureError, FixtureStore
from dyadika.services.transforms import kernel_ratio_fits


class TestFixtureStore:
    """Freeze, compare and calibrate"""

    def setup_method(self):
        self.fit = MagicMock(side_effect=lambda m: Fraction(m, 3))

    def test_missing_file_is_empty(self, tmp_path):
        store = FixtureStore(tmp_path / 'constants.yml')
        assert store.get('anything') is None
        assert store.compare('anything', 1.0) is None

    def test_freeze_writes_versioned_yaml(self, tmp_path):
        path = tmp_path / 'nested' / 'constants.yml'
        FixtureStore(path).freeze('majorant_c', Fraction(65, 33), 6)
        data = yaml.safe_load(path.read_text())
        assert data['version'] == FIXTURE_VERSION
        assert data['constants']['majorant_c']['value'] == '65/33'
        assert data['constants']['majorant_c']['resolution'] == 6
        assert FixtureStore(path).get('majorant_c') == pytest.approx(65 / 33)

    def test_float_values_survive(self, tmp_path):
        path = tmp_path / 'constants.yml'
        FixtureStore(path).freeze('ratio', 0.1 + 0.2, 6)
        assert FixtureStore(path).get('ratio') == 0.1 + 0.2

    def test_growth_allowance(self, tmp_path):
        store = FixtureStore(tmp_path / 'constants.yml', growth=0.05)
        store.freeze('c', 2.0, 6)
        assert store.compare('c', 2.1).passed
        assert store.compare('c', 1.0).passed
        failed = store.compare('c', 2.2)
        assert not failed.passed
        assert failed.allowed == pytest.approx(2.1)

    def test_ensure_fits_once(self, tmp_path):
        store = FixtureStore(tmp_path / 'constants.yml')
        assert store.ensure('c', self.fit, 6) == pytest.approx(2.0)
        assert store.ensure('c', self.fit, 6) == pytest.approx(2.0)
        self.fit.assert_called_once_with(6)

    def test_calibrate_refits(self, tmp_path):
        store = FixtureStore(tmp_path / 'constants.yml')
        store.freeze('c', 100.0, 6)
        assert store.ensure('c', self.fit, 9, calibrate=True) == pytest.approx(3.0)

    def test_check_compares_at_run_resolution(self, tmp_path):
        store = FixtureStore(tmp_path / 'constants.yml')
        comparison = store.check('c', self.fit, resolution=6, calibration_resolution=6)
        assert comparison.passed
        assert comparison.frozen == comparison.measured
        assert not store.check('c', self.fit, resolution=9, calibration_resolution=6).passed

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / 'constants.yml'
        path.write_text(yaml.safe_dump({'version': FIXTURE_VERSION + 1, 'constants': {}}))
        with pytest.raises(FixtureError):
            FixtureStore(path).get('c')

    def test_unreadable_yaml(self, tmp_path):
        path = tmp_path / 'constants.yml'
        path.write_text("constants: [unclosed")
        with pytest.raises(FixtureError):
            FixtureStore(path).load()

    def test_floor_allowance(self, tmp_path):
        store = FixtureStore(tmp_path / 'constants.yml', growth=0.05)
        store.freeze('floor', 0.25, 6)
        assert store.compare('floor', 0.25, floor=True).passed
        assert store.compare('floor', 10.0, floor=True).passed
        failed = store.compare('floor', 0.2, floor=True)
        assert not failed.passed
        assert failed.allowed == pytest.approx(0.25 / 1.05)


class TestShippedFixtures:
    """The committed constants file"""

    def test_shipped_constants_match_their_closed_forms(self):
        store = FixtureStore(Path(__file__).parent.parent / 'fixtures' / 'constants.yml')
        assert store.load()['version'] == FIXTURE_VERSION
        fits = kernel_ratio_fits(6)
        assert fits['doubling_c'] == Fraction(65, 33)
        assert fits['mersenne_c'] == Fraction(1024, 1071)
        assert store.get('kernel_doubling_c') == pytest.approx(65 / 33)
        assert store.get('kernel_mersenne_c') == pytest.approx(1024 / 1071)
        assert store.get('tail_mass_c') == 0.25
