"""
Frozen constants for the verifier.

Constants are fitted once at the calibration resolution and written to a
versioned YAML file. Later runs compare freshly fitted values against the
frozen ones and allow a bounded relative growth.
"""

from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

import yaml

from dyadika.logging_config import get_logger, log_violation

logger = get_logger('fixtures')

FIXTURE_VERSION = 1


class FixtureError(ValueError):
    """Unreadable or incompatible fixture file"""
    pass


@dataclass
class FixtureComparison:
    name: str
    frozen: float
    measured: float
    allowed: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'frozen': self.frozen,
            'measured': self.measured,
            'allowed': self.allowed,
            'passed': self.passed,
        }


class FixtureStore:
    """YAML-backed store of fitted constants keyed by name"""

    def __init__(self, path: Union[str, Path], growth: float = 0.05):
        self.path = Path(path)
        self.growth = growth
        self._data: Optional[Dict[str, Any]] = None

    def load(self) -> Dict[str, Any]:
        if self._data is not None:
            return self._data
        if not self.path.exists():
            logger.debug(f"No fixture file at {self.path} - starting empty")
            self._data = {'version': FIXTURE_VERSION, 'constants': {}}
            return self._data
        try:
            with open(self.path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise FixtureError(f"cannot read fixtures {self.path}: {e}") from e
        version = data.get('version', FIXTURE_VERSION)
        if version != FIXTURE_VERSION:
            raise FixtureError(f"fixture file {self.path} has version {version}, expected {FIXTURE_VERSION}")
        data.setdefault('constants', {})
        self._data = data
        return data

    def get(self, name: str) -> Optional[float]:
        entry = self.load()['constants'].get(name)
        if entry is None:
            return None
        return float(Fraction(str(entry['value'])))

    def freeze(self, name: str, value: Union[Fraction, float], resolution: int) -> None:
        data = self.load()
        text = str(value) if isinstance(value, Fraction) else repr(float(value))
        data['constants'][name] = {
            'value': text,
            'resolution': resolution,
            'frozen_at': datetime.now(timezone.utc).isoformat(timespec='seconds'),
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, 'w', encoding='utf-8') as f:
            yaml.safe_dump(data, f, sort_keys=True)
        logger.info(f"Froze {name}={text} at resolution {resolution} into {self.path}")

    def compare(self, name: str, measured: Union[Fraction, float],
                floor: bool = False) -> Optional[FixtureComparison]:
        """Upper constants may grow by the allowance; floors (lower constants) may shrink by it"""
        frozen = self.get(name)
        if frozen is None:
            return None
        measured = float(measured)
        if floor:
            allowed = frozen / (1 + self.growth)
            passed = measured >= allowed
        else:
            allowed = frozen * (1 + self.growth)
            passed = measured <= allowed
        if not passed:
            side = 'below' if floor else 'above'
            log_violation('fixture_growth', f"{name}: measured {measured} {side} frozen {frozen} "
                                            f"(+-{self.growth:.0%})")
        return FixtureComparison(name, frozen, measured, allowed, passed)

    def ensure(self, name: str, fit: Callable[[int], Union[Fraction, float]], calibration_resolution: int,
               calibrate: bool = False) -> float:
        """Frozen value, fitting and freezing it first when missing or when asked to recalibrate"""
        if calibrate or self.get(name) is None:
            self.freeze(name, fit(calibration_resolution), calibration_resolution)
        return self.get(name)

    def check(self, name: str, fit: Callable[[int], Union[Fraction, float]], resolution: int,
              calibration_resolution: int, calibrate: bool = False, floor: bool = False) -> FixtureComparison:
        self.ensure(name, fit, calibration_resolution, calibrate)
        return self.compare(name, fit(resolution), floor)
