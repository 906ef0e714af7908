from .config_service import ConfigService
from .fixtures import FixtureStore
from .verifier import CommandReport, Verifier

__all__ = ['ConfigService', 'FixtureStore', 'CommandReport', 'Verifier']
