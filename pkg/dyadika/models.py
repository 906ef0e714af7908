from enum import Enum
from fractions import Fraction
from typing import List, Optional, Tuple

from sqlmodel import Field, SQLModel


class ScalarMode(str, Enum):
    EXACT = "exact"
    FLOAT = "float"


class Command(str, Enum):
    KERNELS = "kernels"
    LEMMAS = "lemmas"
    BOUNDS = "bounds"
    COUNTEREXAMPLE = "counterexample"
    STATS = "stats"
    BENCH = "bench"


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


class Regime(str, Enum):
    """Sharpness constructions, one per bound that fails without its hypothesis"""
    T1B = "T1b"
    T2B = "T2b"
    T3B = "T3b"
    T4B = "T4b"


class AlphaRule(str, Enum):
    ALTERNATING = "alternating"        # 1, 101, 10101, ... in binary
    POWER_PLUS_ONE = "power_plus_one"  # 2^m + 1


class PhiRule(str, Enum):
    CONSTANT = "constant"
    VARIATION = "variation"            # Phi(n) = V(n)
    SPAN_POWER = "span_power"          # Phi(n) = 2^{d(n)(1/p-2)/2}
    TABLE = "table"


def parse_fraction(text: str) -> Fraction:
    """'1/4', '0.25' or '1' -> Fraction; raises ValueError on garbage"""
    return Fraction(str(text).strip())


class RunConfig(SQLModel):
    """Validated settings for one CLI invocation"""
    command: Command
    resolution: int = Field(default=12, ge=1, le=24)
    mode: ScalarMode = Field(default=ScalarMode.EXACT)
    p_values: List[str] = Field(default_factory=lambda: ["1/4", "1/3", "1/2"])
    seed: int = Field(default=0, ge=0)
    output: OutputFormat = Field(default=OutputFormat.JSON)
    out: Optional[str] = None
    plan: Optional[str] = None
    threads: int = Field(default=1, ge=1, le=256)
    calibrate: bool = False

    @property
    def exponents(self) -> Tuple[Fraction, ...]:
        return tuple(parse_fraction(p) for p in self.p_values)


class PlanConfig(SQLModel):
    """A counterexample plan as declared in plans/*.json"""
    regime: Regime
    p: str = Field(default="1/2")
    alphas: Optional[List[int]] = None
    alpha_rule: Optional[AlphaRule] = None
    start: int = Field(default=1, ge=0)
    count: Optional[int] = Field(default=None, ge=1)
    phi_rule: PhiRule = Field(default=PhiRule.CONSTANT)
    phi_table: Optional[List[str]] = None
    resolution: int = Field(default=14, ge=2, le=24)
    budget: Optional[float] = Field(default=None, gt=0)
    report_from: int = Field(default=1, ge=1)

    @property
    def exponent(self) -> Fraction:
        return parse_fraction(self.p)
