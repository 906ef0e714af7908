"""
Norms on the dyadic group: L_p and weak L_p quasi-norms, the martingale maximal
function, H_p quasi-norms, the two moduli of continuity, p-atoms and atomic
martingales.

A martingale at resolution M is the ladder F_m = S_{2^m} f, m = 0..M, of a
terminal step function f; F_m is the coset average of f over I_m.
"""

import functools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from dyadika.logging_config import get_logger, log_violation
from dyadika.models import ScalarMode, parse_fraction
from dyadika.services.dyadic_domain import (
    DyadicInterval,
    Point,
    ResolutionError,
    ResolutionMismatchError,
    StepFunction,
    check_resolution,
    coarse_averages,
    coerce_scalar,
    conditional_expectation,
    integrate,
    interval,
)
from dyadika.services.transforms import analyze, conjugate

logger = get_logger('hardy')

ExponentLike = Union[Fraction, str, float, int]


class HardyError(ValueError):
    """Base exception for norm machinery"""
    pass


class ExponentError(HardyError):
    """Exponent outside (0, 2], or below 1 where p >= 1 is required"""
    pass


def parse_exponent(p: ExponentLike, minimum: Optional[Fraction] = None) -> Fraction:
    try:
        value = p if isinstance(p, Fraction) else parse_fraction(str(p))
    except (ValueError, ZeroDivisionError) as e:
        raise ExponentError(f"cannot read exponent {p!r}: {e}") from e
    if not 0 < value <= 2:
        raise ExponentError(f"exponent must lie in (0, 2], got {value}")
    if minimum is not None and value < minimum:
        raise ExponentError(f"exponent must be at least {minimum}, got {value}")
    return value


@dataclass(frozen=True, eq=False)
class DyadicMartingale:
    resolution: int
    terminal: StepFunction
    levels: Tuple[StepFunction, ...]

    @classmethod
    def from_terminal(cls, f: StepFunction) -> "DyadicMartingale":
        M = f.resolution
        levels = tuple(
            StepFunction(M, np.repeat(coarse, 1 << (M - m)), f.mode)
            for m, coarse in enumerate(coarse_averages(f))
        )
        return cls(M, f, levels)

    @classmethod
    def zero(cls, M: int, mode: ScalarMode = ScalarMode.FLOAT) -> "DyadicMartingale":
        return cls.from_terminal(StepFunction.zeros(M, mode))

    @property
    def mode(self) -> ScalarMode:
        return self.terminal.mode

    def level(self, m: int) -> StepFunction:
        return self.levels[m]


@dataclass(frozen=True)
class Atom:
    p: Fraction
    support: DyadicInterval
    f: StepFunction


@dataclass
class AtomCertificate:
    p: Fraction
    support: DyadicInterval
    vanishes_off_support: bool
    mean_zero: bool
    sup_value: Any
    sup_bound: Any
    sup_ok: bool
    atom: Optional[Atom] = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.vanishes_off_support and self.mean_zero and self.sup_ok

    @property
    def failures(self) -> List[str]:
        names = []
        if not self.vanishes_off_support:
            names.append('support')
        if not self.mean_zero:
            names.append('mean_zero')
        if not self.sup_ok:
            names.append('sup_bound')
        return names

    @property
    def sup_tight(self) -> bool:
        """sup|a| equals mu(I)^{-1/p}"""
        if isinstance(self.sup_value, Fraction) and isinstance(self.sup_bound, Fraction):
            return self.sup_value == self.sup_bound
        return abs(float(self.sup_value) - float(self.sup_bound)) <= 1e-9 * max(1.0, float(self.sup_bound))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'p': str(self.p),
            'level': self.support.level,
            'start': self.support.start,
            'passed': self.passed,
            'failures': self.failures,
            'sup_value': str(self.sup_value),
            'sup_bound': str(self.sup_bound),
        }


@dataclass
class NormRow:
    object_id: str
    p: Fraction
    norm_kind: str
    value: float

    def to_dict(self) -> Dict[str, Any]:
        return {'object_id': self.object_id, 'p': str(self.p), 'norm_kind': self.norm_kind, 'value': self.value}


@dataclass
class SandwichReport:
    n: int
    p: Fraction
    modulus: float
    distance: float
    lower_ok: bool
    upper_ok: bool
    best_approximation: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok


# ----------------------------------------------------------------------------
# norms
# ----------------------------------------------------------------------------

def lp_norm_power(f: StepFunction, p: ExponentLike) -> float:
    """Integral of |f|^p"""
    p = parse_exponent(p)
    values = np.abs(f.to_float())
    return float(np.mean(values ** float(p)))


def lp_norm(f: StepFunction, p: ExponentLike) -> float:
    p = parse_exponent(p)
    return lp_norm_power(f, p) ** (1.0 / float(p))


def weak_lp_norm(f: StepFunction, p: ExponentLike) -> float:
    """sup over levels v of |f| of v * mu(|f| >= v)^{1/p}"""
    p = parse_exponent(p)
    magnitudes = np.sort(np.abs(f.to_float()))
    size = magnitudes.size
    levels = np.unique(magnitudes[magnitudes > 0])
    if levels.size == 0:
        return 0.0
    at_least = size - np.searchsorted(magnitudes, levels, side='left')
    return float(np.max(levels * (at_least / size) ** (1.0 / float(p))))


def maximal(F: DyadicMartingale) -> StepFunction:
    """F* = max over m of |F_m|"""
    peak = functools.reduce(np.maximum, (np.abs(level.values) for level in F.levels))
    return StepFunction(F.resolution, peak, F.mode)


def hp_norm(F: DyadicMartingale, p: ExponentLike) -> float:
    return lp_norm(maximal(F), p)


def tail_maximal(F: DyadicMartingale, n: int) -> StepFunction:
    """Maximal function of (0, ..., 0, F_{n+1} - F_n, ..., F_M - F_n)"""
    M = F.resolution
    if not 0 <= n <= M:
        raise ResolutionError(f"level {n} outside [0, {M}]")
    base = F.levels[n].to_float()
    peak = np.zeros(1 << M, dtype=np.float64)
    for m in range(n + 1, M + 1):
        peak = np.maximum(peak, np.abs(F.levels[m].to_float() - base))
    return StepFunction(M, peak, ScalarMode.FLOAT)


def modulus_hp(F: DyadicMartingale, n: int, p: ExponentLike) -> float:
    """H_p distance from F to S_{2^n} F"""
    return lp_norm(tail_maximal(F, n), p)


def modulus_lp(f: StepFunction, n: int, p: ExponentLike) -> float:
    """sup over h in I_n of ||f(. + h) - f||_p, p >= 1"""
    p = parse_exponent(p, minimum=Fraction(1))
    M = f.resolution
    if not 0 <= n <= M:
        raise ResolutionError(f"level {n} outside [0, {M}]")
    values = f.to_float()
    order = np.arange(1 << M, dtype=np.int64)
    best = 0.0
    # I_n(0) is the index range [0, 2^{M-n})
    for h in range(1, 1 << (M - n)):
        diff = np.abs(values[order ^ h] - values)
        best = max(best, float(np.mean(diff ** float(p))) ** (1.0 / float(p)))
    return best


def sandwich_check(f: StepFunction, n: int, p: ExponentLike = 1) -> SandwichReport:
    """modulus/2 <= ||f - S_{2^n} f||_p <= modulus for p >= 1; at p = 2 also for E_{2^n}(f, L_2)"""
    p = parse_exponent(p, minimum=Fraction(1))
    omega = modulus_lp(f, n, p)
    distance = lp_norm(f - conditional_expectation(f, n), p)
    slack = 1e-9 * max(1.0, omega)
    lower_ok = omega / 2 <= distance + slack
    upper_ok = distance <= omega + slack
    best = None
    if p == 2:
        best = best_approximation_l2(f, n)
        lower_ok = lower_ok and omega / 2 <= best + slack
        upper_ok = upper_ok and best <= omega + slack and abs(best - distance) <= slack
    report = SandwichReport(n, p, omega, distance, lower_ok, upper_ok, best)
    if not report.passed:
        log_violation('modulus_sandwich', f"n={n}, p={p}, omega={omega}, distance={distance}, best={best}")
    return report


def best_approximation_l2(f: StepFunction, n: int) -> float:
    """E_{2^n}(f, L_2) from the spectrum: the l_2 mass of the coefficients at j >= 2^n"""
    M = f.resolution
    if not 0 <= n <= M:
        raise ResolutionError(f"level {n} outside [0, {M}]")
    coeffs = np.asarray(analyze(f).coeffs[1 << n:], dtype=np.float64)
    return float(np.sqrt(np.sum(coeffs ** 2)))


# ----------------------------------------------------------------------------
# atoms
# ----------------------------------------------------------------------------

def atom_bound(level: int, p: Fraction, mode: ScalarMode):
    """mu(I_level)^{-1/p} = 2^{level/p}; exact when level/p is an integer"""
    exponent = Fraction(level) / p
    if ScalarMode(mode) is ScalarMode.EXACT and exponent.denominator == 1:
        return Fraction(2) ** int(exponent)
    return 2.0 ** float(exponent)


def certify_atom(f: StepFunction, support: DyadicInterval, p: ExponentLike) -> AtomCertificate:
    p = parse_exponent(p)
    if support.resolution != f.resolution:
        raise ResolutionMismatchError("atom support at a different resolution")
    bound = atom_bound(support.level, p, f.mode)

    inside = f.values[support.slice]
    outside = np.concatenate((f.values[:support.start], f.values[support.stop:]))
    exact = f.mode is ScalarMode.EXACT
    scale = float(bound)

    if exact:
        vanishes = all(v == 0 for v in outside.tolist())
        mean_zero = integrate(f, support) == 0
        sup_value = max(np.abs(inside).tolist()) if inside.size else Fraction(0)
        sup_ok = sup_value <= bound if isinstance(bound, Fraction) else float(sup_value) <= bound * (1 + 1e-12)
    else:
        tol = 1e-9 * max(1.0, scale)
        vanishes = bool(np.all(np.abs(outside) <= tol))
        mean_zero = abs(float(np.sum(inside))) <= tol * max(1, inside.size)
        sup_value = float(np.max(np.abs(inside))) if inside.size else 0.0
        sup_ok = sup_value <= scale + tol

    certificate = AtomCertificate(p, support, vanishes, mean_zero, sup_value, bound, sup_ok)
    if certificate.passed:
        certificate.atom = Atom(p, support, f)
    else:
        logger.debug(f"atom certification failed on level {support.level}: {certificate.failures}")
    return certificate


def random_atom(rng: np.random.Generator, M: int, p: ExponentLike,
                mode: ScalarMode = ScalarMode.FLOAT, level: Optional[int] = None) -> Atom:
    """Mean-zero noise on a random dyadic interval, scaled so sup|a| = mu(I)^{-1/p}"""
    M = check_resolution(M)
    p = parse_exponent(p)
    mode = ScalarMode(mode)
    level = int(rng.integers(0, M)) if level is None else level
    if not 0 <= level < M:
        raise ResolutionError(f"a nonzero atom needs a support level in [0, {M}), got {level}")
    anchor = Point(M, int(rng.integers(0, 1 << M)))
    support = interval(level, anchor)
    width = support.length

    noise = rng.integers(-8, 9, size=width).astype(np.int64)
    if not np.any(noise * width - noise.sum()):
        noise = np.concatenate((np.ones(width // 2, dtype=np.int64), -np.ones(width - width // 2, dtype=np.int64)))
    # mean-free integers: width * noise - sum(noise)
    centered = noise * width - int(noise.sum())
    peak = int(np.max(np.abs(centered)))

    bound = atom_bound(level, p, mode)
    values = np.zeros(1 << M, dtype=object if mode is ScalarMode.EXACT else np.float64)
    if mode is ScalarMode.EXACT:
        if not isinstance(bound, Fraction):
            bound = Fraction(bound).limit_denominator(10 ** 9) * Fraction(999_999_999, 10 ** 9)
        values[:] = Fraction(0)
        values[support.slice] = [Fraction(int(c), peak) * bound for c in centered.tolist()]
    else:
        values[support.slice] = centered.astype(np.float64) * (float(bound) / peak)
    return Atom(p, support, StepFunction(M, values, mode))


def refine_atom(atom: Atom, M: int) -> Atom:
    """The same atom at a finer resolution; support and sup bound are unchanged"""
    f = atom.f.refine(M)
    shift = M - atom.f.resolution
    anchor = Point(M, atom.support.anchor.coset_index << shift)
    return Atom(atom.p, interval(atom.support.level, anchor), f)


def atomic_build(weights: Sequence, atoms: Sequence[Atom], A: int,
                 resolution: Optional[int] = None, mode: Optional[ScalarMode] = None) -> DyadicMartingale:
    """F_n = sum_k mu_k S_{2^n} a_k for n <= A; the ladder is constant from level A on"""
    if len(weights) != len(atoms):
        raise HardyError(f"{len(weights)} weights for {len(atoms)} atoms")
    if atoms:
        resolution = atoms[0].f.resolution if resolution is None else resolution
        mode = atoms[0].f.mode if mode is None else mode
    if resolution is None:
        raise HardyError("an empty atom list needs an explicit resolution")
    M = check_resolution(resolution)
    mode = ScalarMode(mode or ScalarMode.FLOAT)
    if not 0 <= A <= M:
        raise ResolutionError(f"truncation level {A} outside [0, {M}]")

    total = StepFunction.zeros(M, mode)
    for weight, atom in zip(weights, atoms):
        if atom.f.resolution != M:
            raise ResolutionMismatchError(f"atom at resolution {atom.f.resolution}, expected {M}")
        total = total + atom.f.with_mode(mode) * coerce_scalar(weight, mode)
    return DyadicMartingale.from_terminal(conditional_expectation(total, A))


def conjugate_norm_ratio(F: DyadicMartingale, t: Point, p: ExponentLike) -> float:
    """||conjugate(F, t)||_{H_p} / ||F||_{H_p}; 1.0 for the zero martingale"""
    base = hp_norm(F, p)
    if base == 0:
        return 1.0
    conjugated = DyadicMartingale.from_terminal(conjugate(F.terminal, t))
    return hp_norm(conjugated, p) / base


def norm_rows(object_id: str, f: StepFunction, p: ExponentLike) -> List[NormRow]:
    p = parse_exponent(p)
    F = DyadicMartingale.from_terminal(f)
    return [
        NormRow(object_id, p, 'lp', lp_norm(f, p)),
        NormRow(object_id, p, 'weak_lp', weak_lp_norm(f, p)),
        NormRow(object_id, p, 'hp', hp_norm(F, p)),
    ]
