"""
Sharpness constructions for Fejer means on dyadic Hardy spaces.

A plan fixes an increasing index sequence alpha_1 < alpha_2 < ... with strictly
increasing top bits, a weight function Phi and an exponent p. The martingale
F = sum_k mu_k a_k is assembled from block atoms

    a_k = 2^{|alpha_k|(1/p-1)} (D_{2^{|alpha_k|+1}} - D_{2^{|alpha_k|}}),

which equal +-2^{|alpha_k|/p} on I_{|alpha_k|} and have H_p quasi-norm 1, so F
has constant spectrum mu_k 2^{|alpha_k|(1/p-1)} on [2^{|alpha_k|}, 2^{|alpha_k|+1}).

Regimes and weights mu_k:
    T1b  p = 1/2      Phi^{1/2}(alpha)/V(alpha)
    T2b  p < 1/2      1/u(alpha), u = 2^{d(alpha)(1/p-2)/2}/Phi^{1/2}(alpha)
    T3b  p = 1/2      1/V^2(alpha)
    T4b  p < 1/2      2^{-(1/p-2)d(alpha)}

Irrational weights are rounded to a fraction once and reused everywhere, so the
exact-mode identities below stay exact.
"""

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from dyadika.logging_config import get_logger, log_performance, log_violation
from dyadika.models import AlphaRule, PhiRule, PlanConfig, Regime, ScalarMode, parse_fraction
from dyadika.services.dyadic_domain import (
    ResolutionError,
    StepFunction,
    check_resolution,
    coerce_scalar,
    interval,
    zero,
)
from dyadika.services.hardy import (
    Atom,
    DyadicMartingale,
    atomic_build,
    lp_norm,
    lp_norm_power,
    modulus_hp,
    parse_exponent,
    weak_lp_norm,
)
from dyadika.services.index_math import DyadicIndex, block_decomposition, index_stats
from dyadika.services.transforms import (
    Spectrum,
    analyze,
    dirichlet_closed_int,
    fejer_scaled_direct,
    fejer_weights,
    synthesize,
    walsh_int,
)

logger = get_logger('counterexamples')

MAX_DENOMINATOR = 10 ** 12
HALF = Fraction(1, 2)


class CounterexampleError(ValueError):
    """Base exception for counterexample plans and builds"""
    pass


class PlanValidationError(CounterexampleError):
    """A plan breaks its regime's hypotheses"""
    pass


# ----------------------------------------------------------------------------
# rational helpers
# ----------------------------------------------------------------------------

def rationalize(value: float, max_denominator: int = MAX_DENOMINATOR) -> Fraction:
    return Fraction(value).limit_denominator(max_denominator)


def rational_sqrt(x: Fraction, max_denominator: int = MAX_DENOMINATOR) -> Fraction:
    x = Fraction(x)
    if x < 0:
        raise CounterexampleError(f"square root of negative {x}")
    num, den = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if num * num == x.numerator and den * den == x.denominator:
        return Fraction(num, den)
    return rationalize(math.sqrt(x), max_denominator)


def pow2(exponent: Fraction, max_denominator: int = MAX_DENOMINATOR) -> Fraction:
    """2^exponent, exact for integral exponents"""
    exponent = Fraction(exponent)
    if exponent.denominator == 1:
        return Fraction(2) ** int(exponent)
    return rationalize(2.0 ** float(exponent), max_denominator)


def alpha_family(rule: AlphaRule, j: int) -> int:
    rule = AlphaRule(rule)
    if rule is AlphaRule.ALTERNATING:
        return ((1 << (2 * j + 2)) - 1) // 3
    return (1 << j) + 1


def phi_value(rule: PhiRule, alpha: int, p: Fraction, table: Optional[Sequence[Fraction]] = None,
              k: int = 0) -> Fraction:
    rule = PhiRule(rule)
    stats = index_stats(alpha)
    if rule is PhiRule.CONSTANT:
        return Fraction(1)
    if rule is PhiRule.VARIATION:
        return Fraction(stats.variation)
    if rule is PhiRule.SPAN_POWER:
        return pow2(stats.span * (1 / p - 2) / 2)
    if table is None or k >= len(table):
        raise PlanValidationError(f"phi table has no entry for k={k + 1}")
    return Fraction(table[k])


# ----------------------------------------------------------------------------
# plans
# ----------------------------------------------------------------------------

def _budget_term(regime: Regime, alpha: int, phi: Fraction, p: Fraction) -> float:
    stats = index_stats(alpha)
    if regime is Regime.T1B:
        return float(phi) ** 0.25 / stats.variation ** 0.5
    u = 2.0 ** (stats.span * float(1 / p - 2) / 2) / float(phi) ** 0.5
    return u ** (-float(p))


def _pair_ok(regime: Regime, previous: int, current: int, p: Fraction) -> bool:
    if regime is Regime.T3B:
        return index_stats(previous).variation ** 2 <= index_stats(current).variation
    exponent = 1 / p - 2
    return 2 * index_stats(previous).span * exponent <= index_stats(current).span * exponent


@dataclass(frozen=True)
class SequencePlan:
    regime: Regime
    p: Fraction
    alphas: Tuple[int, ...]
    phis: Tuple[Fraction, ...]
    resolution: int
    budget: Optional[float] = None
    report_from: int = 1

    def __post_init__(self):
        self.validate()

    # construction ---------------------------------------------------------

    @classmethod
    def from_config(cls, config: PlanConfig, budgets: Optional[Dict[str, float]] = None) -> "SequencePlan":
        regime = Regime(config.regime)
        p = parse_exponent(config.p)
        budget = config.budget
        if budget is None and budgets:
            budget = budgets.get(regime.value)
        table = [parse_fraction(v) for v in config.phi_table] if config.phi_table else None

        if config.alphas:
            alphas = list(config.alphas)
        elif config.alpha_rule is not None:
            alphas = select_alphas(config.alpha_rule, regime, p, config.resolution,
                                   start=config.start, count=config.count,
                                   budget=budget, phi_rule=config.phi_rule)
        else:
            raise PlanValidationError("plan needs either alphas or alpha_rule")

        phis = tuple(phi_value(config.phi_rule, a, p, table, k) for k, a in enumerate(alphas))
        return cls(regime, p, tuple(alphas), phis, config.resolution, budget, config.report_from)

    # validation -----------------------------------------------------------

    def validate(self) -> None:
        check_resolution(self.resolution)
        if self.regime in (Regime.T1B, Regime.T3B) and self.p != HALF:
            raise PlanValidationError(f"{self.regime.value} is stated for p = 1/2, got {self.p}")
        if self.regime in (Regime.T2B, Regime.T4B) and not 0 < self.p < HALF:
            raise PlanValidationError(f"{self.regime.value} needs 0 < p < 1/2, got {self.p}")
        if len(self.phis) != len(self.alphas):
            raise PlanValidationError("one phi value per alpha is required")
        if not 1 <= self.report_from <= len(self.alphas):
            raise PlanValidationError(f"report_from={self.report_from} outside [1, {len(self.alphas)}]")

        previous = None
        for alpha, phi in zip(self.alphas, self.phis):
            if alpha < 1:
                raise PlanValidationError(f"alphas must be positive, got {alpha}")
            if index_stats(alpha).msb + 1 > self.resolution:
                raise PlanValidationError(f"alpha={alpha} needs resolution {index_stats(alpha).msb + 1}, "
                                          f"plan has {self.resolution}")
            if phi < 0:
                raise PlanValidationError(f"phi must be nonnegative, got {phi} at alpha={alpha}")
            if previous is not None:
                prev_alpha, prev_phi = previous
                if index_stats(alpha).msb <= index_stats(prev_alpha).msb:
                    raise PlanValidationError(f"top bits must increase strictly: {prev_alpha} then {alpha}")
                if phi < prev_phi:
                    raise PlanValidationError(f"phi must be nondecreasing: {prev_phi} then {phi}")
                if self.regime in (Regime.T3B, Regime.T4B) and not _pair_ok(self.regime, prev_alpha, alpha, self.p):
                    raise PlanValidationError(f"{self.regime.value} growth condition fails between "
                                              f"{prev_alpha} and {alpha}")
            previous = (alpha, phi)

        if self.regime in (Regime.T1B, Regime.T2B) and self.budget is not None:
            total = self.budget_total()
            if total > self.budget:
                raise PlanValidationError(f"{self.regime.value} weight sum {total:.4f} exceeds budget {self.budget}")

    def reported(self) -> List[int]:
        """k values whose blow-up rows are reported; earlier blocks only feed the spectrum"""
        return list(range(self.report_from, len(self.alphas) + 1))

    @property
    def key(self) -> str:
        """Short stable name for fixtures keyed by plan"""
        text = json.dumps([self.regime.value, str(self.p), list(self.alphas), [str(phi) for phi in self.phis]])
        return hashlib.sha1(text.encode("utf-8")).hexdigest()[:10]

    def budget_total(self) -> float:
        if self.regime not in (Regime.T1B, Regime.T2B):
            return 0.0
        return sum(_budget_term(self.regime, a, phi, self.p) for a, phi in zip(self.alphas, self.phis))

    # weights --------------------------------------------------------------

    def index(self, k: int) -> DyadicIndex:
        """1-based"""
        return index_stats(self.alphas[k - 1])

    def weight(self, k: int) -> Fraction:
        stats = self.index(k)
        phi = self.phis[k - 1]
        if self.regime is Regime.T1B:
            return rational_sqrt(phi) / stats.variation
        if self.regime is Regime.T2B:
            return rational_sqrt(phi) / pow2(stats.span * (1 / self.p - 2) / 2)
        if self.regime is Regime.T3B:
            return Fraction(1, stats.variation ** 2)
        return 1 / pow2((1 / self.p - 2) * stats.span)

    def atom_scale(self, k: int) -> Fraction:
        return pow2(self.index(k).msb * (1 / self.p - 1))

    def block_coefficient(self, k: int) -> Fraction:
        """Spectrum of F on block k as assembled: mu_k 2^{|alpha_k|(1/p-1)}"""
        return self.weight(k) * self.atom_scale(k)

    def closed_form_coefficient(self, k: int) -> Fraction:
        """Spectrum of F on block k as predicted per regime"""
        stats = self.index(k)
        phi = self.phis[k - 1]
        if self.regime is Regime.T1B:
            return pow2(stats.msb) * rational_sqrt(phi) / stats.variation
        if self.regime is Regime.T2B:
            u = pow2(stats.span * (1 / self.p - 2) / 2) / rational_sqrt(phi)
            return self.atom_scale(k) / u
        if self.regime is Regime.T3B:
            return pow2(stats.msb) / stats.variation ** 2
        return pow2(stats.msb + (1 / self.p - 2) * stats.lsb)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'regime': self.regime.value,
            'p': str(self.p),
            'alphas': list(self.alphas),
            'phis': [str(phi) for phi in self.phis],
            'resolution': self.resolution,
            'report_from': self.report_from,
        }


def select_alphas(rule: AlphaRule, regime: Regime, p: Fraction, M: int, start: int = 1,
                  count: Optional[int] = None, budget: Optional[float] = None,
                  phi_rule: PhiRule = PhiRule.CONSTANT) -> List[int]:
    """Greedy subsequence of a family so the regime's weight condition holds"""
    regime = Regime(regime)
    p = Fraction(p)
    if PhiRule(phi_rule) is PhiRule.TABLE:
        raise PlanValidationError("tabulated phi needs explicit alphas")
    chosen: List[int] = []
    spent = 0.0
    j = start
    while count is None or len(chosen) < count:
        alpha = alpha_family(rule, j)
        j += 1
        if alpha < 1:
            continue
        stats = index_stats(alpha)
        if stats.msb + 1 > M:
            break
        if chosen and stats.msb <= index_stats(chosen[-1]).msb:
            continue
        if regime in (Regime.T1B, Regime.T2B):
            term = _budget_term(regime, alpha, phi_value(phi_rule, alpha, p), p)
            if budget is not None and spent + term > budget:
                break
            spent += term
        elif chosen and not _pair_ok(regime, chosen[-1], alpha, p):
            continue
        chosen.append(alpha)
    logger.debug(f"selected {regime.value} alphas {chosen} at M={M}")
    return chosen


# ----------------------------------------------------------------------------
# atoms and martingales
# ----------------------------------------------------------------------------

def block_atom(alpha: Union[int, DyadicIndex], p, M: int, mode: ScalarMode = ScalarMode.EXACT) -> Atom:
    """2^{|alpha|(1/p-1)} (D_{2^{|alpha|+1}} - D_{2^{|alpha|}}) on I_{|alpha|}"""
    M = check_resolution(M)
    p = parse_exponent(p)
    stats = alpha if isinstance(alpha, DyadicIndex) else index_stats(alpha)
    top = stats.msb
    if top + 1 > M:
        raise ResolutionError(f"block atom for |alpha|={top} needs resolution {top + 1}, got {M}")
    difference = dirichlet_closed_int(top + 1, M) - dirichlet_closed_int(top, M)
    f = StepFunction.from_integers(difference, M, mode) * coerce_scalar(pow2(top * (1 / p - 1)), mode)
    return Atom(p, interval(top, zero(M)), f)


def build_martingale(plan: SequencePlan, A: Optional[int] = None,
                     mode: ScalarMode = ScalarMode.EXACT) -> DyadicMartingale:
    M = plan.resolution
    A = M if A is None else A
    if not 0 <= A <= M:
        raise ResolutionError(f"truncation level {A} outside [0, {M}]")
    for alpha in plan.alphas:
        if index_stats(alpha).msb >= A:
            raise PlanValidationError(f"alpha={alpha} has |alpha| >= A={A}")
    atoms = [block_atom(alpha, plan.p, M, mode) for alpha in plan.alphas]
    weights = [plan.weight(k) for k in range(1, len(plan.alphas) + 1)]
    return atomic_build(weights, atoms, A, resolution=M, mode=mode)


# ----------------------------------------------------------------------------
# spectrum and decomposition checks
# ----------------------------------------------------------------------------

@dataclass
class SpectrumRow:
    k: int
    alpha: int
    expected: Fraction
    measured_min: Any
    measured_max: Any
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'k': self.k,
            'alpha': self.alpha,
            'expected': str(self.expected),
            'measured_min': str(self.measured_min),
            'measured_max': str(self.measured_max),
            'passed': self.passed,
        }


def _close(a, b, rtol: float = 1e-9, exact: bool = True) -> bool:
    if exact and isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    a, b = float(a), float(b)
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))


def spectrum_check(plan: SequencePlan, F: DyadicMartingale) -> Tuple[List[SpectrumRow], bool]:
    """Block-by-block comparison with the closed form; second value: zero off the blocks"""
    coeffs = analyze(F.terminal).coeffs
    exact = F.mode is ScalarMode.EXACT
    on_block = np.zeros(coeffs.size, dtype=bool)
    rows = []
    for k in range(1, len(plan.alphas) + 1):
        top = plan.index(k).msb
        block = coeffs[1 << top:1 << (top + 1)]
        on_block[1 << top:1 << (top + 1)] = True
        assembled = plan.block_coefficient(k)
        expected = plan.closed_form_coefficient(k)
        values = block.tolist()
        low, high = min(values), max(values)
        target = assembled if exact else float(assembled)
        # assembled and predicted agree up to the rounding of irrational weights
        passed = _close(low, target) and _close(high, target) and _close(assembled, expected, exact=False)
        if not passed:
            log_violation('block_spectrum', f"{plan.regime.value} k={k} alpha={plan.alphas[k - 1]}: "
                                            f"expected {expected}, got [{low}, {high}]")
        rows.append(SpectrumRow(k, plan.alphas[k - 1], expected, low, high, passed))

    off = coeffs[~on_block].tolist()
    zero_off = all(_close(v, Fraction(0) if exact else 0.0) for v in off)
    if not zero_off:
        log_violation('block_spectrum', f"{plan.regime.value}: nonzero coefficients off the blocks")
    return rows, zero_off


@dataclass
class DecompositionReport:
    k: int
    alpha: int
    kind: str
    residual: Any
    shift_gap: int
    passed: bool
    terms: Dict[str, StepFunction] = field(default_factory=dict, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'k': self.k,
            'alpha': self.alpha,
            'kind': self.kind,
            'residual': str(self.residual),
            'shift_gap': self.shift_gap,
            'passed': self.passed,
        }


def _from_spectrum(c: Spectrum, weights: np.ndarray) -> StepFunction:
    return synthesize(Spectrum(c.resolution, c.coeffs * weights, c.mode))


def _partial_weights(n: int, M: int, mode: ScalarMode) -> np.ndarray:
    weights = np.zeros(1 << M, dtype=np.int64)
    weights[:n] = 1
    return weights.astype(object) if mode is ScalarMode.EXACT else weights.astype(np.float64)


def shifted_kernel_gap(top: int, n: int, M: int) -> int:
    """max |sum_{j=1}^n (D_{2^top + j} - D_{2^top}) - w_{2^top} n K_n|"""
    base = dirichlet_closed_int(top, M)
    running = base.copy()
    total = np.zeros(1 << M, dtype=np.int64)
    for j in range(1, n + 1):
        running += walsh_int((1 << top) + j - 1, M)
        total += running - base
    expected = walsh_int(1 << top, M) * fejer_scaled_direct(n, M)
    return int(np.max(np.abs(total - expected))) if n else 0


def decomposition_check(plan: SequencePlan, k: int, F: Optional[DyadicMartingale] = None,
                        mode: ScalarMode = ScalarMode.EXACT,
                        spectrum: Optional[Spectrum] = None) -> DecompositionReport:
    """
    T1b/T2b: sigma_a F / Phi = smoothed + projected + kernel with, for a = alpha_k and N = 2^{|a|},
        smoothed  = N sigma_N F / (Phi a)
        projected = (a - N) S_N F / (Phi a)
        kernel    = c_k w_N (a - N) K_{a - N} / (Phi a)
    T3b/T4b: sigma_a F - F = (N/a)(sigma_N F - F) + ((a - N)/a)(S_N F - F) + c_k w_N (a - N) K_{a - N} / a
    where c_k is the constant spectrum of F on [N, 2N).
    """
    M = plan.resolution
    F = build_martingale(plan, mode=mode) if F is None else F
    mode = F.mode
    c = analyze(F.terminal) if spectrum is None else spectrum
    stats = plan.index(k)
    alpha, top = stats.value, stats.msb
    N = 1 << top
    rest = alpha - N

    sigma_alpha = _from_spectrum(c, fejer_weights(alpha, M, mode))
    sigma_top = _from_spectrum(c, fejer_weights(N, M, mode))
    partial_top = _from_spectrum(c, _partial_weights(N, M, mode))
    f = F.terminal

    character = walsh_int(N, M)
    kernel_term = StepFunction.from_integers(character * fejer_scaled_direct(rest, M), M, mode)
    coefficient = coerce_scalar(plan.block_coefficient(k), mode)
    a = coerce_scalar(alpha, mode)

    if plan.regime in (Regime.T1B, Regime.T2B):
        phi = coerce_scalar(plan.phis[k - 1], mode)
        kind = 'fejer_split'
        left = sigma_alpha / phi
        terms = {
            'smoothed': sigma_top * (coerce_scalar(N, mode) / (phi * a)),
            'projected': partial_top * (coerce_scalar(rest, mode) / (phi * a)),
            'kernel': kernel_term * (coefficient / (phi * a)),
        }
    else:
        kind = 'difference_split'
        left = sigma_alpha - f
        terms = {
            'smoothed': (sigma_top - f) * (coerce_scalar(N, mode) / a),
            'projected': (partial_top - f) * (coerce_scalar(rest, mode) / a),
            'kernel': kernel_term * (coefficient / a),
        }

    right = StepFunction.zeros(M, mode)
    for term in terms.values():
        right = right + term
    residual = left.max_abs_gap(right)
    shift_gap = shifted_kernel_gap(top, rest, M)

    if mode is ScalarMode.EXACT:
        passed = residual == 0 and shift_gap == 0
    else:
        scale = max(1.0, float(np.max(np.abs(left.to_float()))))
        passed = float(residual) <= 1e-9 * scale and shift_gap == 0
    if not passed:
        log_violation('decomposition', f"{plan.regime.value} k={k} alpha={alpha}: residual={residual}, "
                                       f"shift_gap={shift_gap}")
    return DecompositionReport(k, alpha, kind, residual, shift_gap, passed, terms)


# ----------------------------------------------------------------------------
# blow-up sweeps
# ----------------------------------------------------------------------------

@dataclass
class BlowupRow:
    k: int
    alpha: int
    measured: float
    paper_bound: float

    @property
    def ratio(self) -> float:
        return self.measured / self.paper_bound if self.paper_bound > 0 else math.inf

    def to_dict(self) -> Dict[str, Any]:
        return {'k': self.k, 'alpha': self.alpha, 'measured': self.measured, 'paper_bound': self.paper_bound}


@dataclass
class BlowupReport:
    regime: Regime
    rows: List[BlowupRow]
    fitted_c: float
    floor_c: Optional[float]
    monotone: bool
    bounded_below: bool
    final_display_ok: bool

    @property
    def passed(self) -> bool:
        return self.monotone and self.bounded_below and self.final_display_ok

    def to_dict(self) -> Dict[str, Any]:
        return {
            'regime': self.regime.value,
            'fitted_c': self.fitted_c,
            'floor_c': self.floor_c,
            'monotone': self.monotone,
            'bounded_below': self.bounded_below,
            'final_display_ok': self.final_display_ok,
            'passed': self.passed,
            'rows': [row.to_dict() for row in self.rows],
        }


def paper_bound(plan: SequencePlan, k: int) -> float:
    """Growth the measured quasi-norm is expected to dominate, up to a constant"""
    stats = plan.index(k)
    phi = float(plan.phis[k - 1])
    p = float(plan.p)
    if plan.regime is Regime.T1B:
        return stats.variation ** 0.5 / phi ** 0.25
    if plan.regime is Regime.T2B:
        return (2.0 ** (stats.span * (1 / p - 2)) / phi) ** 0.5
    if plan.regime is Regime.T3B:
        return block_decomposition(stats.value).count / stats.variation
    return final_display_bound(plan, k)


def final_display_bound(plan: SequencePlan, k: int) -> float:
    """(2^{(2p-1)[alpha]-4})^{1/p}, the weak quasi-norm form of the p-th power estimate"""
    p = float(plan.p)
    return (2.0 ** ((2 * p - 1) * plan.index(k).lsb - 4)) ** (1 / p)


def blowup_sweep(plan: SequencePlan, ks: Optional[Sequence[int]] = None,
                 F: Optional[DyadicMartingale] = None, threads: int = 1,
                 floor_c: Optional[float] = None) -> BlowupReport:
    """Measured quasi-norms per k, merged in the order of ks

    Rows must grow strictly with k. With floor_c, every row must also dominate
    floor_c times its bound; floor_c comes from a frozen fit, never from these rows.
    """
    started = time.perf_counter()
    F = build_martingale(plan, mode=ScalarMode.FLOAT) if F is None else F
    terminal = F.terminal.with_mode(ScalarMode.FLOAT)
    c = analyze(terminal)
    M = plan.resolution
    ks = plan.reported() if ks is None else list(ks)

    def measure(k: int) -> BlowupRow:
        alpha = plan.alphas[k - 1]
        sigma = _from_spectrum(c, fejer_weights(alpha, M, ScalarMode.FLOAT))
        if plan.regime is Regime.T1B:
            value = lp_norm(sigma / float(plan.phis[k - 1]), HALF)
        elif plan.regime is Regime.T2B:
            value = weak_lp_norm(sigma / float(plan.phis[k - 1]), plan.p)
        elif plan.regime is Regime.T3B:
            value = lp_norm(sigma - terminal, HALF)
        else:
            value = weak_lp_norm(sigma - terminal, plan.p)
        return BlowupRow(k, alpha, value, paper_bound(plan, k))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        rows = list(executor.map(measure, ks))

    fitted = min((row.ratio for row in rows), default=0.0)
    ordered = sorted(rows, key=lambda row: row.k)
    monotone = all(b.measured > a.measured for a, b in zip(ordered, ordered[1:]))
    if floor_c is None:
        bounded_below = fitted > 0
    else:
        bounded_below = floor_c > 0 and all(row.measured >= floor_c * row.paper_bound for row in rows)
    final_ok = all(row.measured >= final_display_bound(plan, row.k) for row in rows) \
        if plan.regime is Regime.T4B else True

    report = BlowupReport(plan.regime, rows, fitted, floor_c, monotone, bounded_below, final_ok)
    if not report.passed:
        log_violation('blowup', f"{plan.regime.value}: monotone={monotone}, bounded_below={bounded_below} "
                                f"(fitted={fitted}, floor={floor_c}), final_display_ok={final_ok}")
    log_performance('blowup_sweep', time.perf_counter() - started, plan.regime.value)
    return report


# ----------------------------------------------------------------------------
# modulus certificates and the kernel mass estimate
# ----------------------------------------------------------------------------

@dataclass
class CertificateRow:
    k: int
    alpha: int
    modulus: float
    modulus_power: float
    tail_power_sum: float
    tail_sum: float
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'k': self.k,
            'alpha': self.alpha,
            'modulus': self.modulus,
            'modulus_power': self.modulus_power,
            'tail_power_sum': self.tail_power_sum,
            'tail_sum': self.tail_sum,
            'passed': self.passed,
        }


def modulus_certificates(plan: SequencePlan, F: Optional[DyadicMartingale] = None) -> List[CertificateRow]:
    """omega_{H_p}(2^{-|alpha_k|}, F)^p <= sum_{i>=k} |mu_i|^p, block atoms having H_p norm 1"""
    F = build_martingale(plan, mode=ScalarMode.FLOAT) if F is None else F
    p = float(plan.p)
    weights = [abs(float(plan.weight(i))) for i in range(1, len(plan.alphas) + 1)]
    rows = []
    for k in range(1, len(plan.alphas) + 1):
        omega = modulus_hp(F, plan.index(k).msb, plan.p)
        power = omega ** p
        tail_power = sum(w ** p for w in weights[k - 1:])
        passed = power <= tail_power * (1 + 1e-9)
        if not passed:
            log_violation('modulus_certificate', f"{plan.regime.value} k={k}: {power} > {tail_power}")
        rows.append(CertificateRow(k, plan.alphas[k - 1], omega, power, tail_power,
                                   sum(weights[k - 1:]), passed))
    return rows


@dataclass
class MassRow:
    alpha: int
    n: int
    mass: float
    variation: int
    ratio: float

    def to_dict(self) -> Dict[str, Any]:
        return {'alpha': self.alpha, 'n': self.n, 'mass': self.mass,
                'variation': self.variation, 'ratio': self.ratio}


def tail_kernel_mass(alpha: int, M: int) -> MassRow:
    """Integral of |n K_n|^{1/2} for n = alpha - 2^{|alpha|}, against V(alpha)"""
    M = check_resolution(M)
    stats = index_stats(alpha)
    n = alpha - (1 << stats.msb)
    if alpha > (1 << M):
        raise ResolutionError(f"alpha={alpha} exceeds 2^{M}")
    if n == 0:
        mass = 0.0
    else:
        mass = lp_norm_power(StepFunction.from_integers(fejer_scaled_direct(n, M), M), HALF)
    return MassRow(alpha, n, mass, stats.variation, mass / stats.variation)


def tail_mass_sweep(M: int, rule: AlphaRule = AlphaRule.ALTERNATING) -> List[MassRow]:
    """tail_kernel_mass over a family, every member with top bit below M"""
    M = check_resolution(M)
    rows = []
    j = 1
    while index_stats(alpha_family(rule, j)).msb < M:
        rows.append(tail_kernel_mass(alpha_family(rule, j), M))
        j += 1
    return rows


def load_plan(path: Union[str, Path], budgets: Optional[Dict[str, float]] = None) -> SequencePlan:
    """Read plans/*.json; malformed files raise ValueError subclasses"""
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as e:
        raise PlanValidationError(f"cannot read plan {path}: {e}") from e
    config = PlanConfig.model_validate(data)
    plan = SequencePlan.from_config(config, budgets)
    logger.info(f"loaded {plan.regime.value} plan from {path}: alphas={list(plan.alphas)}")
    return plan
