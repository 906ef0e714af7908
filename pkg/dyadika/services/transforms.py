"""
Walsh-Paley analysis on the dyadic group.

Kernels are computed by integer engines: D_n, n K_n and 2^m K_{2^m} are integer
valued, so every kernel identity is checked on int64 arrays and is exact. The
engines are wrapped into StepFunctions (Fractions or float64) at the edges.

Transforms use the natural-order Hadamard butterfly on values permuted into
coordinate order, O(M 2^M) additions per call.
"""

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from dyadika.logging_config import get_logger, log_performance, log_violation
from dyadika.models import ScalarMode
from dyadika.services.dyadic_domain import (
    DyadicInterval,
    LevelError,
    Point,
    ResolutionMismatchError,
    StepFunction,
    check_resolution,
    coerce_scalar,
    coordinate_bits,
    pair_region,
    parity,
    rise_region,
    to_fraction,
)
from dyadika.services.index_math import (
    DyadicIndex,
    block_decomposition,
    index_stats,
    is_power_of_two,
    tails,
)

logger = get_logger('transforms')

# int64 rows materialized at once by the direct kernel engine
_CHUNK_ELEMENTS = 1 << 22


class TransformError(ValueError):
    """Base exception for transforms and kernels"""
    pass


class KernelDomainError(TransformError):
    """Kernel index outside what the resolution can represent"""
    pass


class MethodError(TransformError):
    """Unknown method, or a method that does not apply to this index"""
    pass


class PreconditionError(TransformError):
    """Identity requested outside its hypotheses"""
    pass


class KernelMethod(str, Enum):
    DIRECT = "direct"
    DYADIC_CLOSED = "dyadic_closed"
    DECOMPOSITION = "decomposition"


class FejerMethod(str, Enum):
    DIRECT = "direct"
    MULTIPLIER = "multiplier"


@dataclass(frozen=True, eq=False)
class Spectrum:
    resolution: int
    coeffs: np.ndarray
    mode: ScalarMode = ScalarMode.FLOAT

    def __post_init__(self):
        if self.coeffs.shape != (1 << self.resolution,):
            raise TransformError(f"spectrum at resolution {self.resolution} needs {1 << self.resolution} coefficients")
        self.coeffs.setflags(write=False)

    def block(self, m: int) -> np.ndarray:
        """Coefficients of block m: {0} for m = 0, [2^{m-1}, 2^m) otherwise"""
        if m == 0:
            return self.coeffs[:1]
        return self.coeffs[1 << (m - 1):1 << m]

    def to_dict(self) -> Dict[str, Any]:
        if self.mode is ScalarMode.EXACT:
            coeffs = [str(c) for c in self.coeffs.tolist()]
        else:
            coeffs = [float(c) for c in self.coeffs.tolist()]
        return {'M': self.resolution, 'scalar_mode': ScalarMode(self.mode).value, 'coeffs': coeffs}


@dataclass
class KernelReport:
    """Direct versus assembled kernel, compared pointwise"""
    n: DyadicIndex
    method_pair: str
    max_abs_gap: Any
    passed: bool
    fitted_c: Optional[Fraction] = None
    direct: Optional[StepFunction] = field(default=None, repr=False)
    decomposed: Optional[StepFunction] = field(default=None, repr=False)
    majorant: Optional[StepFunction] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        record = {
            'n': self.n.value,
            'method_pair': self.method_pair,
            'max_abs_gap': _scalar_out(self.max_abs_gap),
            'passed': self.passed,
        }
        if self.fitted_c is not None:
            record['fitted_c'] = _scalar_out(self.fitted_c)
        return record


@dataclass
class IdentityReport:
    """Outcome of one pointwise identity between two computed sides"""
    check: str
    params: Dict[str, Any]
    max_abs_gap: Any
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'check': self.check,
            **self.params,
            'max_abs_gap': _scalar_out(self.max_abs_gap),
            'passed': self.passed,
        }


@dataclass
class LowerBoundRow:
    n: int
    m: int
    l: int
    region: DyadicInterval
    bound: Fraction
    minimum: int
    admissible: bool
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n': self.n,
            'block_high': self.m,
            'block_low': self.l,
            'region_start': self.region.start,
            'region_stop': self.region.stop,
            'bound': str(self.bound),
            'minimum': self.minimum,
            'admissible': self.admissible,
            'passed': self.passed,
        }


@dataclass
class CosetIntegralResult:
    resolution: int
    working_resolution: int
    fitted_c: float
    worst_n: int
    worst_k: int
    worst_l: int
    worst_integral: Fraction
    rows_checked: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'M': self.resolution,
            'working_M': self.working_resolution,
            'fitted_c': self.fitted_c,
            'worst_n': self.worst_n,
            'worst_k': self.worst_k,
            'worst_l': self.worst_l,
            'worst_integral': str(self.worst_integral),
            'rows_checked': self.rows_checked,
        }


def _scalar_out(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    return float(value)


# ----------------------------------------------------------------------------
# characters
# ----------------------------------------------------------------------------

def walsh_int(n: int, M: int) -> np.ndarray:
    """w_n as a +-1 int64 array in coset order"""
    bits = coordinate_bits(M)
    return 1 - 2 * parity(bits & np.int64(n))


def _signs(n: int, M: int, mode: ScalarMode) -> np.ndarray:
    w = walsh_int(n, M)
    if ScalarMode(mode) is ScalarMode.EXACT:
        return w.astype(object)
    return w.astype(np.float64)


def rademacher(k: int, M: int, mode: ScalarMode = ScalarMode.FLOAT) -> StepFunction:
    M = check_resolution(M)
    if not 0 <= k < M:
        raise LevelError(f"Rademacher index {k} outside [0, {M})")
    return StepFunction.from_integers(walsh_int(1 << k, M), M, mode)


def walsh(n: int, M: int, mode: ScalarMode = ScalarMode.FLOAT) -> StepFunction:
    M = check_resolution(M)
    if not 0 <= n < (1 << M):
        raise KernelDomainError(f"w_{n} is not representable at resolution {M}")
    return StepFunction.from_integers(walsh_int(n, M), M, mode)


@lru_cache(maxsize=4)
def walsh_matrix(M: int) -> np.ndarray:
    """W[n, x] = w_n(x), int8; only for the naive reference paths"""
    M = check_resolution(M)
    n = np.arange(1 << M, dtype=np.int64)[:, None]
    matrix = (1 - 2 * parity(n & coordinate_bits(M)[None, :])).astype(np.int8)
    matrix.setflags(write=False)
    return matrix


# ----------------------------------------------------------------------------
# analysis and synthesis
# ----------------------------------------------------------------------------

def _hadamard(a: np.ndarray) -> np.ndarray:
    """Unnormalized natural-order Walsh-Hadamard transform"""
    size = a.size
    h = 1
    while h < size:
        pairs = a.reshape(-1, 2, h)
        a = np.stack((pairs[:, 0, :] + pairs[:, 1, :], pairs[:, 0, :] - pairs[:, 1, :]), axis=1).reshape(-1)
        h *= 2
    return a


def analyze(f: StepFunction) -> Spectrum:
    M = f.resolution
    g = f.values[coordinate_bits(M)]
    coeffs = _hadamard(g) / (1 << M)
    return Spectrum(M, coeffs, f.mode)


def synthesize(c: Spectrum) -> StepFunction:
    values = _hadamard(np.array(c.coeffs, copy=True))[coordinate_bits(c.resolution)]
    return StepFunction(c.resolution, values, c.mode)


def _integer_numerators(values: np.ndarray) -> Optional[Tuple[np.ndarray, int]]:
    """Exact values as int64 numerators over one denominator, or None when they would overflow"""
    fractions = [to_fraction(v) for v in values.tolist()]
    denominator = math.lcm(*(v.denominator for v in fractions)) if fractions else 1
    numerators = [v.numerator * (denominator // v.denominator) for v in fractions]
    if numerators and max(abs(v) for v in numerators) * len(numerators) >= 1 << 62:
        return None
    return np.array(numerators, dtype=np.int64), denominator


def analyze_naive(f: StepFunction) -> Spectrum:
    """Inner products against every w_n, O(4^M)"""
    M = f.resolution
    W = walsh_matrix(M)
    if f.mode is ScalarMode.EXACT:
        integral = _integer_numerators(f.values)
        if integral is None:
            coeffs = np.dot(W.astype(object), f.values) / (1 << M)
        else:
            numerators, denominator = integral
            sums = W.astype(np.int64) @ numerators
            coeffs = np.empty(sums.size, dtype=object)
            coeffs[:] = [Fraction(int(s), denominator << M) for s in sums.tolist()]
    else:
        coeffs = (W.astype(np.float64) @ f.values) / (1 << M)
    return Spectrum(M, coeffs, f.mode)


def synthesize_naive(c: Spectrum) -> StepFunction:
    W = walsh_matrix(c.resolution)
    if c.mode is ScalarMode.EXACT:
        values = np.dot(W.T.astype(object), c.coeffs)
    else:
        values = W.T.astype(np.float64) @ c.coeffs
    return StepFunction(c.resolution, values, c.mode)


def _multiplied(c: Spectrum, weights: np.ndarray) -> Spectrum:
    return Spectrum(c.resolution, c.coeffs * weights, c.mode)


# ----------------------------------------------------------------------------
# integer kernel engines
# ----------------------------------------------------------------------------

def _check_kernel_index(n: int, M: int, allow_zero: bool = False) -> None:
    lower = 0 if allow_zero else 1
    if not lower <= n <= (1 << M):
        raise KernelDomainError(f"kernel index {n} outside [{lower}, 2^{M}]")


def _weighted_walsh_sum(weights: np.ndarray, start: int, M: int) -> np.ndarray:
    """sum_j weights[j] w_{start + j}, chunked"""
    bits = coordinate_bits(M)
    total = np.zeros(1 << M, dtype=np.int64)
    rows = max(1, _CHUNK_ELEMENTS >> M)
    for a in range(0, weights.size, rows):
        ks = np.arange(start + a, start + min(a + rows, weights.size), dtype=np.int64)
        signs = 1 - 2 * parity(ks[:, None] & bits[None, :])
        total += weights[a:a + ks.size] @ signs
    return total


def dirichlet_int(n: int, M: int) -> np.ndarray:
    """D_n = sum_{k<n} w_k by direct summation; D_0 = 0"""
    M = check_resolution(M)
    _check_kernel_index(n, M, allow_zero=True)
    return _weighted_walsh_sum(np.ones(n, dtype=np.int64), 0, M)


def dirichlet_closed_int(m: int, M: int) -> np.ndarray:
    """D_{2^m}: 2^m on I_m, 0 elsewhere"""
    M = check_resolution(M)
    if not 0 <= m <= M:
        raise KernelDomainError(f"D_(2^{m}) needs m <= {M}")
    values = np.zeros(1 << M, dtype=np.int64)
    values[:1 << (M - m)] = 1 << m
    return values


def dirichlet_bits_int(n: int, M: int) -> np.ndarray:
    """D_n = w_n sum_j n_j r_j D_{2^j}, O(|n| 2^M)"""
    M = check_resolution(M)
    _check_kernel_index(n, M, allow_zero=True)
    total = np.zeros(1 << M, dtype=np.int64)
    if n == 0:
        return total
    for bit in index_stats(n).set_bits:
        if bit >= M:
            # n = 2^M: r_M is trivial at this resolution
            total += dirichlet_closed_int(M, M)
        else:
            total += walsh_int(1 << bit, M) * dirichlet_closed_int(bit, M)
    if n < (1 << M):
        total *= walsh_int(n, M)
    return total


def fejer_scaled_direct(n: int, M: int) -> np.ndarray:
    """n K_n = sum_{k=1}^n D_k = sum_{j<n} (n - j) w_j"""
    M = check_resolution(M)
    _check_kernel_index(n, M, allow_zero=True)
    weights = np.arange(n, 0, -1, dtype=np.int64)
    return _weighted_walsh_sum(weights, 0, M)


def fejer_scaled_closed(m: int, M: int) -> np.ndarray:
    """2^m K_{2^m}: 2^{m+t-1} on I_m(e_t) for t < m, 2^{m-1}(2^m + 1) on I_m, 0 elsewhere"""
    M = check_resolution(M)
    if not 0 <= m <= M:
        raise KernelDomainError(f"K_(2^{m}) needs m <= {M}")
    width = 1 << (M - m)
    values = np.zeros(1 << M, dtype=np.int64)
    for t in range(m):
        start = (1 << (m - 1 - t)) << (M - m)
        values[start:start + width] = 1 << (m + t - 1)
    values[:width] = ((1 << m) * ((1 << m) + 1)) // 2
    return values


def fejer_scaled_decomposed(n: int, M: int) -> np.ndarray:
    """n K_n assembled from the set bits n_1 > ... > n_r of n:
    sum_A (prod_{j<A} w_{2^{n_j}}) (2^{n_A} K_{2^{n_A}} + n^{(A)} D_{2^{n_A}})"""
    M = check_resolution(M)
    _check_kernel_index(n, M, allow_zero=True)
    total = np.zeros(1 << M, dtype=np.int64)
    if n == 0:
        return total
    prefix = np.ones(1 << M, dtype=np.int64)
    for bit, rest in tails(n):
        total += prefix * (fejer_scaled_closed(bit, M) + rest * dirichlet_closed_int(bit, M))
        if rest:
            prefix = prefix * walsh_int(1 << bit, M)
    return total


def mersenne_scaled_expansion(n: int, M: int) -> np.ndarray:
    """(2^n - 1) K_{2^n - 1} = sum_{k<n} (prod_{j=k+1}^{n-1} w_{2^j}) (2^k K_{2^k} + (2^k - 1) D_{2^k})"""
    M = check_resolution(M)
    if not 1 <= n <= M:
        raise KernelDomainError(f"expansion needs 1 <= n <= {M}, got {n}")
    total = np.zeros(1 << M, dtype=np.int64)
    prefix = np.ones(1 << M, dtype=np.int64)
    for k in range(n - 1, -1, -1):
        total += prefix * (fejer_scaled_closed(k, M) + ((1 << k) - 1) * dirichlet_closed_int(k, M))
        prefix = prefix * walsh_int(1 << k, M)
    return total


def kernel_sweep(M: int, n_max: Optional[int] = None) -> Iterator[Tuple[int, np.ndarray, np.ndarray]]:
    """Yields (n, D_n, n K_n) for n = 1..n_max; the arrays are reused between steps"""
    M = check_resolution(M)
    n_max = (1 << M) if n_max is None else n_max
    _check_kernel_index(n_max, M)
    dirichlet = np.zeros(1 << M, dtype=np.int64)
    scaled = np.zeros(1 << M, dtype=np.int64)
    for n in range(1, n_max + 1):
        dirichlet += walsh_int(n - 1, M)
        scaled += dirichlet
        yield n, dirichlet, scaled


def fejer_kernel_scaled(n: int, M: int, method: KernelMethod = KernelMethod.DIRECT) -> np.ndarray:
    M = check_resolution(M)
    _check_kernel_index(n, M)
    method = KernelMethod(method)
    if method is KernelMethod.DIRECT:
        return fejer_scaled_direct(n, M)
    if method is KernelMethod.DYADIC_CLOSED:
        if not is_power_of_two(n):
            raise MethodError(f"closed form applies to powers of two only, got n={n}")
        return fejer_scaled_closed(n.bit_length() - 1, M)
    return fejer_scaled_decomposed(n, M)


# ----------------------------------------------------------------------------
# kernels as step functions
# ----------------------------------------------------------------------------

def dirichlet(n: int, M: int, mode: ScalarMode = ScalarMode.FLOAT) -> StepFunction:
    M = check_resolution(M)
    _check_kernel_index(n, M, allow_zero=True)
    if n and is_power_of_two(n):
        closed = dirichlet_closed_int(n.bit_length() - 1, M)
        if not np.array_equal(closed, dirichlet_bits_int(n, M)):
            log_violation('dirichlet_closed_form', f"n={n}, M={M}")
            raise TransformError(f"closed form of D_{n} disagrees with the bit expansion")
        return StepFunction.from_integers(closed, M, mode)
    return StepFunction.from_integers(dirichlet_int(n, M), M, mode)


def fejer_kernel(n: int, M: int, method: KernelMethod = KernelMethod.DIRECT,
                 mode: ScalarMode = ScalarMode.FLOAT) -> StepFunction:
    return StepFunction.from_integers(fejer_kernel_scaled(n, M, method), M, mode, scale=n)


# ----------------------------------------------------------------------------
# partial sums, Fejer means, conjugation
# ----------------------------------------------------------------------------

def _check_order(n: int, M: int, lower: int) -> None:
    if not lower <= n <= (1 << M):
        raise KernelDomainError(f"order {n} outside [{lower}, 2^{M}]")


def partial_sum(f: StepFunction, n: int) -> StepFunction:
    _check_order(n, f.resolution, 0)
    c = analyze(f)
    weights = np.zeros(1 << f.resolution, dtype=np.int64)
    weights[:n] = 1
    if f.mode is ScalarMode.EXACT:
        weights = weights.astype(object)
    return synthesize(_multiplied(c, weights))


def fejer_weights(n: int, M: int, mode: ScalarMode) -> np.ndarray:
    """(n - k)/n for k < n, zero beyond"""
    size = 1 << M
    if ScalarMode(mode) is ScalarMode.EXACT:
        weights = np.empty(size, dtype=object)
        weights[:] = [Fraction(max(n - k, 0), n) for k in range(size)]
        return weights
    return np.clip(n - np.arange(size, dtype=np.float64), 0, None) / n


def fejer_mean(f: StepFunction, n: int, method: FejerMethod = FejerMethod.MULTIPLIER) -> StepFunction:
    M = f.resolution
    _check_order(n, M, 1)
    method = FejerMethod(method)
    c = analyze(f)
    if method is FejerMethod.MULTIPLIER:
        return synthesize(_multiplied(c, fejer_weights(n, M, f.mode)))

    # average of S_1 f, ..., S_n f accumulated in the value domain
    zero = coerce_scalar(0, f.mode)
    running = np.full(1 << M, zero, dtype=object if f.mode is ScalarMode.EXACT else np.float64)
    total = running.copy()
    for k in range(n):
        running = running + c.coeffs[k] * _signs(k, M, f.mode)
        total = total + running
    return StepFunction(M, total / coerce_scalar(n, f.mode), f.mode)


def conjugation_signs(t: Point) -> np.ndarray:
    """r_m(t) on spectral block m; block M uses r_M(t) = 1 since t_M = 0"""
    M = t.resolution
    signs = np.ones(1 << M, dtype=np.int64)
    signs[0] = 1 - 2 * t.coord(0)
    for m in range(1, M + 1):
        signs[1 << (m - 1):1 << m] = 1 - 2 * t.coord(m)
    return signs


def conjugate(f: StepFunction, t: Point) -> StepFunction:
    if t.resolution != f.resolution:
        raise ResolutionMismatchError("conjugation point at a different resolution")
    signs = conjugation_signs(t)
    if f.mode is ScalarMode.EXACT:
        signs = signs.astype(object)
    return synthesize(_multiplied(analyze(f), signs))


# ----------------------------------------------------------------------------
# identity checks
# ----------------------------------------------------------------------------

def _int_gap(a: np.ndarray, b: np.ndarray, mode: ScalarMode, scale: int = 1):
    if ScalarMode(mode) is ScalarMode.EXACT:
        return Fraction(int(np.max(np.abs(a - b))) if a.size else 0, scale)
    return float(np.max(np.abs(a.astype(np.float64) - b.astype(np.float64)))) / scale


def _passed(gap, mode: ScalarMode, scale: float = 1.0, rtol: float = 1e-9) -> bool:
    if ScalarMode(mode) is ScalarMode.EXACT:
        return gap == 0
    return float(gap) <= rtol * max(1.0, scale)


def _kernel_report(n: int, pair: str, a: np.ndarray, b: np.ndarray, M: int, mode: ScalarMode,
                   scale: int = 1) -> KernelReport:
    gap = _int_gap(a, b, mode, scale)
    passed = _passed(gap, mode, float(np.max(np.abs(a))) / scale if a.size else 1.0)
    if not passed:
        log_violation(pair, f"n={n}, M={M}, gap={gap}")
    return KernelReport(n=index_stats(max(n, 1)), method_pair=pair, max_abs_gap=gap, passed=passed)


def set_bit_assembly_check(n: int, M: int, mode: ScalarMode = ScalarMode.EXACT,
                           direct: Optional[np.ndarray] = None) -> KernelReport:
    """n K_n from the set-bit assembly versus direct summation"""
    M = check_resolution(M)
    _check_kernel_index(n, M)
    direct = fejer_scaled_direct(n, M) if direct is None else direct
    return _kernel_report(n, 'direct/decomposition', direct, fejer_scaled_decomposed(n, M), M, mode, scale=n)


def fejer_closed_form_check(m: int, M: int, mode: ScalarMode = ScalarMode.EXACT) -> KernelReport:
    M = check_resolution(M)
    n = 1 << m
    return _kernel_report(n, 'direct/dyadic_closed', fejer_scaled_direct(n, M), fejer_scaled_closed(m, M),
                          M, mode, scale=n)


def dirichlet_closed_form_check(m: int, M: int, mode: ScalarMode = ScalarMode.EXACT) -> KernelReport:
    M = check_resolution(M)
    return _kernel_report(1 << m, 'dirichlet_direct/closed', dirichlet_int(1 << m, M),
                          dirichlet_closed_int(m, M), M, mode)


def dirichlet_bits_check(n: int, M: int, mode: ScalarMode = ScalarMode.EXACT,
                         direct: Optional[np.ndarray] = None) -> KernelReport:
    M = check_resolution(M)
    direct = dirichlet_int(n, M) if direct is None else direct
    return _kernel_report(n, 'dirichlet_direct/bits', direct, dirichlet_bits_int(n, M), M, mode)


def mersenne_expansion_check(n: int, M: int, mode: ScalarMode = ScalarMode.EXACT) -> KernelReport:
    M = check_resolution(M)
    size = (1 << n) - 1
    return _kernel_report(size, 'direct/mersenne_expansion', fejer_scaled_direct(size, M),
                          mersenne_scaled_expansion(n, M), M, mode, scale=size)


def shift_lemma_check(j: int, m: int, M: int, mode: ScalarMode = ScalarMode.EXACT) -> IdentityReport:
    """D_{j + 2^m} = D_{2^m} + w_{2^m} D_j for j < 2^m"""
    M = check_resolution(M)
    if not (0 <= j < (1 << m) and j + (1 << m) <= (1 << M)):
        raise PreconditionError(f"need 0 <= j < 2^m and j + 2^m <= 2^M, got j={j}, m={m}, M={M}")
    left = dirichlet_int(j + (1 << m), M)
    right = dirichlet_closed_int(m, M) + walsh_int(1 << m, M) * dirichlet_int(j, M) \
        if m < M else dirichlet_closed_int(m, M) + dirichlet_int(j, M)
    gap = _int_gap(left, right, mode)
    passed = _passed(gap, mode)
    if not passed:
        log_violation('shift_lemma', f"j={j}, m={m}, M={M}")
    return IdentityReport('shift_lemma', {'j': j, 'm': m, 'M': M}, gap, passed)


def shift_lemma_sweep(M: int, mode: ScalarMode = ScalarMode.EXACT) -> List[IdentityReport]:
    """Every (j, m) with j < 2^m < 2^M, advancing D_j and D_{j + 2^m} together"""
    M = check_resolution(M)
    reports = []
    for m in range(M):
        low = np.zeros(1 << M, dtype=np.int64)
        high = dirichlet_closed_int(m, M).copy()
        character = walsh_int(1 << m, M)
        base = dirichlet_closed_int(m, M)
        worst = 0
        for j in range(1 << m):
            worst = max(worst, int(np.max(np.abs(high - (base + character * low)))))
            low += walsh_int(j, M)
            high += walsh_int(j + (1 << m), M)
        gap = Fraction(worst) if ScalarMode(mode) is ScalarMode.EXACT else float(worst)
        passed = worst == 0
        if not passed:
            log_violation('shift_lemma', f"m={m}, M={M}, gap={worst}")
        reports.append(IdentityReport('shift_lemma', {'m': m, 'M': M, 'j_count': 1 << m}, gap, passed))
    return reports


def fast_naive_check(f: StepFunction) -> IdentityReport:
    fast = analyze(f).coeffs
    naive = analyze_naive(f).coeffs
    gap = max(np.abs(fast - naive).tolist()) if fast.size else 0
    passed = _passed(gap, f.mode, float(np.max(np.abs(naive.astype(np.float64)))) if fast.size else 1.0)
    return IdentityReport('fast_vs_naive', {'M': f.resolution}, gap, passed)


def parseval_gap(f: StepFunction) -> float:
    """Relative gap between the integral of |f|^2 and the sum of squared coefficients"""
    values = f.to_float()
    energy = float(np.mean(values ** 2))
    coeffs = analyze(f).coeffs
    coeffs = coeffs.astype(np.float64) if coeffs.dtype == object else coeffs
    spectral = float(np.sum(coeffs ** 2))
    return abs(energy - spectral) / max(1.0, energy)


def fejer_methods_check(f: StepFunction, n: int) -> IdentityReport:
    direct = fejer_mean(f, n, FejerMethod.DIRECT)
    multiplier = fejer_mean(f, n, FejerMethod.MULTIPLIER)
    gap = direct.max_abs_gap(multiplier)
    passed = _passed(gap, f.mode, float(np.max(np.abs(direct.to_float()))))
    return IdentityReport('fejer_direct/multiplier', {'n': n, 'M': f.resolution}, gap, passed)


def smoothing_identity_check(f: StepFunction, n: int, k: int) -> IdentityReport:
    """sigma_n S_{2^k} f - S_{2^k} f = (2^k / n) S_{2^k} (sigma_{2^k} f - f) for 2^k < n"""
    M = f.resolution
    if not (0 <= k <= M and (1 << k) < n <= (1 << M)):
        raise PreconditionError(f"need 2^k < n <= 2^M, got n={n}, k={k}, M={M}")
    projected = partial_sum(f, 1 << k)
    left = fejer_mean(projected, n) - projected
    right = partial_sum(fejer_mean(f, 1 << k) - f, 1 << k) * (coerce_scalar(Fraction(1 << k, n), f.mode))
    gap = left.max_abs_gap(right)
    passed = _passed(gap, f.mode, float(np.max(np.abs(left.to_float()))))
    if not passed:
        log_violation('smoothing_identity', f"n={n}, k={k}, M={M}, gap={gap}")
    return IdentityReport('smoothing_identity', {'n': n, 'k': k, 'M': M}, gap, passed)


def conjugation_commutes_check(f: StepFunction, n: int, t: Point) -> IdentityReport:
    left = conjugate(fejer_mean(f, n), t)
    right = fejer_mean(conjugate(f, t), n)
    gap = left.max_abs_gap(right)
    passed = _passed(gap, f.mode, float(np.max(np.abs(left.to_float()))))
    if not passed:
        log_violation('conjugation_commutes', f"n={n}, t={t.coset_index}, gap={gap}")
    return IdentityReport('conjugation_commutes', {'n': n, 't': t.coset_index, 'M': f.resolution}, gap, passed)


# ----------------------------------------------------------------------------
# kernel estimates
# ----------------------------------------------------------------------------

def majorant_bracket_int(n: int, M: int) -> np.ndarray:
    """sum_A (2^{l_A}|K_{2^{l_A}}| + 2^{m_A}|K_{2^{m_A}}| + 2^{l_A} sum_{k=l_A}^{m_A} D_{2^k}) + V(n)"""
    M = check_resolution(M)
    _check_kernel_index(n, M)
    total = np.full(1 << M, index_stats(n).variation, dtype=np.int64)
    for m, l in block_decomposition(n).blocks:
        total += np.abs(fejer_scaled_closed(l, M)) + np.abs(fejer_scaled_closed(m, M))
        for k in range(l, m + 1):
            total += (1 << l) * dirichlet_closed_int(k, M)
    return total


def lemma5_majorant(n: int, M: int, c, mode: ScalarMode = ScalarMode.EXACT) -> StepFunction:
    """c times the bracket; dominates |n K_n| once c is large enough"""
    bracket = StepFunction.from_integers(majorant_bracket_int(n, M), M, mode)
    return bracket * coerce_scalar(c, mode)


def _max_ratio(numerator: np.ndarray, denominator: np.ndarray) -> Fraction:
    """Exact max of numerator/denominator over entries with positive denominator"""
    mask = denominator > 0
    if not np.any(mask):
        return Fraction(0)
    num, den = numerator[mask], denominator[mask]
    approx = num / den.astype(np.float64)
    best = float(np.max(approx))
    candidates = np.nonzero(approx >= best * (1 - 1e-12))[0]
    return max(Fraction(int(num[i]), int(den[i])) for i in candidates)


def majorant_fitted_constant(n: int, M: int, scaled: Optional[np.ndarray] = None) -> Fraction:
    """Smallest c with |n K_n| <= c * bracket pointwise"""
    scaled = fejer_scaled_direct(n, M) if scaled is None else scaled
    return _max_ratio(np.abs(scaled), majorant_bracket_int(n, M))


def majorant_check(n: int, M: int, c, mode: ScalarMode = ScalarMode.EXACT,
                   scaled: Optional[np.ndarray] = None) -> KernelReport:
    M = check_resolution(M)
    scaled = fejer_scaled_direct(n, M) if scaled is None else scaled
    fitted = majorant_fitted_constant(n, M, scaled)
    passed = fitted <= to_fraction(c)
    if not passed:
        log_violation('kernel_majorant', f"n={n}, M={M}, needs c={fitted}, have {c}")
    return KernelReport(
        n=index_stats(n),
        method_pair='abs_kernel/majorant',
        max_abs_gap=Fraction(0) if passed else fitted - to_fraction(c),
        passed=passed,
        fitted_c=fitted,
        direct=StepFunction.from_integers(np.abs(scaled), M, mode),
        majorant=lemma5_majorant(n, M, c, mode),
    )


def lemma3_lower_bound(n: int, M: int, scaled: Optional[np.ndarray] = None) -> List[LowerBoundRow]:
    """Minimum of n|K_n| on E_{l_i} against 2^{2 l_i - 4}, one row per block"""
    M = check_resolution(M)
    _check_kernel_index(n, M)
    scaled = fejer_scaled_direct(n, M) if scaled is None else scaled
    magnitude = np.abs(scaled)
    rows = []
    for m, l in block_decomposition(n).blocks:
        region = rise_region(l, M)
        bound = Fraction(2) ** (2 * l - 4)
        minimum = int(np.min(magnitude[region.slice]))
        # a low run (m, 0) with m >= 1 carries no lower bound: n|K_n| vanishes there for n = 3
        admissible = not (l == 0 and m >= 1)
        passed = minimum >= bound
        if admissible and not passed:
            log_violation('kernel_lower_bound', f"n={n}, block=({m},{l}), min={minimum}, bound={bound}")
        rows.append(LowerBoundRow(n, m, l, region, bound, minimum, admissible, passed))
    return rows


def lower_bound_exact_value(n: int, l: int) -> int:
    """|n K_n| on E_l when l >= 1 is the low end of a run: 2^{2l-2} - n''(n''+1)/2, n'' = n mod 2^l"""
    if l < 1:
        raise LevelError("closed value is known for l >= 1 only")
    rest = n % (1 << l)
    return (1 << (2 * l - 2)) - rest * (rest + 1) // 2


def lemma4_integral(n: int, M: int, k: int, l: int, extra_bits: int = 4,
                    scaled: Optional[np.ndarray] = None) -> Fraction:
    """max over x in I_M^{k,l} of the integral of |K_n(x + t)| over t in I_M, at resolution M + extra_bits"""
    M = check_resolution(M)
    working = check_resolution(M + extra_bits)
    if n < (1 << M):
        raise KernelDomainError(f"needs n >= 2^M = {1 << M}, got {n}")
    _check_kernel_index(n, working)
    scaled = fejer_scaled_direct(n, working) if scaled is None else scaled
    coset_sums = np.abs(scaled).reshape(1 << M, 1 << extra_bits).sum(axis=1)
    region = pair_region(k, l, M)
    return Fraction(int(np.max(coset_sums[region.slice])), n << working)


def coset_integral_sweep(M: int, extra_bits: int = 4, stride: int = 1) -> CosetIntegralResult:
    """Largest integral / 2^{k+l-2M} over n in [2^M, 2^{M+extra}) and all pairs (k, l)"""
    M = check_resolution(M)
    if M < 2:
        raise KernelDomainError("the pair regions need M >= 2")
    working = check_resolution(M + extra_bits)
    pairs = [(k, l) for k in range(M) for l in range(k + 1, M + 1)]
    regions = sorted(((pair_region(k, l, M).start, k, l) for k, l in pairs))
    starts = np.array([start for start, _, _ in regions], dtype=np.int64)
    # 2^{2M - k - l} for each region, in start order
    weights = np.array([float(1 << (2 * M - k - l)) for _, k, l in regions])

    started = time.perf_counter()
    best = (-1.0, 0, 0, 0, Fraction(0))
    rows = 0
    for n, _, scaled in kernel_sweep(working, (1 << working) - 1):
        if n < (1 << M) or (n - (1 << M)) % stride:
            continue
        coset_sums = np.abs(scaled).reshape(1 << M, 1 << extra_bits).sum(axis=1)
        maxima = np.maximum.reduceat(coset_sums, starts)
        ratios = maxima * weights / float(n << working)
        i = int(np.argmax(ratios))
        rows += len(regions)
        if ratios[i] > best[0]:
            _, k, l = regions[i]
            best = (float(ratios[i]), n, k, l, Fraction(int(maxima[i]), n << working))
    log_performance('coset_integral_sweep', time.perf_counter() - started, f"M={M}")

    ratio, n, k, l, integral = best
    return CosetIntegralResult(M, working, ratio, n, k, l, integral, rows)


def kernel_ratio_fits(M: int) -> Dict[str, Fraction]:
    """Fitted c for |K_{2^n}| <= c|K_{2^{n-1}}| and |K_{2^n - 1}| <= c(|K_{2^n}| + 1), n <= M"""
    M = check_resolution(M)
    doubling = Fraction(0)
    mersenne = Fraction(0)
    for n in range(1, M + 1):
        upper = np.abs(fejer_scaled_closed(n, M))
        lower = 2 * np.abs(fejer_scaled_closed(n - 1, M))
        # K_{2^n} = upper / 2^n, K_{2^{n-1}} = lower / 2^n
        if np.any((lower == 0) & (upper != 0)):
            raise TransformError(f"K_(2^{n}) is supported outside the support of K_(2^{n - 1})")
        doubling = max(doubling, _max_ratio(upper, lower))

        size = (1 << n) - 1
        # |K_{2^n - 1}| / (|K_{2^n}| + 1), rescaled to integers by 2^n (2^n - 1)
        numerator = np.abs(fejer_scaled_direct(size, M)) * (1 << n)
        denominator = (upper + (1 << n)) * size
        mersenne = max(mersenne, _max_ratio(numerator, denominator))
    return {'doubling_c': doubling, 'mersenne_c': mersenne}
