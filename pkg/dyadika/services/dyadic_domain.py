"""
Finite-resolution model of the dyadic group.

A point x = (x_0, ..., x_{M-1}) is stored by its coset index, the integer whose
binary expansion is x_0 x_1 ... x_{M-1} with x_0 as the most significant bit.
With that enumeration every interval I_n(x) is the contiguous index range of
length 2^{M-n} sharing the top n bits, and group addition is XOR of indices.

StepFunction holds the 2^M values of a function constant on each I_M(x), either
as Fractions (exact mode, numpy object arrays) or as float64.
"""

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from dyadika.models import ScalarMode

MAX_RESOLUTION = 24
FLOAT_RTOL = 1e-9

_BINARY_MAGIC = b"DYAD"


class DomainError(ValueError):
    """Base exception for the dyadic domain"""
    pass


class ResolutionError(DomainError):
    """Resolution outside 1..24, or an object that does not fit at it"""
    pass


class ResolutionMismatchError(DomainError):
    """Operands live at different resolutions"""
    pass


class LevelError(DomainError):
    """Interval level or basis coordinate out of range"""
    pass


def check_resolution(M: int) -> int:
    if isinstance(M, bool) or not isinstance(M, (int, np.integer)) or not 1 <= M <= MAX_RESOLUTION:
        raise ResolutionError(f"resolution must be an integer in [1, {MAX_RESOLUTION}], got {M!r}")
    return int(M)


@dataclass(frozen=True)
class Resolution:
    M: int

    def __post_init__(self):
        check_resolution(self.M)

    @property
    def size(self) -> int:
        return 1 << self.M


@lru_cache(maxsize=32)
def coordinate_bits(M: int) -> np.ndarray:
    """For each coset index, the integer whose bit k is x_k (the M-bit reversal)"""
    M = check_resolution(M)
    idx = np.arange(1 << M, dtype=np.int64)
    bits = np.zeros_like(idx)
    for k in range(M):
        bits |= ((idx >> (M - 1 - k)) & 1) << k
    bits.setflags(write=False)
    return bits


def parity(values: np.ndarray) -> np.ndarray:
    """Parity of the popcount of each entry of a nonnegative int64 array"""
    v = values.astype(np.int64, copy=True)
    for shift in (32, 16, 8, 4, 2, 1):
        v ^= v >> shift
    return v & 1


@dataclass(frozen=True)
class Point:
    resolution: int
    coset_index: int

    def __post_init__(self):
        check_resolution(self.resolution)
        if not 0 <= self.coset_index < (1 << self.resolution):
            raise DomainError(f"coset index {self.coset_index} outside [0, 2^{self.resolution})")

    @classmethod
    def from_coords(cls, coords: Sequence[int]) -> "Point":
        M = check_resolution(len(coords))
        index = 0
        for bit in coords:
            if bit not in (0, 1):
                raise DomainError(f"coordinates must be 0/1, got {bit!r}")
            index = (index << 1) | bit
        return cls(M, index)

    @property
    def coords(self) -> Tuple[int, ...]:
        M = self.resolution
        return tuple((self.coset_index >> (M - 1 - k)) & 1 for k in range(M))

    def coord(self, k: int) -> int:
        if not 0 <= k < self.resolution:
            return 0
        return (self.coset_index >> (self.resolution - 1 - k)) & 1

    def __add__(self, other: "Point") -> "Point":
        return add(self, other)


def zero(M: int) -> Point:
    return Point(check_resolution(M), 0)


def add(x: Point, y: Point) -> Point:
    if x.resolution != y.resolution:
        raise ResolutionMismatchError(f"cannot add points at resolutions {x.resolution} and {y.resolution}")
    return Point(x.resolution, x.coset_index ^ y.coset_index)


def basis(k: int, M: int) -> Point:
    M = check_resolution(M)
    if not 0 <= k < M:
        raise LevelError(f"basis coordinate {k} outside [0, {M})")
    return Point(M, 1 << (M - 1 - k))


@dataclass(frozen=True)
class DyadicInterval:
    """I_n(x): all points agreeing with x on coordinates 0..n-1"""
    level: int
    anchor: Point

    def __post_init__(self):
        if not 0 <= self.level <= self.anchor.resolution:
            raise LevelError(f"level {self.level} outside [0, {self.anchor.resolution}]")

    @property
    def resolution(self) -> int:
        return self.anchor.resolution

    @property
    def measure(self) -> Fraction:
        return Fraction(1, 1 << self.level)

    @property
    def length(self) -> int:
        return 1 << (self.resolution - self.level)

    @property
    def start(self) -> int:
        shift = self.resolution - self.level
        return (self.anchor.coset_index >> shift) << shift

    @property
    def stop(self) -> int:
        return self.start + self.length

    @property
    def slice(self) -> slice:
        return slice(self.start, self.stop)

    def contains(self, point: Point) -> bool:
        if point.resolution != self.resolution:
            raise ResolutionMismatchError("point and interval at different resolutions")
        return self.start <= point.coset_index < self.stop

    def to_dict(self) -> Dict[str, Any]:
        return {'level': self.level, 'start': self.start, 'stop': self.stop, 'measure': str(self.measure)}


def interval(n: int, x: Point) -> DyadicInterval:
    return DyadicInterval(n, x)


def complement_partition(M: int) -> List[DyadicInterval]:
    """Regions I_{l+1}(e_k + e_l), 0 <= k < l < M, then I_M(e_k); together they tile G minus I_M"""
    M = check_resolution(M)
    if M < 2:
        raise ResolutionError("complement partition needs M >= 2")
    regions = [
        interval(l + 1, add(basis(k, M), basis(l, M)))
        for k in range(M)
        for l in range(k + 1, M)
    ]
    regions.extend(interval(M, basis(k, M)) for k in range(M))
    return regions


def pair_region(k: int, l: int, M: int) -> DyadicInterval:
    """I_M^{k,l}: I_{l+1}(e_k + e_l) for l < M, and I_M(e_k) on the degenerate row l = M"""
    M = check_resolution(M)
    if not 0 <= k < l <= M:
        raise LevelError(f"need 0 <= k < l <= M, got k={k}, l={l}, M={M}")
    if l == M:
        return interval(M, basis(k, M))
    return interval(l + 1, add(basis(k, M), basis(l, M)))


def rise_region(l: int, M: int) -> DyadicInterval:
    """E_l = I_{l+1}(e_{l-1} + e_l); for l = 0 the region I_2(e_0 + e_1) is used"""
    M = check_resolution(M)
    level = max(l, 1)
    if l < 0 or level + 1 > M:
        raise LevelError(f"region E_{l} needs resolution at least {level + 1}, got {M}")
    return pair_region(level - 1, level, M)


# ----------------------------------------------------------------------------
# scalars
# ----------------------------------------------------------------------------

def to_fraction(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (bool, np.bool_)):
        return Fraction(int(value))
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        return Fraction(float(value))
    return Fraction(value)


def as_scalars(values: Union[Iterable, np.ndarray], mode: ScalarMode) -> np.ndarray:
    """Coerce to a 1-d array of Fractions (exact) or float64"""
    if ScalarMode(mode) is ScalarMode.EXACT:
        items = values.tolist() if isinstance(values, np.ndarray) else list(values)
        out = np.empty(len(items), dtype=object)
        out[:] = [to_fraction(v) for v in items]
        return out
    if isinstance(values, np.ndarray) and values.dtype == object:
        return np.array([float(v) for v in values.tolist()], dtype=np.float64)
    return np.asarray(values, dtype=np.float64).reshape(-1).copy()


def coerce_scalar(value: Any, mode: ScalarMode):
    if ScalarMode(mode) is ScalarMode.EXACT:
        return to_fraction(value)
    return float(value)


def _is_native(values: Any, mode: ScalarMode) -> bool:
    if not isinstance(values, np.ndarray) or values.ndim != 1:
        return False
    if mode is ScalarMode.FLOAT:
        return values.dtype == np.float64
    return values.dtype == object and all(type(v) is Fraction for v in values.tolist())


def values_close(a, b, mode: ScalarMode, rtol: float = FLOAT_RTOL) -> bool:
    if ScalarMode(mode) is ScalarMode.EXACT:
        return to_fraction(a) == to_fraction(b)
    a, b = float(a), float(b)
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))


# ----------------------------------------------------------------------------
# step functions
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StepFunction:
    resolution: int
    values: np.ndarray
    mode: ScalarMode = ScalarMode.FLOAT

    def __post_init__(self):
        M = check_resolution(self.resolution)
        mode = ScalarMode(self.mode)
        values = self.values
        if not _is_native(values, mode):
            values = as_scalars(values, mode)
        if values.shape != (1 << M,):
            raise ResolutionError(f"expected {1 << M} values at resolution {M}, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'mode', mode)

    # construction ---------------------------------------------------------

    @classmethod
    def constant(cls, c, M: int, mode: ScalarMode = ScalarMode.FLOAT) -> "StepFunction":
        M = check_resolution(M)
        return cls(M, as_scalars([c] * (1 << M), mode), mode)

    @classmethod
    def zeros(cls, M: int, mode: ScalarMode = ScalarMode.FLOAT) -> "StepFunction":
        return cls.constant(0, M, mode)

    @classmethod
    def indicator(cls, region: DyadicInterval, mode: ScalarMode = ScalarMode.FLOAT) -> "StepFunction":
        values = np.zeros(1 << region.resolution, dtype=np.int64)
        values[region.slice] = 1
        return cls(region.resolution, as_scalars(values, mode), mode)

    @classmethod
    def from_integers(cls, values: np.ndarray, M: int, mode: ScalarMode = ScalarMode.FLOAT,
                      scale: int = 1) -> "StepFunction":
        """values / scale for an integer array, exact in exact mode"""
        if ScalarMode(mode) is ScalarMode.EXACT:
            out = np.empty(values.size, dtype=object)
            out[:] = [Fraction(int(v), scale) for v in values.tolist()]
            return cls(M, out, mode)
        return cls(M, np.asarray(values, dtype=np.float64) / scale, mode)

    # arithmetic -----------------------------------------------------------

    def _other_values(self, other):
        if isinstance(other, StepFunction):
            if other.resolution != self.resolution:
                raise ResolutionMismatchError(
                    f"step functions at resolutions {self.resolution} and {other.resolution}")
            if other.mode is not self.mode:
                return as_scalars(other.values, self.mode)
            return other.values
        return coerce_scalar(other, self.mode)

    def _wrap(self, values: np.ndarray) -> "StepFunction":
        return StepFunction(self.resolution, values, self.mode)

    def __add__(self, other):
        return self._wrap(self.values + self._other_values(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other_values(other))

    def __rsub__(self, other):
        return self._wrap(self._other_values(other) - self.values)

    def __mul__(self, other):
        return self._wrap(self.values * self._other_values(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, StepFunction):
            raise TypeError("pointwise division of step functions is not supported")
        return self._wrap(self.values / self._other_values(other))

    def __neg__(self):
        return self._wrap(-self.values)

    def __abs__(self):
        return self._wrap(np.abs(self.values))

    def translate(self, h: Union[Point, int]) -> "StepFunction":
        """x -> f(x + h)"""
        index = h.coset_index if isinstance(h, Point) else int(h)
        if isinstance(h, Point) and h.resolution != self.resolution:
            raise ResolutionMismatchError("shift at a different resolution")
        order = np.arange(1 << self.resolution, dtype=np.int64) ^ index
        return self._wrap(self.values[order])

    def with_mode(self, mode: ScalarMode) -> "StepFunction":
        mode = ScalarMode(mode)
        if mode is self.mode:
            return self
        return StepFunction(self.resolution, as_scalars(self.values, mode), mode)

    def refine(self, M: int) -> "StepFunction":
        """The same function on the cosets of a finer resolution M"""
        M = check_resolution(M)
        if M < self.resolution:
            raise ResolutionError(f"cannot refine resolution {self.resolution} down to {M}")
        return StepFunction(M, np.repeat(self.values, 1 << (M - self.resolution)), self.mode)

    def to_float(self) -> np.ndarray:
        if self.mode is ScalarMode.FLOAT:
            return self.values
        return as_scalars(self.values, ScalarMode.FLOAT)

    def at(self, x: Union[Point, int]):
        index = x.coset_index if isinstance(x, Point) else int(x)
        return self.values[index]

    def max_abs_gap(self, other: "StepFunction"):
        diff = np.abs(self.values - self._other_values(other))
        if diff.size == 0:
            return coerce_scalar(0, self.mode)
        return max(diff.tolist())

    def equals(self, other: "StepFunction", rtol: float = FLOAT_RTOL) -> bool:
        gap = self.max_abs_gap(other)
        if self.mode is ScalarMode.EXACT:
            return gap == 0
        scale = max(1.0, float(np.max(np.abs(self.to_float()))))
        return float(gap) <= rtol * scale

    # serialization --------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        if self.mode is ScalarMode.EXACT:
            values = [str(v) for v in self.values.tolist()]
        else:
            values = [float(v) for v in self.values.tolist()]
        return {'M': self.resolution, 'scalar_mode': self.mode.value, 'values': values}

    @classmethod
    def from_dict(cls, record: Dict[str, Any]) -> "StepFunction":
        mode = ScalarMode(record.get('scalar_mode', 'float'))
        values = record['values']
        if mode is ScalarMode.EXACT:
            values = [Fraction(str(v)) for v in values]
        return cls(int(record['M']), as_scalars(values, mode), mode)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "StepFunction":
        return cls.from_dict(json.loads(text))

    def to_bytes(self) -> bytes:
        """Magic, little-endian uint32 M, then 2^M little-endian float64 values"""
        if self.mode is ScalarMode.EXACT:
            raise DomainError("exact step functions serialize to JSON only")
        header = _BINARY_MAGIC + np.array([self.resolution], dtype='<u4').tobytes()
        return header + self.values.astype('<f8').tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "StepFunction":
        if blob[:4] != _BINARY_MAGIC:
            raise DomainError("not a dyadika step function record")
        M = int(np.frombuffer(blob[4:8], dtype='<u4')[0])
        values = np.frombuffer(blob[8:], dtype='<f8').astype(np.float64)
        return cls(M, values, ScalarMode.FLOAT)


def integrate(f: StepFunction, region: Optional[Union[DyadicInterval, Sequence[DyadicInterval]]] = None):
    """Haar integral over G, an interval, or a union of disjoint intervals"""
    if region is None:
        chunks = [f.values]
    elif isinstance(region, DyadicInterval):
        chunks = [f.values[region.slice]]
    else:
        chunks = [f.values[r.slice] for r in region]
    for r in ([region] if isinstance(region, DyadicInterval) else (region or [])):
        if r.resolution != f.resolution:
            raise ResolutionMismatchError("region and function at different resolutions")

    if f.mode is ScalarMode.EXACT:
        total = sum((Fraction(0) + chunk.sum() for chunk in chunks if chunk.size), Fraction(0))
        return total / (1 << f.resolution)
    return float(sum(float(chunk.sum()) for chunk in chunks)) / (1 << f.resolution)


def conditional_expectation(f: StepFunction, m: int) -> StepFunction:
    """Average over the cosets of I_m; equals the partial sum S_{2^m} f"""
    M = f.resolution
    if not 0 <= m <= M:
        raise LevelError(f"level {m} outside [0, {M}]")
    width = 1 << (M - m)
    blocks = f.values.reshape(1 << m, width).sum(axis=1)
    if f.mode is ScalarMode.EXACT:
        averages = blocks / width
    else:
        averages = blocks / float(width)
    return StepFunction(M, np.repeat(averages, width), f.mode)


def coarse_averages(f: StepFunction) -> List[np.ndarray]:
    """Coset averages for every level 0..M, each of length 2^m"""
    levels = [f.values]
    current = f.values
    for _ in range(f.resolution):
        current = (current[0::2] + current[1::2]) / 2
        levels.append(current)
    levels.reverse()
    return levels


def random_function(rng: np.random.Generator, M: int, mode: ScalarMode = ScalarMode.FLOAT,
                    denominator: int = 8, bound: int = 16) -> StepFunction:
    """Seeded test data: integers in [-bound, bound] over denominator"""
    M = check_resolution(M)
    numerators = rng.integers(-bound, bound + 1, size=1 << M)
    return StepFunction.from_integers(numerators, M, mode, scale=denominator)
