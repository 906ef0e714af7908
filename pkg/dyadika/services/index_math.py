"""
Index statistics on binary expansions.

For n = sum_k n_k 2^k the module computes the top set bit |n| (msb), the lowest
set bit [n] (lsb), their gap d(n), the variation V(n), the tails obtained by
dropping leading set bits, and the decomposition of n into maximal runs of
consecutive 1-digits. Everything is plain integer arithmetic.

Naming: r is the number of set bits (popcount), s the number of runs (blocks).
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Tuple, Union

MAX_INDEX_BITS = 63


class IndexMathError(ValueError):
    """Base exception for index arithmetic"""
    pass


class InvalidIndexError(IndexMathError):
    """Raised for zero, negative, oversized or non-integer indices and bad positions"""
    pass


@dataclass(frozen=True)
class DyadicIndex:
    """A positive integer together with its binary statistics"""
    value: int
    digits: Tuple[int, ...]
    msb: int
    lsb: int
    span: int
    variation: int

    @property
    def popcount(self) -> int:
        return sum(self.digits)

    @property
    def set_bits(self) -> Tuple[int, ...]:
        """Positions of the set bits, most significant first"""
        return tuple(k for k in range(self.msb, -1, -1) if self.digits[k])

    @property
    def is_power_of_two(self) -> bool:
        return self.span == 0

    def to_dict(self) -> Dict[str, int]:
        return {
            'n': self.value,
            'msb': self.msb,
            'lsb': self.lsb,
            'span': self.span,
            'variation': self.variation,
            'popcount': self.popcount,
        }


@dataclass(frozen=True)
class BlockDecomposition:
    """Maximal runs (m_i, l_i) of 1-digits, m_i >= l_i, most significant run first"""
    value: int
    blocks: Tuple[Tuple[int, int], ...] = field(default_factory=tuple)

    @property
    def count(self) -> int:
        return len(self.blocks)

    def reconstruct(self) -> int:
        return sum(((1 << (m + 1)) - (1 << l)) for m, l in self.blocks)


def _check_index(n: int) -> int:
    if isinstance(n, bool) or not isinstance(n, int):
        raise InvalidIndexError(f"index must be an integer, got {n!r}")
    if n < 1:
        raise InvalidIndexError(f"index must be positive, got {n}")
    if n.bit_length() > MAX_INDEX_BITS:
        raise InvalidIndexError(f"index {n} exceeds {MAX_INDEX_BITS} bits")
    return n


@lru_cache(maxsize=65536)
def index_stats(n: int) -> DyadicIndex:
    n = _check_index(n)
    msb = n.bit_length() - 1
    digits = tuple((n >> k) & 1 for k in range(msb + 1))
    lsb = (n & -n).bit_length() - 1

    # one padded zero above msb so the final fall is counted
    padded = digits + (0,)
    variation = padded[0] + sum(abs(padded[k] - padded[k - 1]) for k in range(1, len(padded)))

    return DyadicIndex(
        value=n,
        digits=digits,
        msb=msb,
        lsb=lsb,
        span=msb - lsb,
        variation=variation,
    )


def tail(n: Union[int, DyadicIndex], i: int) -> int:
    """Sum of the set bits strictly below the i-th one (1-based, most significant first)"""
    index = n if isinstance(n, DyadicIndex) else index_stats(n)
    bits = index.set_bits
    if not 1 <= i <= len(bits):
        raise InvalidIndexError(f"position {i} outside 1..{len(bits)} for n={index.value}")
    return index.value & ((1 << bits[i - 1]) - 1)


def tails(n: Union[int, DyadicIndex]) -> List[Tuple[int, int]]:
    """(bit, tail) pairs for every set bit, most significant first"""
    index = n if isinstance(n, DyadicIndex) else index_stats(n)
    return [(bit, index.value & ((1 << bit) - 1)) for bit in index.set_bits]


@lru_cache(maxsize=65536)
def block_decomposition(n: int) -> BlockDecomposition:
    n = _check_index(n)
    blocks = []
    k = n.bit_length() - 1
    while k >= 0:
        if (n >> k) & 1:
            m = k
            while k >= 0 and (n >> k) & 1:
                k -= 1
            blocks.append((m, k + 1))
        else:
            k -= 1
    return BlockDecomposition(value=n, blocks=tuple(blocks))


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0
