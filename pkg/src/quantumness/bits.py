"""GF(2) bit vectors and the triangular solver behind interactive hashing.

Bit positions are 1-based with position 1 the leftmost (most significant)
bit, so lexicographic order on the text form coincides with numeric order
on the packed value. That convention matches the ``0^{j-1} 1 suffix`` shape
of the hashing queries: query j has j-1 leading zeros, then a forced 1,
then uniformly random bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "BitString",
    "HashQuerySet",
    "SolutionPair",
    "inner_product",
    "random_bits",
    "random_bitstring",
    "sample_hash_query",
    "solve_two_solutions",
]


def random_bits(rng: np.random.Generator, width: int) -> int:
    """Uniform integer with ``width`` random bits (width 0 gives 0)."""
    if width < 0:
        raise ValueError("width must be non-negative")
    if width == 0:
        return 0
    if width <= 63:
        # One scalar draw is several times cheaper than rng.bytes here.
        return int(rng.integers(1 << width))
    raw = int.from_bytes(rng.bytes((width + 7) // 8), "big")
    return raw & ((1 << width) - 1)


@dataclass(frozen=True, slots=True)
class BitString:
    """Fixed-length bit vector packed into an int, MSB first.

    ``BitString(0b1011, 4)`` is the string ``1011``; position 1 is the
    leading 1. Instances are immutable and hashable.
    """

    value: int
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("bit string length must be positive")
        if not 0 <= self.value < (1 << self.n):
            raise ValueError(f"value {self.value} does not fit in {self.n} bits")

    @classmethod
    def from_text(cls, text: str) -> "BitString":
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a bit string: {text!r}")
        return cls(int(text, 2), len(text))

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls(0, n)

    @classmethod
    def unit(cls, n: int, j: int) -> "BitString":
        """Indicator vector with a single 1 at position ``j``."""
        if not 1 <= j <= n:
            raise ValueError(f"position {j} out of range 1..{n}")
        return cls(1 << (n - j), n)

    def bit(self, j: int) -> int:
        """Bit at 1-based position ``j`` (position 1 is leftmost)."""
        if not 1 <= j <= self.n:
            raise ValueError(f"position {j} out of range 1..{self.n}")
        return (self.value >> (self.n - j)) & 1

    @property
    def text(self) -> str:
        """ASCII form used on the wire and in the CLI."""
        return format(self.value, f"0{self.n}b")

    def __str__(self) -> str:
        return self.text

    def __xor__(self, other: "BitString") -> "BitString":
        if self.n != other.n:
            raise ValueError(f"length mismatch: {self.n} != {other.n}")
        return BitString(self.value ^ other.value, self.n)


def random_bitstring(n: int, rng: np.random.Generator) -> BitString:
    return BitString(random_bits(rng, n), n)


def inner_product(a: BitString, b: BitString) -> int:
    """Bitwise inner product over GF(2): the parity of the AND."""
    if a.n != b.n:
        raise ValueError(f"length mismatch: {a.n} != {b.n}")
    return (a.value & b.value).bit_count() & 1


def sample_hash_query(j: int, n: int, rng: np.random.Generator) -> BitString:
    """Draw round-j query: j-1 zeros, a 1, then n-j uniform bits."""
    if not 1 <= j <= n - 1:
        raise ValueError(f"round index {j} out of range 1..{n - 1}")
    return BitString((1 << (n - j)) | random_bits(rng, n - j), n)


@dataclass(frozen=True, slots=True)
class HashQuerySet:
    """The n-1 structured queries of one interactive-hashing run."""

    queries: tuple[BitString, ...]
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("domain length must be positive")
        if len(self.queries) != self.n - 1:
            raise ValueError(f"expected {self.n - 1} queries, got {len(self.queries)}")
        for j, h in enumerate(self.queries, start=1):
            if h.n != self.n:
                raise ValueError(f"query {j} has length {h.n}, expected {self.n}")
            # The prefix shape (leading 1 exactly at position j) also pins
            # down linear independence: leading coordinates are all distinct.
            if h.value.bit_length() != self.n - j + 1:
                raise ValueError(f"query {j} is not of the form 0^{j - 1}1...")

    @classmethod
    def sample(cls, n: int, rng: np.random.Generator) -> "HashQuerySet":
        return cls(tuple(sample_hash_query(j, n, rng) for j in range(1, n)), n)

    def __iter__(self) -> Iterator[BitString]:
        return iter(self.queries)

    def __len__(self) -> int:
        return len(self.queries)


@dataclass(frozen=True, slots=True)
class SolutionPair:
    """The exactly-two solutions of a hashing transcript, lex ordered."""

    y0: BitString
    y1: BitString

    def __post_init__(self) -> None:
        if self.y0.n != self.y1.n:
            raise ValueError("solutions must have equal length")
        if self.y0.value >= self.y1.value:
            raise ValueError("y0 must precede y1 lexicographically")

    def __iter__(self) -> Iterator[BitString]:
        return iter((self.y0, self.y1))


def solve_two_solutions(queries: HashQuerySet, answers: Sequence[int]) -> SolutionPair:
    """Solve ``{h_j . y = c_j}`` by back substitution.

    The prefix structure makes the system triangular: once bits j+1..n of y
    are known, equation j determines bit j, and bit n is free. Substituting
    both values of the free bit yields the exactly-two solutions.
    """
    n = queries.n
    if len(answers) != n - 1:
        raise ValueError(f"expected {n - 1} answers, got {len(answers)}")
    if any(c not in (0, 1) for c in answers):
        raise ValueError("answers must be bits")
    found = []
    for free_bit in (0, 1):
        y = free_bit
        for j in range(n - 1, 0, -1):
            # Low n-j bits of h_j are its suffix past the forced 1.
            suffix = queries.queries[j - 1].value & ((1 << (n - j)) - 1)
            bit = answers[j - 1] ^ ((suffix & y).bit_count() & 1)
            y |= bit << (n - j)
        found.append(y)
    lo, hi = sorted(found)
    return SolutionPair(BitString(lo, n), BitString(hi, n))
