"""Full-domain trapdoor permutations over {0,1}^n.

Two instantiations share one interface:

* ``mock``: an explicit permutation table with the inverse table as the
  trapdoor. Exists so exhaustive oracles can run without number theory.
* ``modular``: cycle walking on x -> x^e mod N restricted to the largest
  power-of-two domain inside Z_N (n = floor(log2 N)). The walk terminates
  because iterating a bijection from a domain point must return to the
  domain, and since 2^n > N/2 its expected length is below 2.

Keys are immutable; evaluation and inversion are pure, so concurrent
sessions may share a key pair. Wire and file form is canonical JSON with
big integers as decimal strings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import sympy

from .bits import BitString, random_bits
from .errors import ConfigurationError

__all__ = [
    "MockKey",
    "MockTrapdoor",
    "ModularKey",
    "ModularTrapdoor",
    "TdpKeyPair",
    "evaluate",
    "gen_mock",
    "gen_modular",
    "gen_modular_from_factors",
    "invert",
    "key_from_jsonable",
    "key_to_jsonable",
    "trapdoor_from_jsonable",
    "trapdoor_to_jsonable",
]

DEFAULT_MOCK_BOUND = 20
DEFAULT_PUBLIC_EXPONENT = 65537


@dataclass(frozen=True)
class MockKey:
    n: int
    table: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.table) != 1 << self.n:
            raise ConfigurationError("table size must be 2^n")


@dataclass(frozen=True)
class MockTrapdoor:
    n: int
    inverse: tuple[int, ...] = field(repr=False)  # secret, keep out of logs


@dataclass(frozen=True)
class ModularKey:
    n: int
    modulus: int
    exponent: int

    def __post_init__(self) -> None:
        if self.n != self.modulus.bit_length() - 1:
            raise ConfigurationError("n must be floor(log2 N)")


@dataclass(frozen=True)
class ModularTrapdoor:
    n: int
    modulus: int
    inv_exponent: int = field(repr=False)  # secret, keep out of logs


Key = MockKey | ModularKey
Trapdoor = MockTrapdoor | ModularTrapdoor


@dataclass(frozen=True)
class TdpKeyPair:
    key: Key
    trapdoor: Trapdoor


def gen_mock(
    n: int,
    rng: np.random.Generator | None = None,
    table: "tuple[int, ...] | list[int] | range | None" = None,
    max_n: int = DEFAULT_MOCK_BOUND,
) -> TdpKeyPair:
    """Explicit-table permutation; random unless a table is supplied."""
    if not 1 <= n <= max_n:
        raise ConfigurationError(f"mock domain length must be in 1..{max_n}")
    size = 1 << n
    if table is None:
        if rng is None:
            raise ConfigurationError("random table generation needs an rng")
        table = tuple(int(v) for v in rng.permutation(size))
    else:
        table = tuple(int(v) for v in table)
        if sorted(table) != list(range(size)):
            raise ConfigurationError("table is not a permutation of 0..2^n-1")
    inverse = [0] * size
    for x, y in enumerate(table):
        inverse[y] = x
    return TdpKeyPair(MockKey(n, table), MockTrapdoor(n, tuple(inverse)))


def _draw_prime(width: int, rng: np.random.Generator) -> int:
    # Odd candidate with the top bit set, then scan upward; deterministic
    # given the rng stream.
    candidate = (1 << (width - 1)) | random_bits(rng, width - 1) | 1
    while True:
        if sympy.isprime(candidate):
            return candidate
        candidate += 2
        if candidate.bit_length() > width:
            candidate = (1 << (width - 1)) | random_bits(rng, width - 1) | 1


def gen_modular_from_factors(p: int, q: int, exponent: int) -> TdpKeyPair:
    """Build the cycle-walking permutation from explicit prime factors."""
    if p == q or not (sympy.isprime(p) and sympy.isprime(q)):
        raise ConfigurationError("p and q must be distinct primes")
    modulus = p * q
    carmichael = math.lcm(p - 1, q - 1)
    if math.gcd(exponent, carmichael) != 1:
        raise ConfigurationError(
            f"exponent {exponent} shares a factor with lambda(N) = {carmichael}"
        )
    n = modulus.bit_length() - 1
    inv_exponent = pow(exponent, -1, carmichael)
    return TdpKeyPair(
        ModularKey(n, modulus, exponent),
        ModularTrapdoor(n, modulus, inv_exponent),
    )


def gen_modular(
    modulus_bits: int,
    rng: np.random.Generator,
    exponent: int = DEFAULT_PUBLIC_EXPONENT,
) -> TdpKeyPair:
    """Random two-prime modulus with exactly ``modulus_bits`` bits."""
    if modulus_bits < 8:
        raise ConfigurationError("modulus must have at least 8 bits")
    half = (modulus_bits + 1) // 2
    while True:
        p = _draw_prime(half, rng)
        q = _draw_prime(modulus_bits - half + 1, rng)
        if p == q:
            continue
        if (p * q).bit_length() != modulus_bits:
            continue
        if math.gcd(exponent, math.lcm(p - 1, q - 1)) != 1:
            continue
        return gen_modular_from_factors(p, q, exponent)


def _walk(value: int, exponent: int, modulus: int, bound: int) -> int:
    # Apply at least once, then keep walking until back inside the domain.
    value = pow(value, exponent, modulus)
    while value >= bound:
        value = pow(value, exponent, modulus)
    return value


def evaluate(key: Key, x: BitString) -> BitString:
    if x.n != key.n:
        raise ValueError(f"input length {x.n} does not match key domain {key.n}")
    if isinstance(key, MockKey):
        return BitString(key.table[x.value], key.n)
    if isinstance(key, ModularKey):
        return BitString(_walk(x.value, key.exponent, key.modulus, 1 << key.n), key.n)
    raise TypeError(f"unknown key type {type(key).__name__}")


def invert(trapdoor: Trapdoor, y: BitString) -> BitString:
    if y.n != trapdoor.n:
        raise ValueError(f"input length {y.n} does not match key domain {trapdoor.n}")
    if isinstance(trapdoor, MockTrapdoor):
        return BitString(trapdoor.inverse[y.value], trapdoor.n)
    if isinstance(trapdoor, ModularTrapdoor):
        return BitString(
            _walk(y.value, trapdoor.inv_exponent, trapdoor.modulus, 1 << trapdoor.n),
            trapdoor.n,
        )
    raise TypeError(f"unknown trapdoor type {type(trapdoor).__name__}")


def key_to_jsonable(key: Key) -> dict:
    if isinstance(key, MockKey):
        return {"variant": "mock", "n": key.n, "table": list(key.table)}
    if isinstance(key, ModularKey):
        return {
            "variant": "modular",
            "n": key.n,
            "modulus": str(key.modulus),
            "exponent": str(key.exponent),
        }
    raise TypeError(f"unknown key type {type(key).__name__}")


def key_from_jsonable(obj: dict) -> Key:
    try:
        variant = obj["variant"]
        if variant == "mock":
            key = MockKey(int(obj["n"]), tuple(int(v) for v in obj["table"]))
            if sorted(key.table) != list(range(1 << key.n)):
                raise ConfigurationError("table is not a permutation")
            return key
        if variant == "modular":
            return ModularKey(int(obj["n"]), int(obj["modulus"]), int(obj["exponent"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed key record: {exc}") from exc
    raise ConfigurationError(f"unknown key variant {variant!r}")


def trapdoor_to_jsonable(trapdoor: Trapdoor) -> dict:
    if isinstance(trapdoor, MockTrapdoor):
        return {"variant": "mock", "n": trapdoor.n, "inverse": list(trapdoor.inverse)}
    if isinstance(trapdoor, ModularTrapdoor):
        return {
            "variant": "modular",
            "n": trapdoor.n,
            "modulus": str(trapdoor.modulus),
            "inv_exponent": str(trapdoor.inv_exponent),
        }
    raise TypeError(f"unknown trapdoor type {type(trapdoor).__name__}")


def trapdoor_from_jsonable(obj: dict) -> Trapdoor:
    try:
        variant = obj["variant"]
        if variant == "mock":
            return MockTrapdoor(int(obj["n"]), tuple(int(v) for v in obj["inverse"]))
        if variant == "modular":
            return ModularTrapdoor(
                int(obj["n"]), int(obj["modulus"]), int(obj["inv_exponent"])
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed trapdoor record: {exc}") from exc
    raise ConfigurationError(f"unknown trapdoor variant {variant!r}")
