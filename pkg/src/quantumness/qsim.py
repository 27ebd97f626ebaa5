"""Exact simulation of the states the honest prover ever holds.

Every state in the protocol is either an equal-weight superposition of two
computational-basis strings with a +/-1 relative phase, or a single qubit
with real amplitudes. Measurements are therefore sampled from closed-form
conditional distributions instead of a generic statevector:

* measuring the two-term state in the computational basis is a fair coin
  over the two support strings;
* after attaching ``r . x`` as a leading qubit and measuring the string
  register in the Hadamard basis, the outcome d is uniform over the
  hyperplane ``d . (x0 ^ x1) = 0`` when ``r . x0 == r . x1`` (and the qubit
  collapses to ``|r.x0>``), or uniform over all strings otherwise (and the
  qubit becomes ``(|0> + sign |1>)/sqrt(2)`` with ``sign = (-1)^{d.(x0^x1)}``);
* the final qubit is measured in one of two pi/8-rotated bases.

``CoherentEnumeration`` tracks the full support set explicitly and is the
independent oracle validating those shortcuts at small n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bits import BitString, inner_product, random_bits
from .errors import ConfigurationError

__all__ = [
    "COS_PI_8",
    "SIN_PI_8",
    "ROTATED_OVERLAP",
    "CoherentEnumeration",
    "EnumeratedState",
    "QubitState",
    "TwoTermState",
    "brute_force_session",
    "collapse_for_outcome",
    "hadamard_collapse",
    "measure_computational",
    "measure_rotated",
    "rotated_basis",
]

COS_PI_8 = math.cos(math.pi / 8)
SIN_PI_8 = math.sin(math.pi / 8)
# Squared overlap between a rotated basis vector and the matching BB84
# state; closed form (2 + sqrt(2)) / 4.
ROTATED_OVERLAP = (2 + math.sqrt(2)) / 4

_SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True, slots=True)
class TwoTermState:
    """``(|x0> + phase |x1>)/sqrt(2)`` with x0 lexicographically first.

    Canonical ordering plus the discarded global phase make equality
    decidable in tests.
    """

    x0: BitString
    x1: BitString
    phase: int = 1

    def __post_init__(self) -> None:
        if self.x0.n != self.x1.n:
            raise ValueError("support strings must have equal length")
        if self.x0.value >= self.x1.value:
            raise ValueError("x0 must precede x1; use from_support to canonicalize")
        if self.phase not in (1, -1):
            raise ValueError("phase must be +1 or -1")

    @classmethod
    def from_support(cls, a: BitString, b: BitString, phase: int = 1) -> "TwoTermState":
        # Swapping the terms multiplies the state by the (discarded) global
        # phase, so the relative phase is unchanged.
        if a.value > b.value:
            a, b = b, a
        return cls(a, b, phase)

    @property
    def n(self) -> int:
        return self.x0.n

    @property
    def difference(self) -> BitString:
        return self.x0 ^ self.x1

    @property
    def support(self) -> frozenset[BitString]:
        return frozenset((self.x0, self.x1))


@dataclass(frozen=True, slots=True)
class QubitState:
    """Single qubit with real amplitudes (all protocol states are real)."""

    amp0: float
    amp1: float

    def __post_init__(self) -> None:
        norm = self.amp0 * self.amp0 + self.amp1 * self.amp1
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state is not normalized: |amp|^2 = {norm}")


QUBIT_ZERO = QubitState(1.0, 0.0)
QUBIT_ONE = QubitState(0.0, 1.0)
QUBIT_PLUS = QubitState(_SQRT_HALF, _SQRT_HALF)
QUBIT_MINUS = QubitState(_SQRT_HALF, -_SQRT_HALF)


@dataclass(frozen=True)
class EnumeratedState:
    """Uniform superposition over an explicit support set."""

    support: tuple[tuple[BitString, float], ...]
    n: int

    def __post_init__(self) -> None:
        values = [entry[0].value for entry in self.support]
        if len(set(values)) != len(values):
            raise ValueError("support entries must be distinct")
        norm = sum(amp * amp for _, amp in self.support)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state is not normalized: |amp|^2 = {norm}")

    def to_jsonable(self) -> dict:
        return {
            "n": self.n,
            "support": [[entry.text, amp] for entry, amp in self.support],
        }


def measure_computational(state: TwoTermState, rng: np.random.Generator) -> BitString:
    """Born rule on equal amplitudes: x0 or x1, each with probability 1/2."""
    return state.x1 if rng.integers(2) else state.x0


def rotated_basis(v2: int) -> tuple[tuple[float, float], tuple[float, float]]:
    """Measurement basis for the final challenge; outcome 0 is the first vector."""
    if v2 == 0:
        return (COS_PI_8, SIN_PI_8), (SIN_PI_8, -COS_PI_8)
    if v2 == 1:
        return (COS_PI_8, -SIN_PI_8), (SIN_PI_8, COS_PI_8)
    raise ValueError("v2 must be a bit")


def measure_rotated(qubit: QubitState, v2: int, rng: np.random.Generator) -> int:
    (b00, b01), _ = rotated_basis(v2)
    p0 = (qubit.amp0 * b00 + qubit.amp1 * b01) ** 2
    return 0 if rng.random() < p0 else 1


def collapse_for_outcome(state: TwoTermState, r: BitString, d: BitString) -> QubitState:
    """Post-measurement qubit given that the register measurement returned d.

    Deterministic companion to :func:`hadamard_collapse`; raises if d has
    zero amplitude for this state.
    """
    if r.n != state.n or d.n != state.n:
        raise ValueError("r and d must match the state length")
    delta = state.x0.value ^ state.x1.value
    sign = state.phase * (1 - 2 * ((d.value & delta).bit_count() & 1))
    b0 = inner_product(r, state.x0)
    b1 = inner_product(r, state.x1)
    if b0 == b1:
        if sign < 0:
            raise ValueError("outcome d has zero amplitude for this state")
        return QUBIT_ONE if b0 else QUBIT_ZERO
    # |b0> + sign |1-b0>, rewritten over {|0>,|1>} and normalized with
    # amp0 >= 0 (a global sign is unobservable).
    return QubitState(_SQRT_HALF, sign * _SQRT_HALF)


def hadamard_collapse(
    state: TwoTermState, r: BitString, rng: np.random.Generator
) -> tuple[BitString, QubitState]:
    """Attach the ``r . x`` qubit, Hadamard-measure the string register.

    Samples d directly from its conditional distribution rather than
    materializing 2^n amplitudes; ``brute_force_session`` plus the tests'
    amplitude oracle validate the shortcut.
    """
    if r.n != state.n:
        raise ValueError("r must match the state length")
    n = state.n
    delta = state.x0.value ^ state.x1.value
    if inner_product(r, state.x0) == inner_product(r, state.x1):
        d_value = random_bits(rng, n)
        want = 0 if state.phase > 0 else 1
        if ((d_value & delta).bit_count() & 1) != want:
            # XOR with one fixed vector of odd overlap maps the wrong coset
            # onto the right one bijectively, keeping d uniform there.
            d_value ^= delta & -delta
        d = BitString(d_value, n)
    else:
        d = BitString(random_bits(rng, n), n)
    return d, collapse_for_outcome(state, r, d)


def _parity_words(values: np.ndarray) -> np.ndarray:
    out = values.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        out ^= out >> shift
    return (out & 1).astype(np.uint8)


class CoherentEnumeration:
    """Explicit-support simulation of the hashing rounds.

    Keeps the surviving set X_j as an index array; each answer bit is
    sampled with its Born probability |X_j^{(c)}| / |X_{j-1}|. Only viable
    at table scale, which is the point: it is the oracle for the fast path.
    """

    def __init__(self, images, n: int, max_n: int = 20):
        if not 1 <= n <= max_n:
            raise ConfigurationError(f"enumeration domain must be in 1..{max_n} bits")
        table = np.asarray(list(images), dtype=np.uint64)
        if table.shape != (1 << n,):
            raise ConfigurationError("image table size must be 2^n")
        self.n = n
        self._images = table
        self._live = np.arange(1 << n, dtype=np.uint64)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self._live)

    def step(self, h: BitString, rng: np.random.Generator, forced: int | None = None) -> int:
        """Measure ``h . f(x)`` over the current support, collapse, return c."""
        if h.n != self.n:
            raise ValueError("query length mismatch")
        parities = _parity_words(self._images[self._live] & np.uint64(h.value))
        ones = int(parities.sum())
        if forced is None:
            c = 1 if rng.random() < ones / len(self._live) else 0
        else:
            c = forced
            matching = ones if c == 1 else len(self._live) - ones
            if matching == 0:
                raise ValueError("forced answer selects an empty branch")
        self._live = self._live[parities == c]
        return c

    def snapshot(self) -> EnumeratedState:
        amp = 1.0 / math.sqrt(len(self._live))
        return EnumeratedState(
            tuple((BitString(int(v), self.n), amp) for v in self._live), self.n
        )

    def final_two(self) -> TwoTermState:
        if len(self._live) != 2:
            raise ValueError(f"support has {len(self._live)} elements, expected 2")
        a, b = (BitString(int(v), self.n) for v in self._live)
        return TwoTermState.from_support(a, b)


@dataclass(frozen=True)
class BruteForceRun:
    answers: tuple[int, ...]
    trajectory: tuple[EnumeratedState, ...]
    final_state: TwoTermState


def brute_force_session(
    images,
    n: int,
    queries,
    rng: np.random.Generator,
    forced_answers=None,
    record: bool = True,
) -> BruteForceRun:
    """Run all hashing rounds against an explicit permutation table.

    ``images`` lists f(x) for x = 0..2^n-1. ``forced_answers`` pins the
    measurement outcomes (for deterministic cross-checks); otherwise each
    c_j is sampled by the Born rule.
    """
    sim = CoherentEnumeration(images, n)
    trajectory = [sim.snapshot()] if record else []
    answers = []
    for j, h in enumerate(queries):
        c = sim.step(h, rng, None if forced_answers is None else forced_answers[j])
        answers.append(c)
        if record:
            trajectory.append(sim.snapshot())
    return BruteForceRun(tuple(answers), tuple(trajectory), sim.final_two())
