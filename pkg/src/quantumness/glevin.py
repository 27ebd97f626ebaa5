"""Extraction machinery: rewinding probe, list decoding, composed attack.

A classical prover's post-preparation state is a plain value, so it can be
copied and driven down both second-challenge continuations with the same
first-round reply. Whenever both continuations would pass verification,
the XOR of their two answer bits equals ``r . (x0 ^ x1)`` identically; a
prover that wins too often therefore hands out a noisy linear predictor
for the difference string, and Goldreich-Levin list decoding turns that
predictor into the difference itself. Combining the decoded difference
with one preimage from a v1=0 run reproduces the verifier's full pair,
which is exactly what preparation blindness forbids.

Decoder parameters are the implementer's: with per-vote advantage eps and
failure budget delta, votes come from all nonzero subset-XORs of
m = ceil(log2(n / (2 delta eps^2) + 1)) seed queries (pairwise independent,
so Chebyshev plus a union bound covers all n positions), and candidates
must clear agreement 1/2 + eps/2 on ceil(16 / eps^2) fresh queries. The
subset majority vote for every guess at once is one Walsh-Hadamard
transform of the query signs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tdp
from .bits import BitString, HashQuerySet, inner_product, random_bitstring, random_bits, solve_two_solutions
from .errors import ConfigurationError, ProtocolError
from .net import (
    BasisMessage,
    Challenge1Message,
    Challenge2Message,
    DirectChannel,
    EquationMessage,
    HashAnswerMessage,
    HashQueryMessage,
    KeyMessage,
    PreimageMessage,
    VerdictMessage,
)
from .rsp import alice_session

__all__ = [
    "ConstantPredictor",
    "ExactLinearPredictor",
    "ExtractionResult",
    "LeakyProver",
    "NoisyLinearPredictor",
    "ProbeRecord",
    "double_run_probe",
    "extraction_attack",
    "gl_extract",
    "probe_record",
]


class ExactLinearPredictor:
    """Returns ``r . s`` exactly; the noiseless decoding case."""

    def __init__(self, secret: BitString):
        self.secret = secret

    def __call__(self, r: BitString) -> int:
        return inner_product(r, self.secret)


class NoisyLinearPredictor:
    """Agrees with ``r . s`` on a fixed fraction of queries (iid noise)."""

    def __init__(self, secret: BitString, agreement: float, rng: np.random.Generator):
        if not 0.0 <= agreement <= 1.0:
            raise ConfigurationError("agreement must be a probability")
        self.secret = secret
        self.agreement = agreement
        self.rng = rng

    def __call__(self, r: BitString) -> int:
        bit = inner_product(r, self.secret)
        if self.rng.random() >= self.agreement:
            bit ^= 1
        return bit


class ConstantPredictor:
    def __init__(self, bit: int):
        self.bit = bit

    def __call__(self, r: BitString) -> int:
        return self.bit


@dataclass(frozen=True)
class ProbeRecord:
    """One rewinding probe: shared d, both continuations, their XOR."""

    r: BitString
    d: BitString | None
    eta0: int | None
    eta1: int | None
    output: int
    malformed: bool


def probe_record(snapshot, r: BitString, rng: np.random.Generator) -> ProbeRecord:
    """Replay the prover's measurement rounds twice from one frozen state.

    Runs the v1=1 round once (fixing d), then feeds v2=0 and v2=1 to two
    copies of the advanced state. Malformed prover output degrades to a
    uniform output bit so the predictor interface stays total.
    """
    work = snapshot.clone()
    try:
        first = work.respond(Challenge1Message(1, r))
    except ProtocolError:
        first = None
    if not isinstance(first, EquationMessage):
        return ProbeRecord(r, None, None, None, int(rng.integers(2)), True)

    def continuation(v2: int) -> int | None:
        branch = work.clone()
        try:
            reply = branch.respond(Challenge2Message(v2))
        except ProtocolError:
            return None
        if isinstance(reply, BasisMessage) and reply.eta in (0, 1):
            return reply.eta
        return None

    eta0 = continuation(0)
    eta1 = continuation(1)
    if eta0 is None or eta1 is None:
        return ProbeRecord(r, first.d, eta0, eta1, int(rng.integers(2)), True)
    return ProbeRecord(r, first.d, eta0, eta1, eta0 ^ eta1, False)


def double_run_probe(snapshot, r: BitString, rng: np.random.Generator) -> int:
    return probe_record(snapshot, r, rng).output


def _walsh_hadamard(mat: np.ndarray) -> np.ndarray:
    """Transform each row: out[., b] = sum_u mat[., u] * (-1)^(b.u)."""
    out = mat.astype(np.int32, copy=True)
    size = out.shape[-1]
    half = 1
    while half < size:
        view = out.reshape(out.shape[0], size // (2 * half), 2, half)
        top = view[:, :, 0, :] + view[:, :, 1, :]
        bottom = view[:, :, 0, :] - view[:, :, 1, :]
        view[:, :, 0, :] = top
        view[:, :, 1, :] = bottom
        half *= 2
    return out


def gl_extract(
    predictor,
    n: int,
    advantage: float,
    confidence: float,
    rng: np.random.Generator,
) -> list[BitString]:
    """List-decode a linear function from a noisy predictor.

    Returns every candidate whose fresh-query agreement clears
    ``1/2 + advantage/2``, best first. A predictor truly agreeing with
    ``r . s`` on a ``1/2 + advantage`` fraction yields s with probability
    at least ``1 - confidence``.
    """
    if n < 1:
        raise ConfigurationError("domain length must be positive")
    if not 0.0 < advantage <= 0.5:
        raise ConfigurationError("advantage must be in (0, 1/2]")
    if not 0.0 < confidence < 1.0:
        raise ConfigurationError("confidence must be in (0, 1)")
    m = max(3, math.ceil(math.log2(n / (2 * confidence * advantage**2) + 1)))
    if m > 24:
        raise ConfigurationError("query budget out of range; relax advantage or confidence")
    size = 1 << m
    votes = size - 1

    seeds = [random_bits(rng, n) for _ in range(m)]
    # combo[u] = XOR of the seeds picked by the bits of u; build by peeling
    # one set bit at a time.
    combo = [0] * size
    for u in range(1, size):
        low = u & -u
        combo[u] = combo[u ^ low] ^ seeds[low.bit_length() - 1]

    signs = np.zeros((n, size), dtype=np.int32)
    for idx in range(n):
        unit = 1 << (n - 1 - idx)
        row = signs[idx]
        for u in range(1, size):
            bit = predictor(BitString(unit ^ combo[u], n))
            if bit not in (0, 1):
                raise ValueError("predictor must return a bit")
            row[u] = 1 - 2 * bit

    spectra = _walsh_hadamard(signs)
    # For the correct inner-product guess, every |spectrum| concentrates
    # near 2*advantage*votes; noise guesses fluctuate at sqrt(votes) scale.
    strength = np.abs(spectra).mean(axis=0)
    candidates = set()
    for b in np.nonzero(strength >= advantage * votes)[0]:
        column = spectra[:, b]
        value = 0
        for idx in range(n):
            if column[idx] < 0:
                value |= 1 << (n - 1 - idx)
        candidates.add(value)

    checks = math.ceil(16 / advantage**2)
    threshold = 0.5 + advantage / 2
    scored = []
    for value in candidates:
        hits = 0
        for _ in range(checks):
            query = random_bits(rng, n)
            hits += predictor(BitString(query, n)) == ((query & value).bit_count() & 1)
        score = hits / checks
        if score >= threshold:
            scored.append((score, value))
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [BitString(value, n) for _, value in scored]


class LeakyProver:
    """Trapdoor-holding classical prover that passes every check.

    Stands in for a hypothetical strategy beating the classical ceiling, so
    the composed attack has a worthwhile target. Randomness is drawn as a
    tape at key receipt; afterwards the prover is a pure function of its
    state, hence cheap to snapshot.
    """

    def __init__(self, rng: np.random.Generator, trapdoor: tdp.Trapdoor):
        self.rng = rng
        self.trapdoor = trapdoor
        self.key: tdp.Key | None = None
        self.queries: list[BitString] = []
        self.answers: list[int] = []
        self.pair: tuple[BitString, BitString] | None = None
        self.r: BitString | None = None
        self.d: BitString | None = None
        self.verdict: bool | None = None
        self.done = False

    def clone(self):
        twin = LeakyProver.__new__(LeakyProver)
        twin.__dict__.update(self.__dict__)
        twin.queries = list(self.queries)
        twin.answers = list(self.answers)
        return twin

    def _resolve_pair(self) -> tuple[BitString, BitString]:
        if self.pair is None:
            solutions = solve_two_solutions(
                HashQuerySet(tuple(self.queries), self.key.n), tuple(self.answers)
            )
            self.pair = (
                tdp.invert(self.trapdoor, solutions.y0),
                tdp.invert(self.trapdoor, solutions.y1),
            )
        return self.pair

    def respond(self, msg):
        if isinstance(msg, KeyMessage):
            self.key = msg.key
            self.answer_tape = tuple(
                int(b) for b in self.rng.integers(2, size=max(msg.key.n - 1, 1))
            )
            self.pick = int(self.rng.integers(2))
            self.d = random_bitstring(msg.key.n, self.rng)
            return None
        if self.key is None:
            raise ProtocolError("message before key")
        if isinstance(msg, HashQueryMessage):
            c = self.answer_tape[len(self.answers)]
            self.queries.append(msg.h)
            self.answers.append(c)
            if len(self.answers) == self.key.n - 1:
                self._resolve_pair()  # cache before any snapshot is taken
            return HashAnswerMessage(msg.j, c)
        if isinstance(msg, Challenge1Message):
            self.r = msg.r
            if msg.v1 == 0:
                return PreimageMessage(self._resolve_pair()[self.pick])
            return EquationMessage(self.d)
        if isinstance(msg, Challenge2Message):
            x0, x1 = self._resolve_pair()
            b0 = inner_product(self.r, x0)
            if b0 == inner_product(self.r, x1):
                return BasisMessage(b0)
            return BasisMessage(msg.v2 ^ inner_product(self.d, x0 ^ x1))
        if isinstance(msg, VerdictMessage):
            self.verdict = msg.accept
            self.done = True
            return None
        raise ProtocolError(f"unexpected message {type(msg).__name__}")


@dataclass(frozen=True)
class ExtractionResult:
    """Outcome of one composed attack, with the true pair kept for scoring.

    The true pair is bookkeeping only; nothing the attack outputs depends
    on it.
    """

    difference: BitString | None
    recovered_pair: tuple[BitString, BitString] | None
    alice_pair: tuple[BitString, BitString]
    candidates: tuple[BitString, ...]

    @property
    def success(self) -> bool:
        return (
            self.recovered_pair is not None
            and frozenset(self.recovered_pair) == frozenset(self.alice_pair)
        )


def extraction_attack(
    build_prover,
    keypair: tdp.TdpKeyPair,
    rng: np.random.Generator,
    *,
    advantage: float = 0.4,
    confidence: float = 0.05,
) -> ExtractionResult:
    """Recover the verifier's pair from a replayable classical prover.

    Steps: run the preparation phase recording the prover's state, take one
    preimage from a fresh v1=0 branch, list-decode the difference string
    from the rewinding probe, and output ``{x', x' ^ z}``. Zero-difference
    candidates are discarded since the pair strings always differ. The
    default advantage hint suits demo provers; callers attacking a specific
    prover should pass their own.
    """
    attack_rng, prover_rng = rng.spawn(2)
    prover = build_prover(prover_rng)
    alice_pair, _transcript = alice_session(keypair, DirectChannel(prover), attack_rng)
    snapshot = prover.clone()
    n = keypair.key.n

    fresh_r = random_bitstring(n, attack_rng)
    try:
        reply = prover.clone().respond(Challenge1Message(0, fresh_r))
    except ProtocolError:
        reply = None
    x_prime = reply.x if isinstance(reply, PreimageMessage) and reply.x.n == n else None

    def predictor(r: BitString) -> int:
        return double_run_probe(snapshot, r, attack_rng)

    candidates = gl_extract(predictor, n, advantage, confidence, attack_rng)
    difference = next((c for c in candidates if c.value != 0), None)

    recovered = None
    if difference is not None and x_prime is not None:
        partner = x_prime ^ difference
        recovered = tuple(sorted((x_prime, partner), key=lambda b: b.value))
    return ExtractionResult(
        difference=difference,
        recovered_pair=recovered,
        alice_pair=alice_pair,
        candidates=tuple(candidates),
    )
