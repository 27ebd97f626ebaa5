"""Remote state preparation: interactive hashing run coherently.

Alice generates a trapdoor permutation key, sends it, then drives n-1
hashing rounds. Each answer bit halves the surviving preimage set, so an
honest prover ends holding ``|x0> + |x1>`` while Alice, using the trapdoor,
learns both strings. Alice never aborts: any well-formed transcript yields
a pair (malformed prover messages void the session instead, so statistics
stay clean).

Honest-prover simulation comes in two modes with identical message and
output distributions:

* ``enumerate`` tracks the full support set (table scale only);
* ``shortcut`` answers each round with a fair coin and derives the final
  state from an escrowed trapdoor. The coin is exact because every query
  is linearly independent of its predecessors. The escrowed trapdoor is
  used strictly after all answers are emitted, so it cannot influence the
  transcript; this models a prover who owns a quantum computer, not a
  weakening of the protocol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tdp
from .bits import (
    BitString,
    HashQuerySet,
    SolutionPair,
    inner_product,
    random_bitstring,
    solve_two_solutions,
)
from .errors import ConfigurationError, ProtocolError
from .net import (
    Channel,
    DirectChannel,
    HashAnswerMessage,
    HashQueryMessage,
    KeyMessage,
    serve_one,
)
from .qsim import CoherentEnumeration, TwoTermState

__all__ = [
    "BindingOutcome",
    "EchoAdversary",
    "HonestBob",
    "OneBranchGuessAdversary",
    "RspOutcome",
    "RspTranscript",
    "TrapdoorAdversary",
    "alice_pair_from_transcript",
    "alice_session",
    "binding_game",
    "bob_honest_session",
    "rsp_joint_session",
    "verify_outcome",
]


@dataclass(frozen=True)
class RspTranscript:
    """Everything both parties saw: key, queries, and answer bits."""

    key: tdp.Key
    queries: HashQuerySet
    answers: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.queries.n != self.key.n:
            raise ValueError("query length does not match key domain")
        if len(self.answers) != len(self.queries):
            raise ValueError("answer count does not match query count")
        if any(c not in (0, 1) for c in self.answers):
            raise ValueError("answers must be bits")

    def solutions(self) -> SolutionPair:
        return solve_two_solutions(self.queries, self.answers)

    def to_jsonable(self) -> dict:
        return {
            "key": tdp.key_to_jsonable(self.key),
            "queries": [h.text for h in self.queries],
            "answers": list(self.answers),
        }

    @classmethod
    def from_jsonable(cls, obj: dict) -> "RspTranscript":
        key = tdp.key_from_jsonable(obj["key"])
        queries = HashQuerySet(
            tuple(BitString.from_text(text) for text in obj["queries"]), key.n
        )
        return cls(key, queries, tuple(int(c) for c in obj["answers"]))


@dataclass(frozen=True)
class RspOutcome:
    """Alice's pair (indexed by solution order) and, when simulated jointly,
    the prover's final state."""

    alice_pair: tuple[BitString, BitString]
    bob_state: TwoTermState | None = None

    @property
    def pair_set(self) -> frozenset[BitString]:
        return frozenset(self.alice_pair)


def alice_pair_from_transcript(
    trapdoor: tdp.Trapdoor, transcript: RspTranscript
) -> tuple[BitString, BitString]:
    """Alice's output as a pure function of the transcript (replayable)."""
    pair = transcript.solutions()
    return tdp.invert(trapdoor, pair.y0), tdp.invert(trapdoor, pair.y1)


def alice_session(
    keypair: tdp.TdpKeyPair, channel: Channel, rng: np.random.Generator
) -> tuple[tuple[BitString, BitString], RspTranscript]:
    """Drive one preparation session from Alice's side.

    Queries are sampled up front and sent one per round; the distributions
    are identical either way. Returns the preimage pair and the transcript.
    """
    key = keypair.key
    channel.send(KeyMessage(key))
    queries = HashQuerySet.sample(key.n, rng)
    answers = []
    for j, h in enumerate(queries, start=1):
        channel.send(HashQueryMessage(j, h))
        reply = channel.recv()
        if not isinstance(reply, HashAnswerMessage) or reply.j != j:
            raise ProtocolError(f"round {j}: expected a matching answer, got {reply!r}")
        if reply.c not in (0, 1):
            raise ProtocolError(f"round {j}: answer is not a bit")
        answers.append(reply.c)
    transcript = RspTranscript(key, queries, tuple(answers))
    return alice_pair_from_transcript(keypair.trapdoor, transcript), transcript


class HonestBob:
    """Honest prover side of the hashing rounds (reactive responder)."""

    def __init__(
        self,
        rng: np.random.Generator,
        mode: str = "shortcut",
        escrow_trapdoor: tdp.Trapdoor | None = None,
        max_enumerate_n: int = 20,
    ):
        if mode not in ("shortcut", "enumerate"):
            raise ConfigurationError(f"unknown prover mode {mode!r}")
        if mode == "shortcut" and escrow_trapdoor is None:
            raise ConfigurationError("shortcut mode requires the escrowed trapdoor")
        self.rng = rng
        self.mode = mode
        self.escrow_trapdoor = escrow_trapdoor
        self.max_enumerate_n = max_enumerate_n
        self.key: tdp.Key | None = None
        self.queries: list[BitString] = []
        self.answers: list[int] = []
        self._enum: CoherentEnumeration | None = None
        self.done = False

    def respond(self, msg):
        if isinstance(msg, KeyMessage):
            if self.key is not None:
                raise ProtocolError("key already received")
            self.key = msg.key
            if self.mode == "enumerate":
                self._enum = CoherentEnumeration(
                    self._image_table(msg.key), msg.key.n, self.max_enumerate_n
                )
            if msg.key.n == 1:
                self.done = True  # zero rounds for a one-bit domain
            return None
        if isinstance(msg, HashQueryMessage):
            if self.key is None:
                raise ProtocolError("hash query before key")
            expected = len(self.answers) + 1
            if msg.j != expected or expected > self.key.n - 1:
                raise ProtocolError(f"unexpected round index {msg.j}")
            if msg.h.n != self.key.n:
                raise ProtocolError("query length mismatch")
            if self.mode == "shortcut":
                c = int(self.rng.integers(2))
            else:
                c = self._enum.step(msg.h, self.rng)
            self.queries.append(msg.h)
            self.answers.append(c)
            if len(self.answers) == self.key.n - 1:
                self.done = True
            return HashAnswerMessage(msg.j, c)
        raise ProtocolError(f"unexpected message {type(msg).__name__} during preparation")

    def _image_table(self, key: tdp.Key):
        if isinstance(key, tdp.MockKey):
            return key.table
        if key.n > self.max_enumerate_n:
            raise ConfigurationError(
                f"enumerate mode is limited to n <= {self.max_enumerate_n}"
            )
        return [
            tdp.evaluate(key, BitString(x, key.n)).value for x in range(1 << key.n)
        ]

    def transcript(self) -> RspTranscript:
        if not self.done:
            raise ProtocolError("session still in progress")
        return RspTranscript(
            self.key, HashQuerySet(tuple(self.queries), self.key.n), tuple(self.answers)
        )

    def final_state(self) -> TwoTermState:
        """The two-term superposition held after the last round."""
        if not self.done:
            raise ProtocolError("session still in progress")
        if self.mode == "enumerate":
            return self._enum.final_two()
        pair = self.transcript().solutions()
        # Trapdoor use starts only here, after every answer bit is fixed.
        x0 = tdp.invert(self.escrow_trapdoor, pair.y0)
        x1 = tdp.invert(self.escrow_trapdoor, pair.y1)
        return TwoTermState.from_support(x0, x1)


def bob_honest_session(
    channel: Channel,
    rng: np.random.Generator,
    mode: str = "shortcut",
    escrow_trapdoor: tdp.Trapdoor | None = None,
    max_enumerate_n: int = 20,
) -> TwoTermState:
    """Serve one honest preparation session and return the final state."""
    bob = HonestBob(rng, mode, escrow_trapdoor, max_enumerate_n)
    serve_one(channel, bob)
    return bob.final_state()


def rsp_joint_session(
    keypair: tdp.TdpKeyPair, rng: np.random.Generator, mode: str = "shortcut"
) -> tuple[RspOutcome, RspTranscript]:
    """Run Alice and an honest prover locally in one thread."""
    alice_rng, bob_rng = rng.spawn(2)
    bob = HonestBob(
        bob_rng,
        mode,
        escrow_trapdoor=keypair.trapdoor if mode == "shortcut" else None,
    )
    pair, transcript = alice_session(keypair, DirectChannel(bob), alice_rng)
    return RspOutcome(pair, bob.final_state()), transcript


def verify_outcome(key: tdp.Key, transcript: RspTranscript, outcome: RspOutcome) -> bool:
    """Check the correctness contract: images hit the two solutions and the
    prover's support matches Alice's pair."""
    solutions = transcript.solutions()
    x0, x1 = outcome.alice_pair
    if tdp.evaluate(key, x0) != solutions.y0 or tdp.evaluate(key, x1) != solutions.y1:
        return False
    if outcome.bob_state is not None and outcome.bob_state.support != outcome.pair_set:
        return False
    return True


@dataclass(frozen=True)
class BindingOutcome:
    accepted: bool
    protocol_error: bool = False


def binding_game(
    keypair: tdp.TdpKeyPair, adversary, rng: np.random.Generator
) -> BindingOutcome:
    """One run of the two-solution binding game.

    The adversary answers the hashing rounds, then claims a pair (alpha,
    beta). It wins if the images of its claims are exactly the two
    transcript solutions, hit distinctly. Malformed messages lose with a
    distinguishable flag rather than polluting the loss count.
    """
    key = keypair.key
    adversary.respond(KeyMessage(key))
    queries = HashQuerySet.sample(key.n, rng)
    answers = []
    for j, h in enumerate(queries, start=1):
        try:
            reply = adversary.respond(HashQueryMessage(j, h))
        except ProtocolError:
            return BindingOutcome(False, protocol_error=True)
        if not isinstance(reply, HashAnswerMessage) or reply.j != j or reply.c not in (0, 1):
            return BindingOutcome(False, protocol_error=True)
        answers.append(reply.c)
    try:
        alpha, beta = adversary.claim()
    except ProtocolError:
        return BindingOutcome(False, protocol_error=True)
    if not (isinstance(alpha, BitString) and isinstance(beta, BitString)):
        return BindingOutcome(False, protocol_error=True)
    if alpha.n != key.n or beta.n != key.n:
        return BindingOutcome(False, protocol_error=True)
    solutions = solve_two_solutions(queries, tuple(answers))
    image_a = tdp.evaluate(key, alpha)
    image_b = tdp.evaluate(key, beta)
    won = (image_a == solutions.y0 and image_b == solutions.y1) or (
        image_a == solutions.y1 and image_b == solutions.y0
    )
    return BindingOutcome(won)


class TrapdoorAdversary:
    """Sanity adversary holding the trapdoor; wins every game."""

    def __init__(self, rng: np.random.Generator, trapdoor: tdp.Trapdoor):
        self.rng = rng
        self.trapdoor = trapdoor
        self.key = None
        self.queries: list[BitString] = []
        self.answers: list[int] = []

    def respond(self, msg):
        if isinstance(msg, KeyMessage):
            self.key = msg.key
            return None
        if isinstance(msg, HashQueryMessage):
            c = int(self.rng.integers(2))
            self.queries.append(msg.h)
            self.answers.append(c)
            return HashAnswerMessage(msg.j, c)
        raise ProtocolError(f"unexpected message {type(msg).__name__}")

    def claim(self) -> tuple[BitString, BitString]:
        solutions = solve_two_solutions(
            HashQuerySet(tuple(self.queries), self.key.n), tuple(self.answers)
        )
        return (
            tdp.invert(self.trapdoor, solutions.y0),
            tdp.invert(self.trapdoor, solutions.y1),
        )


class OneBranchGuessAdversary:
    """Honest about one committed preimage, blind uniform guess for the other."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.key = None
        self.x: BitString | None = None
        self.image: BitString | None = None

    def respond(self, msg):
        if isinstance(msg, KeyMessage):
            self.key = msg.key
            self.x = random_bitstring(msg.key.n, self.rng)
            self.image = tdp.evaluate(msg.key, self.x)
            return None
        if isinstance(msg, HashQueryMessage):
            return HashAnswerMessage(msg.j, inner_product(msg.h, self.image))
        raise ProtocolError(f"unexpected message {type(msg).__name__}")

    def claim(self) -> tuple[BitString, BitString]:
        return self.x, random_bitstring(self.key.n, self.rng)


class EchoAdversary(OneBranchGuessAdversary):
    """Claims the same string twice; can never win since y0 != y1."""

    def claim(self) -> tuple[BitString, BitString]:
        return self.x, self.x
