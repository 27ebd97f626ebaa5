"""Remote state preparation and proofs of quantumness from trapdoor permutations.

The protocol stack, bottom up: GF(2) bit vectors and the two-solution
hashing solver (`bits`), full-domain trapdoor permutations (`tdp`), exact
simulation of the honest prover's states (`qsim`), the wire protocol and
channels (`net`), the preparation protocol (`rsp`), the verification game
with honest and cheating provers (`poq`), and the rewinding extraction
attack (`glevin`). The `quantumness` CLI exposes key generation, protocol
runs in either role, benchmarking, and the extraction demo.
"""

from .bits import BitString, HashQuerySet, SolutionPair, inner_product, solve_two_solutions
from .errors import ConfigurationError, DecodeError, ProtocolError, SessionVoid
from .glevin import ExtractionResult, LeakyProver, extraction_attack, gl_extract
from .poq import (
    CLASSICAL_CEILING,
    HONEST_QUANTUM_RATE,
    STRATEGIES,
    BenchStats,
    OptimalClassicalProver,
    QuantumProver,
    accept_predicate,
    bench,
    prover_factory,
    verifier_session,
)
from .qsim import QubitState, TwoTermState
from .rsp import RspOutcome, RspTranscript, alice_session, binding_game, bob_honest_session
from .tdp import TdpKeyPair, evaluate, gen_mock, gen_modular, gen_modular_from_factors, invert

__version__ = "0.1.0"

__all__ = [
    "BenchStats",
    "BitString",
    "CLASSICAL_CEILING",
    "ConfigurationError",
    "DecodeError",
    "ExtractionResult",
    "HONEST_QUANTUM_RATE",
    "HashQuerySet",
    "LeakyProver",
    "OptimalClassicalProver",
    "ProtocolError",
    "QuantumProver",
    "QubitState",
    "RspOutcome",
    "RspTranscript",
    "STRATEGIES",
    "SessionVoid",
    "SolutionPair",
    "TdpKeyPair",
    "TwoTermState",
    "accept_predicate",
    "alice_session",
    "bench",
    "binding_game",
    "bob_honest_session",
    "evaluate",
    "extraction_attack",
    "gen_mock",
    "gen_modular",
    "gen_modular_from_factors",
    "gl_extract",
    "inner_product",
    "invert",
    "prover_factory",
    "solve_two_solutions",
    "verifier_session",
]
