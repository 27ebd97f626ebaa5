"""Reduced property suite behind the `selftest` CLI command.

Each check is a scaled-down version of a test-suite property, sized to
keep the whole run under a minute at scale 1.0. A check either returns
quietly or raises AssertionError with a short diagnosis.
"""

from __future__ import annotations

import math

import numpy as np

from . import glevin, net, poq, rsp, tdp
from .bits import BitString, HashQuerySet, random_bitstring, solve_two_solutions
from .qsim import (
    QUBIT_MINUS,
    QUBIT_ONE,
    QUBIT_PLUS,
    QUBIT_ZERO,
    ROTATED_OVERLAP,
    measure_rotated,
)

__all__ = ["run_selftest"]


def _scaled(count: int, scale: float) -> int:
    return max(1, int(count * scale))


def _binary_uniformity_pvalue(ones: int, total: int) -> float:
    # Two-cell chi-square against a fair coin; survival via erfc for df=1.
    expected = total / 2
    stat = (ones - expected) ** 2 / expected + ((total - ones) - expected) ** 2 / expected
    return math.erfc(math.sqrt(stat / 2))


def _check_solver(rng: np.random.Generator, scale: float) -> None:
    for n in range(1, 9):
        for _ in range(_scaled(40, scale)):
            queries = HashQuerySet.sample(n, rng)
            answers = tuple(int(b) for b in rng.integers(2, size=n - 1))
            pair = solve_two_solutions(queries, answers)
            brute = [
                y
                for y in range(1 << n)
                if all(
                    ((h.value & y).bit_count() & 1) == c
                    for h, c in zip(queries, answers)
                )
            ]
            assert brute == [pair.y0.value, pair.y1.value], f"solver mismatch at n={n}"


def _check_tdp(rng: np.random.Generator, scale: float) -> None:
    for n in range(1, 9):
        keypair = tdp.gen_mock(n, rng)
        for x in range(1 << n):
            bit = BitString(x, n)
            assert tdp.invert(keypair.trapdoor, tdp.evaluate(keypair.key, bit)) == bit
    small = tdp.gen_modular_from_factors(3, 7, 5)
    images = {tdp.evaluate(small.key, BitString(x, 4)).value for x in range(16)}
    assert images == set(range(16)), "N=21 restriction is not a bijection"
    big = tdp.gen_modular(64, rng)
    assert big.key.n == 63
    for _ in range(_scaled(500, scale)):
        x = random_bitstring(big.key.n, rng)
        assert tdp.invert(big.trapdoor, tdp.evaluate(big.key, x)) == x


def _check_rotated_measurement(rng: np.random.Generator, scale: float) -> None:
    draws = _scaled(20000, scale)
    cases = [
        (QUBIT_ZERO, 0, ROTATED_OVERLAP),
        (QUBIT_ONE, 0, 1 - ROTATED_OVERLAP),
        (QUBIT_PLUS, 0, ROTATED_OVERLAP),
        (QUBIT_MINUS, 1, 1 - ROTATED_OVERLAP),
    ]
    for qubit, v2, expected in cases:
        zeros = sum(measure_rotated(qubit, v2, rng) == 0 for _ in range(draws))
        rate = zeros / draws
        margin = 4 * math.sqrt(0.25 / draws) + 0.005
        assert abs(rate - expected) < margin, f"rotated rate {rate} vs {expected}"


def _check_rsp(rng: np.random.Generator, scale: float) -> None:
    sessions = _scaled(150, scale)
    keypairs = [tdp.gen_mock(8, rng), tdp.gen_modular(33, rng)]
    for keypair in keypairs:
        modes = ("shortcut", "enumerate") if keypair.key.n <= 20 else ("shortcut",)
        for mode in modes:
            ones = 0
            total = 0
            for _ in range(sessions):
                outcome, transcript = rsp.rsp_joint_session(keypair, rng, mode)
                assert rsp.verify_outcome(keypair.key, transcript, outcome)
                ones += sum(transcript.answers)
                total += len(transcript.answers)
            if total:
                assert _binary_uniformity_pvalue(ones, total) > 1e-4, (
                    f"answer bits look biased in {mode} mode"
                )


def _check_poq_rates(rng: np.random.Generator, scale: float) -> None:
    trials = _scaled(4000, scale)
    keypair = tdp.gen_modular(33, rng)
    quantum = poq.bench(
        poq.prover_factory("quantum", escrow_trapdoor=keypair.trapdoor),
        keypair,
        trials,
        seed=int(rng.integers(2**32)),
        strategy="quantum",
    )
    classical = poq.bench(
        poq.prover_factory("classical-optimal"),
        keypair,
        trials,
        seed=int(rng.integers(2**32)),
        strategy="classical-optimal",
    )
    margin = 5 * math.sqrt(0.25 / trials) + 0.005
    assert quantum.v0.accepts == quantum.v0.trials, "honest v1=0 branch not perfect"
    assert abs(quantum.overall - poq.HONEST_QUANTUM_RATE) < margin, quantum.overall
    assert abs(classical.overall - poq.CLASSICAL_CEILING) < margin, classical.overall
    assert quantum.overall - classical.overall > 0.02, "quantum/classical gap missing"


def _check_codec(rng: np.random.Generator, scale: float) -> None:
    golden = net.encode(net.HashAnswerMessage(1, 1))
    assert golden == b"\x00\x00\x00\x16" + b'{"c":1,"j":1,"t":"ha"}', golden
    for _ in range(_scaled(200, scale)):
        n = int(rng.integers(1, 24))
        msg = net.Challenge1Message(int(rng.integers(2)), random_bitstring(n, rng))
        assert net.decode(net.encode(msg)) == msg


def _check_transports(rng: np.random.Generator, scale: float) -> None:
    import threading

    keypair = tdp.gen_mock(6, rng)
    seed = int(rng.integers(2**32))
    trials = _scaled(8, scale)

    def run_direct() -> list[tuple[str, bytes]]:
        records: list[tuple[str, bytes]] = []
        for v_seed, p_seed in poq.session_seed_pairs(seed, trials):
            prover = poq.QuantumProver(
                np.random.default_rng(p_seed), escrow_trapdoor=keypair.trapdoor
            )
            channel = net.RecordingChannel(net.DirectChannel(prover))
            poq.verifier_session(keypair, channel, np.random.default_rng(v_seed))
            records.extend(channel.records)
        return records

    def run_in_process() -> list[tuple[str, bytes]]:
        a, b = net.in_process(timeout=20.0)
        pairs = poq.session_seed_pairs(seed, trials)

        def prover_loop() -> None:
            for _, p_seed in pairs:
                responder = poq.QuantumProver(
                    np.random.default_rng(p_seed), escrow_trapdoor=keypair.trapdoor
                )
                net.serve_one(b, responder)

        worker = threading.Thread(target=prover_loop)
        worker.start()
        channel = net.RecordingChannel(a)
        for v_seed, _ in pairs:
            poq.verifier_session(keypair, channel, np.random.default_rng(v_seed))
        worker.join()
        return channel.records

    assert run_direct() == run_in_process(), "transports disagree on transcripts"


def _check_extraction(rng: np.random.Generator, scale: float) -> None:
    secret = random_bitstring(8, rng)
    found = glevin.gl_extract(
        glevin.ExactLinearPredictor(secret), 8, 0.5, 0.05, rng
    )
    assert secret in found, "noiseless decoding missed the secret"
    keypair = tdp.gen_mock(10, rng)
    result = glevin.extraction_attack(
        lambda prng: glevin.LeakyProver(prng, keypair.trapdoor), keypair, rng
    )
    assert result.success, "extraction failed against the leaky prover"
    hardened = glevin.extraction_attack(
        lambda prng: poq.OptimalClassicalProver(prng), keypair, rng
    )
    assert not hardened.success, "extraction should not beat the optimal prover"


def _check_binding(rng: np.random.Generator, scale: float) -> None:
    keypair = tdp.gen_mock(8, rng)
    for _ in range(_scaled(40, scale)):
        outcome = rsp.binding_game(keypair, rsp.TrapdoorAdversary(rng, keypair.trapdoor), rng)
        assert outcome.accepted
        echo = rsp.binding_game(keypair, rsp.EchoAdversary(rng), rng)
        assert not echo.accepted and not echo.protocol_error
    games = _scaled(2000, scale)
    wins = sum(
        rsp.binding_game(keypair, rsp.OneBranchGuessAdversary(rng), rng).accepted
        for _ in range(games)
    )
    assert wins / games < 0.05, "guessing adversary wins far too often"


CHECKS = (
    ("solver vs brute force", _check_solver),
    ("trapdoor permutation round trips", _check_tdp),
    ("rotated-basis Born statistics", _check_rotated_measurement),
    ("preparation correctness and answer uniformity", _check_rsp),
    ("acceptance rates and gap", _check_poq_rates),
    ("frame codec golden and round trip", _check_codec),
    ("transport transcript equivalence", _check_transports),
    ("extraction attack", _check_extraction),
    ("binding game sanity", _check_binding),
)


def run_selftest(seed: int = 1, scale: float = 1.0, log=print) -> bool:
    """Run every check; report one line each; True when all pass."""
    all_ok = True
    for index, (name, check) in enumerate(CHECKS):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
        try:
            check(rng, scale)
        except AssertionError as exc:
            all_ok = False
            log(f"FAIL  {name}: {exc}")
        else:
            log(f"ok    {name}")
    return all_ok
