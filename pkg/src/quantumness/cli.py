"""Operator surface: key generation, protocol runs, benches, extraction demo.

Every command is deterministic given --seed. Secret trapdoor material goes
only to key files, never to stdout or stats JSON.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import glevin, net, poq, rsp, tdp
from .errors import ConfigurationError, ProtocolError
from .selfcheck import run_selftest

STATS_SCHEMA = "poq-stats/1"
DEFAULT_GAP = 0.04


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _env_timeout() -> float:
    raw = os.environ.get("POQ_TIMEOUT_MS")
    if raw is None:
        return net.DEFAULT_TIMEOUT
    return max(0.001, int(raw) / 1000.0)


def _parse_address(text: str | None) -> tuple[str, int]:
    if text is None:
        text = os.environ.get("POQ_ADDR")
    if not text:
        raise ConfigurationError("no address given and POQ_ADDR is unset")
    host, sep, port = text.rpartition(":")
    if not sep:
        raise ConfigurationError(f"address must be host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def _make_keypair(args, rng: np.random.Generator) -> tdp.TdpKeyPair:
    if args.variant == "mock":
        table = range(1 << args.n) if getattr(args, "table", "random") == "identity" else None
        return tdp.gen_mock(args.n, rng, table=table)
    return tdp.gen_modular(args.bits, rng)


def _load_keypair(args) -> tdp.TdpKeyPair | None:
    if not getattr(args, "key", None):
        return None
    with open(args.key) as fh:
        key = tdp.key_from_jsonable(json.load(fh))
    if not getattr(args, "td", None):
        raise ConfigurationError("--key without --td: the verifier needs the trapdoor")
    with open(args.td) as fh:
        trapdoor = tdp.trapdoor_from_jsonable(json.load(fh))
    return tdp.TdpKeyPair(key, trapdoor)


def cmd_keygen(args) -> int:
    rng = _rng(args.seed, 0)
    keypair = _make_keypair(args, rng)
    secret_path = args.out + ".td"
    with open(args.out, "w") as fh:
        json.dump(tdp.key_to_jsonable(keypair.key), fh)
        fh.write("\n")
    with open(secret_path, "w") as fh:
        json.dump(tdp.trapdoor_to_jsonable(keypair.trapdoor), fh)
        fh.write("\n")
    size = args.n if args.variant == "mock" else args.bits
    print(f"variant={keypair.key.__class__.__name__} size_param={size} n={keypair.key.n}")
    print(f"public key: {args.out}")
    print(f"trapdoor (secret): {secret_path}")
    return 0


def _build_prover_factory(args, keypair: tdp.TdpKeyPair | None, escrow: tdp.Trapdoor | None):
    if args.strategy == "quantum":
        if args.mode == "escrow":
            if escrow is None:
                raise ConfigurationError(
                    "quantum strategy in escrow mode needs the trapdoor (--td)"
                )
            print("[escrow] prover holds the trapdoor to sample its final state;", flush=True)
            print("[escrow] answer bits are drawn before any trapdoor use.", flush=True)
            return poq.prover_factory("quantum", mode="shortcut", escrow_trapdoor=escrow)
        if keypair is not None and keypair.key.n > 20:
            raise ConfigurationError("enumerate mode is limited to n <= 20")
        return poq.prover_factory("quantum", mode="enumerate")
    return poq.prover_factory(args.strategy)


def _print_stats(stats: poq.BenchStats, as_json: bool, extra: dict | None = None) -> None:
    payload = stats.to_jsonable()
    payload["schema"] = STATS_SCHEMA
    if extra:
        payload.update(extra)
    if not as_json:
        print(stats.table())
    print(json.dumps(payload, sort_keys=True))


def _run_local(args, keypair: tdp.TdpKeyPair) -> int:
    if args.protocol == "rsp":
        mode = "shortcut" if args.mode == "escrow" else "enumerate"
        failures = 0
        for v_seed, _ in poq.session_seed_pairs(args.seed, args.trials):
            outcome, transcript = rsp.rsp_joint_session(
                keypair, np.random.default_rng(v_seed), mode
            )
            if not rsp.verify_outcome(keypair.key, transcript, outcome):
                failures += 1
        print(
            json.dumps(
                {
                    "schema": STATS_SCHEMA,
                    "protocol": "rsp",
                    "trials": args.trials,
                    "correct": args.trials - failures,
                    "seed": args.seed,
                },
                sort_keys=True,
            )
        )
        return 0 if failures == 0 else 1
    escrow = keypair.trapdoor if args.mode == "escrow" else None
    factory = _build_prover_factory(args, keypair, escrow)
    stats = poq.BenchStats(strategy=args.strategy, trials=args.trials, seed=args.seed)
    for index, (v_seed, p_seed) in enumerate(poq.session_seed_pairs(args.seed, args.trials)):
        prover = factory(np.random.default_rng(p_seed))
        try:
            verdict, transcript = poq.verifier_session(
                keypair, net.DirectChannel(prover), np.random.default_rng(v_seed)
            )
        except ProtocolError as exc:
            stats.voids += 1
            if args.verbose:
                print(f"session {index}: void ({exc})")
            continue
        if args.verbose:
            print(f"session {index}: {'accept' if verdict else 'reject'}")
        if transcript.v1 == 0:
            stats.v0.add(verdict)
        elif transcript.payload.v2 == 0:
            stats.v10.add(verdict)
        else:
            stats.v11.add(verdict)
    _print_stats(stats, args.json)
    return 0


def _run_verifier(args, keypair: tdp.TdpKeyPair, channel: net.Channel) -> int:
    seeds = poq.session_seed_pairs(args.seed, args.trials)
    if args.protocol == "rsp":
        for v_seed, _ in seeds:
            rsp.alice_session(keypair, channel, np.random.default_rng(v_seed))
        print(json.dumps({"schema": STATS_SCHEMA, "protocol": "rsp", "trials": args.trials}))
        return 0
    stats = poq.BenchStats(strategy="remote", trials=args.trials, seed=args.seed)
    for index, (v_seed, _) in enumerate(seeds):
        try:
            verdict, transcript = poq.verifier_session(
                keypair, channel, np.random.default_rng(v_seed)
            )
        except ProtocolError as exc:
            stats.voids += 1
            if args.verbose:
                print(f"session {index}: void ({exc})")
            continue
        if args.verbose:
            print(f"session {index}: {'accept' if verdict else 'reject'}")
        if transcript.v1 == 0:
            stats.v0.add(verdict)
        elif transcript.payload.v2 == 0:
            stats.v10.add(verdict)
        else:
            stats.v11.add(verdict)
    _print_stats(stats, args.json)
    return 0


def _run_prover(args, channel: net.Channel) -> int:
    escrow = None
    if args.td:
        with open(args.td) as fh:
            escrow = tdp.trapdoor_from_jsonable(json.load(fh))
    factory = _build_prover_factory(args, None, escrow)
    for _, p_seed in poq.session_seed_pairs(args.seed, args.trials):
        responder = factory(np.random.default_rng(p_seed))
        if args.protocol == "rsp" and isinstance(responder, poq.QuantumProver):
            net.serve_one(channel, responder._bob)
        else:
            net.serve_one(channel, responder)
    return 0


def cmd_run(args) -> int:
    if args.listen and args.connect:
        raise ConfigurationError("--listen and --connect are mutually exclusive")
    networked = bool(args.listen or args.connect)
    if args.role in ("verifier", "prover") and not networked:
        raise ConfigurationError(f"role {args.role} needs --listen or --connect")
    if args.role == "local" and networked:
        raise ConfigurationError("local role does not take an address")

    keypair = None
    if args.role in ("local", "verifier"):
        keypair = _load_keypair(args)
        if keypair is None:
            keypair = _make_keypair(args, _rng(args.seed, 1))

    if args.role == "local":
        return _run_local(args, keypair)

    timeout = _env_timeout()
    if args.listen:
        listener = net.socket_listen(_parse_address(args.listen), timeout)
        print(f"listening on {listener.address[0]}:{listener.address[1]}", flush=True)
        channel = listener.accept()
        listener.close()
    else:
        channel = net.socket_connect(_parse_address(args.connect), timeout)
    try:
        if args.role == "verifier":
            return _run_verifier(args, keypair, channel)
        return _run_prover(args, channel)
    finally:
        channel.close()


def cmd_bench(args) -> int:
    keypair = _make_keypair(args, _rng(args.seed, 1))
    escrow = keypair.trapdoor if args.mode == "escrow" else None
    results = {}
    for strategy in args.strategies.split(","):
        strategy = strategy.strip()
        if strategy == "quantum":
            mode = "shortcut" if args.mode == "escrow" else "enumerate"
            factory = poq.prover_factory("quantum", mode=mode, escrow_trapdoor=escrow)
        else:
            factory = poq.prover_factory(strategy)
        stats = poq.bench(factory, keypair, args.trials, args.seed, strategy)
        results[strategy] = stats
        print(f"--- {strategy}")
        print(stats.table())
    payload = {
        "schema": STATS_SCHEMA,
        "trials": args.trials,
        "seed": args.seed,
        "n": keypair.key.n,
        "strategies": {name: s.to_jsonable() for name, s in results.items()},
    }
    gap = None
    if "quantum" in results and "classical-optimal" in results:
        gap = results["quantum"].overall - results["classical-optimal"].overall
        payload["gap"] = gap
        print(f"gap (quantum - classical-optimal) = {gap:.6f}")
    print(json.dumps(payload, sort_keys=True))
    if gap is not None and gap < args.gap_threshold:
        return 1
    return 0


def cmd_gl_demo(args) -> int:
    if args.n < 1:
        raise ConfigurationError("domain length must be positive")
    rng = _rng(args.seed, 2)
    keypair = tdp.gen_mock(args.n, rng)
    if args.prover == "leaky":
        factory = lambda prng: glevin.LeakyProver(prng, keypair.trapdoor)
    else:
        factory = lambda prng: poq.OptimalClassicalProver(prng)
    result = glevin.extraction_attack(factory, keypair, rng)
    true_pair = " ".join(str(x) for x in sorted(result.alice_pair, key=lambda b: b.value))
    if result.recovered_pair is None:
        recovered = "(none)"
    else:
        recovered = " ".join(str(x) for x in result.recovered_pair)
    print(f"prover:    {args.prover}")
    print(f"true pair:      {true_pair}")
    print(f"recovered pair: {recovered}")
    print(f"success: {result.success}")
    return 0


def cmd_selftest(args) -> int:
    ok = run_selftest(seed=args.seed, scale=args.scale)
    print("selftest:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantumness",
        description="Remote state preparation and proofs of quantumness "
        "from trapdoor permutations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_key_args(p, demo_defaults=True):
        p.add_argument("--variant", choices=("mock", "modular"), default="modular")
        p.add_argument("--n", type=int, default=8, help="mock domain bits")
        p.add_argument(
            "--bits", type=int, default=33, help="modular modulus bits (n = bits - 1)"
        )

    keygen = sub.add_parser("keygen", help="generate a key pair into files")
    add_key_args(keygen)
    keygen.add_argument("--table", choices=("random", "identity"), default="random")
    keygen.add_argument("--out", required=True, help="public key path; trapdoor at <out>.td")
    keygen.add_argument("--seed", type=int, default=1)
    keygen.set_defaults(func=cmd_keygen)

    run = sub.add_parser("run", help="run protocol sessions in a role")
    run.add_argument("--role", choices=("local", "verifier", "prover"), default="local")
    run.add_argument("--protocol", choices=("rsp", "poq"), default="poq")
    run.add_argument("--strategy", choices=poq.STRATEGIES, default="quantum")
    run.add_argument("--mode", choices=("escrow", "enumerate"), default="escrow")
    run.add_argument("--listen", metavar="HOST:PORT")
    run.add_argument("--connect", metavar="HOST:PORT")
    run.add_argument("--key", help="public key file")
    run.add_argument("--td", help="trapdoor file (verifier; quantum escrow prover)")
    add_key_args(run)
    run.add_argument("--trials", type=int, default=100)
    run.add_argument("--seed", type=int, default=1)
    run.add_argument("--verbose", action="store_true")
    run.add_argument("--json", action="store_true", help="suppress the text table")
    run.set_defaults(func=cmd_run)

    bench_cmd = sub.add_parser("bench", help="benchmark strategies and report the gap")
    add_key_args(bench_cmd)
    bench_cmd.add_argument("--mode", choices=("escrow", "enumerate"), default="escrow")
    bench_cmd.add_argument("--trials", type=int, default=20000)
    bench_cmd.add_argument("--seed", type=int, default=1)
    bench_cmd.add_argument(
        "--strategies", default="quantum,classical-optimal", help="comma separated"
    )
    bench_cmd.add_argument("--gap-threshold", type=float, default=DEFAULT_GAP)
    bench_cmd.set_defaults(func=cmd_bench)

    demo = sub.add_parser("gl-demo", help="extraction attack demo")
    demo.add_argument("--n", type=int, default=16)
    group = demo.add_mutually_exclusive_group()
    group.add_argument(
        "--leaky", dest="prover", action="store_const", const="leaky", default="leaky"
    )
    group.add_argument("--optimal", dest="prover", action="store_const", const="optimal")
    demo.add_argument("--seed", type=int, default=1)
    demo.set_defaults(func=cmd_gl_demo)

    selftest = sub.add_parser("selftest", help="reduced property suite")
    selftest.add_argument("--seed", type=int, default=1)
    selftest.add_argument("--scale", type=float, default=1.0)
    selftest.set_defaults(func=cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        return _fail(str(exc))
    except ProtocolError as exc:
        return _fail(f"session failed: {exc}")
    except OSError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
