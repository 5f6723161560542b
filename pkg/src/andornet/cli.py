"""Command-line interface.

Subcommands: train, infer, oracle, experiment, inspect, store-roundtrip.
Flag defaults can come from a JSON or TOML config file (--config); explicit
flags win.  The store endpoint is taken from --store or the ANDORNET_STORE
environment variable (a file path, or redis://host:port).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import csv

from .calculus import as_proposition, parse_key
from .errors import EngineError, EvidenceConflictError
from .experiments import (
    SCENARIOS,
    run_scenario,
    train_universe,
)
from .factors import LearnedFactors
from .graph import build_graph
from .inference import BeliefState
from .oracle import exact_marginals
from .persistence import (
    load_kb,
    save_kb,
    store_from_url,
    verify_store_roundtrip,
)
from .training import TrainConfig, dump_worlds
from .experiments import generate_worlds

STORE_ENV = "ANDORNET_STORE"


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    if path.endswith(".toml"):
        try:
            import tomllib  # Python 3.11+
        except ImportError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _setting(args, config, name, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.get(name, default)


def _parse_evidence(entries):
    evidence = {}
    for entry in entries or []:
        key, sep, value = entry.rpartition("=")
        if not sep or value not in ("0", "1"):
            raise ValueError(f"evidence must look like key=0 or key=1, got {entry!r}")
        if key in evidence and evidence[key] != int(value):
            raise EvidenceConflictError(
                f"conflicting evidence for {key}: {evidence[key]} and {value}"
            )
        evidence[key] = int(value)
    return evidence


def _build_for_query(kb, target_key, evidence):
    target = as_proposition(parse_key(target_key))
    extras = [as_proposition(parse_key(k)) for k in evidence]
    return build_graph(kb, [target] + extras), target.key()


def cmd_train(args, config) -> int:
    train_config = TrainConfig(
        learning_rate=_setting(args, config, "rate", 0.1),
        example_count=_setting(args, config, "examples", 4096),
        seed=_setting(args, config, "seed", 0),
        epochs=_setting(args, config, "epochs", 1),
        averaged=bool(_setting(args, config, "averaged", False)),
    )
    kb, weights, nll = train_universe(args.universe, train_config, args.chain_n)
    save_kb(args.out, kb, weights)
    if args.dump_worlds:
        worlds = generate_worlds(
            args.universe, train_config.example_count, train_config.seed, args.chain_n
        )
        dump_worlds(worlds, args.dump_worlds)
    print(f"wrote {args.out}")
    print(f"final mean NLL: {nll:.6f}")
    return 0


def cmd_infer(args, config) -> int:
    kb, weights = load_kb(args.kb)
    evidence = _parse_evidence(args.evidence)
    graph, target_key = _build_for_query(kb, args.target, evidence)
    state = BeliefState(graph, LearnedFactors(weights))
    for key, value in evidence.items():
        state.set_evidence(key, value)
    rounds = _setting(args, config, "iterations", 10)
    trace = state.run(rounds)
    if args.trace:
        trace.write_csv(args.trace)
    print(f"P({target_key}=1) = {state.marginal(target_key):.9f}")
    for node_id in graph.topo_order:
        if node_id == target_key:
            continue
        print(f"P({node_id}=1) = {state.marginal(node_id):.9f}")
    return 0


def cmd_oracle(args, config) -> int:
    kb, weights = load_kb(args.kb)
    evidence = _parse_evidence(args.evidence)
    graph, target_key = _build_for_query(kb, args.target, evidence)
    marginals = exact_marginals(graph, LearnedFactors(weights), evidence)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for node_id in graph.topo_order:
                writer.writerow([0, node_id, f"{marginals[node_id]:.9f}"])
    print(f"P({target_key}=1) = {marginals[target_key]:.9f}")
    for node_id in graph.topo_order:
        if node_id != target_key:
            print(f"P({node_id}=1) = {marginals[node_id]:.9f}")
    return 0


def cmd_experiment(args, config) -> int:
    seed = _setting(args, config, "seed", 25)
    path = run_scenario(args.name, args.outdir, seed=seed, retrain=args.retrain)
    print(f"wrote {path}")
    return 0


def cmd_inspect(args, config) -> int:
    kb, _ = load_kb(args.kb)
    evidence = _parse_evidence(args.evidence)
    graph, _ = _build_for_query(kb, args.target, evidence)
    dump = json.dumps(graph.to_json_dict(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(dump + "\n")
        store_url = args.store or os.environ.get(STORE_ENV)
        if store_url:
            store_from_url(store_url).put(f"graph:{args.target}", dump)
    else:
        print(dump)
    return 0


def cmd_store_roundtrip(args, config) -> int:
    store_url = args.store or os.environ.get(STORE_ENV)
    if not store_url:
        print(f"no store configured; set --store or {STORE_ENV}", file=sys.stderr)
        return 1
    kb, weights = load_kb(args.kb)
    store = store_from_url(store_url)
    if verify_store_roundtrip(store, kb, weights):
        print("store roundtrip: OK")
        return 0
    print("store roundtrip: MISMATCH", file=sys.stderr)
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="andornet",
        description="Train, query and inspect bipartite and/or belief networks.",
    )
    parser.add_argument("--config", help="JSON or TOML file with flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit OR-factor weights on synthetic worlds")
    p_train.add_argument("universe", choices=["dating", "chain"])
    p_train.add_argument("--examples", type=int, default=None)
    p_train.add_argument("--rate", type=float, default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--epochs", type=int, default=None)
    p_train.add_argument("--averaged", action="store_const", const=True, default=None)
    p_train.add_argument("--chain-n", type=int, default=10, dest="chain_n")
    p_train.add_argument("--out", required=True, help="knowledge base file to write")
    p_train.add_argument("--dump-worlds", dest="dump_worlds", default=None)
    p_train.set_defaults(func=cmd_train)

    p_infer = sub.add_parser("infer", help="belief propagation for a target")
    p_infer.add_argument("--kb", required=True)
    p_infer.add_argument("--target", required=True, help="canonical proposition key")
    p_infer.add_argument(
        "--evidence", action="append", default=[], help="key=0|1, repeatable"
    )
    p_infer.add_argument("--iterations", type=int, default=None)
    p_infer.add_argument("--trace", help="CSV path for the per-iteration trace")
    p_infer.set_defaults(func=cmd_infer)

    p_oracle = sub.add_parser("oracle", help="exact marginals by enumeration")
    p_oracle.add_argument("--kb", required=True)
    p_oracle.add_argument("--target", required=True)
    p_oracle.add_argument("--evidence", action="append", default=[])
    p_oracle.add_argument("--trace", help="CSV path (iteration fixed at 0)")
    p_oracle.set_defaults(func=cmd_oracle)

    p_exp = sub.add_parser("experiment", help="run a named end-to-end scenario")
    p_exp.add_argument("name", choices=list(SCENARIOS))
    p_exp.add_argument("--outdir", default=".")
    p_exp.add_argument("--seed", type=int, default=None)
    p_exp.add_argument("--retrain", action="store_true")
    p_exp.set_defaults(func=cmd_experiment)

    p_inspect = sub.add_parser("inspect", help="dump the built graph as JSON")
    p_inspect.add_argument("--kb", required=True)
    p_inspect.add_argument("--target", required=True)
    p_inspect.add_argument("--evidence", action="append", default=[])
    p_inspect.add_argument("--out")
    p_inspect.add_argument("--store")
    p_inspect.set_defaults(func=cmd_inspect)

    p_store = sub.add_parser(
        "store-roundtrip", help="verify a knowledge base survives the store"
    )
    p_store.add_argument("--kb", required=True)
    p_store.add_argument("--store")
    p_store.set_defaults(func=cmd_store_roundtrip)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args, config)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
