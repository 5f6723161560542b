"""End-to-end experiment drivers: train if needed, infer, emit a trace CSV.

Each scenario reproduces one of the convergence plots: the dating universe
with no evidence or with one observation, and the copy chain observed at
either end.  Trained knowledge bases are cached next to the output traces.
"""

from __future__ import annotations

import os

from .factors import LearnedFactors
from .graph import build_graph
from .inference import BeliefState, Trace
from .persistence import load_kb, save_kb
from .training import TrainConfig, mean_nll, sgd_train
from .universes import (
    chain_knowledge_base,
    chain_propositions,
    dating_knowledge_base,
    dating_propositions,
    generate_chain_world,
    generate_dating_world,
)

CHAIN_N = 10
DEFAULT_SEED = 25


def generate_worlds(universe: str, count: int, seed: int, chain_n: int = CHAIN_N):
    if universe == "dating":
        return [generate_dating_world(seed + i) for i in range(count)]
    if universe == "chain":
        return [generate_chain_world(seed + i, chain_n) for i in range(count)]
    raise ValueError(f"unknown universe {universe!r}")


def universe_knowledge_base(universe: str, chain_n: int = CHAIN_N):
    if universe == "dating":
        return dating_knowledge_base()
    if universe == "chain":
        return chain_knowledge_base(chain_n)
    raise ValueError(f"unknown universe {universe!r}")


def train_universe(
    universe: str, config: TrainConfig, chain_n: int = CHAIN_N
):
    """Train one universe; returns (kb, weights, mean NLL over the data)."""
    kb = universe_knowledge_base(universe, chain_n)
    worlds = generate_worlds(universe, config.example_count, config.seed, chain_n)
    weights = sgd_train(kb, worlds, config)
    nll = mean_nll(kb, worlds, weights) if worlds else float("nan")
    return kb, weights, nll


def _ensure_kb(universe: str, outdir: str, seed: int, retrain: bool):
    path = os.path.join(outdir, f"{universe}.kb.json")
    if not retrain and os.path.exists(path):
        return load_kb(path)
    config = TrainConfig(seed=seed)
    kb, weights, _ = train_universe(universe, config)
    save_kb(path, kb, weights)
    return kb, weights


def _run(kb, weights, target, evidence, rounds) -> tuple[BeliefState, Trace]:
    props = [target] + [p for p, _ in evidence]
    graph = build_graph(kb, props)
    state = BeliefState(graph, LearnedFactors(weights))
    for p, value in evidence:
        state.set_evidence(p.key(), value)
    trace = state.run(rounds)
    return state, trace


SCENARIOS = (
    "prior",
    "jill-likes",
    "jack-likes",
    "they-date",
    "chain-prior",
    "chain-set-0",
    "chain-set-n",
)


def run_scenario(
    name: str, outdir: str, seed: int = DEFAULT_SEED, retrain: bool = False
) -> str:
    """Run one named scenario; returns the path of the CSV it wrote."""
    if name not in SCENARIOS:
        raise ValueError(f"unknown experiment {name!r}; choose from {SCENARIOS}")
    os.makedirs(outdir, exist_ok=True)
    if name.startswith("chain"):
        kb, weights = _ensure_kb("chain", outdir, seed, retrain)
        chain = chain_propositions(CHAIN_N)
        target = chain[-1]
        evidence = []
        if name == "chain-set-0":
            evidence = [(chain[0], 1)]
        elif name == "chain-set-n":
            evidence = [(chain[-1], 1)]
        rounds = 2 * CHAIN_N
    else:
        kb, weights = _ensure_kb("dating", outdir, seed, retrain)
        props = dating_propositions()
        target = props["date"]
        evidence = {
            "prior": [],
            "jill-likes": [(props["like_gb"], 1)],
            "jack-likes": [(props["like_bg"], 1)],
            "they-date": [(props["date"], 1)],
        }[name]
        rounds = 10
    _, trace = _run(kb, weights, target, evidence, rounds)
    path = os.path.join(outdir, f"{name}.csv")
    trace.write_csv(path)
    return path
