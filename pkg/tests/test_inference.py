"""Tests for the belief propagation engine."""

import pytest

from andornet.calculus import Constant, Predicate, Proposition, Variable
from andornet.errors import (
    ContradictionError,
    EvidenceConflictError,
    SchedulingError,
)
from andornet.factors import AnalyticFactors, LearnedFactors, NoisyOrParams, WeightVector
from andornet.graph import build_graph
from andornet.implication import KnowledgeBase
from andornet.inference import BeliefState
from andornet.oracle import exact_marginals
from andornet.universes import (
    chain_analytic_factors,
    chain_knowledge_base,
    chain_propositions,
    dating_analytic_factors,
    dating_knowledge_base,
    dating_propositions,
)

PROPS = dating_propositions()


@pytest.fixture(scope="module")
def dating_graph():
    return build_graph(dating_knowledge_base(), PROPS["date"])


def dating_state(graph):
    return BeliefState(graph, dating_analytic_factors())


def three_node_and_graph():
    """Two roots feeding one conjunction feeding one effect."""
    from andornet.implication import (
        ConjoinedImplicationLink,
        PredicateImplicationLink,
        RoleSetMapping,
    )

    kb = KnowledgeBase()
    t = Variable("t")
    conclusion = Predicate("c", {"r": t})
    kb.add_link(
        ConjoinedImplicationLink(
            [
                PredicateImplicationLink(
                    Predicate("a", {"r": t}), conclusion, RoleSetMapping({"r": "r"})
                ),
                PredicateImplicationLink(
                    Predicate("b", {"r": t}), conclusion, RoleSetMapping({"r": "r"})
                ),
            ]
        )
    )
    e = Constant("e1", "t")
    target = Proposition("c", {"r": e})
    graph = build_graph(kb, target)
    factors = AnalyticFactors(
        priors={
            Proposition("a", {"r": e}).key(): 0.3,
            Proposition("b", {"r": e}).key(): 0.6,
        }
    )
    return graph, factors, target


class TestPiValue:
    def test_and_node_multiplies_independent_parents(self, dating_graph):
        # Oracle for the conjunction: enumerate the four parent assignments
        # of the deterministic AND with message probabilities 0.72 and 0.4.
        state = dating_state(dating_graph)
        g_mutual = dating_graph.parents(PROPS["date"].key())[0]
        pi = state.pi_val[g_mutual]
        expected = sum(
            (1.0 if (b1 and b2) else 0.0)
            * (0.72 if b1 else 0.28)
            * (0.4 if b2 else 0.6)
            for b1 in (0, 1)
            for b2 in (0, 1)
        )
        assert pi[1] == pytest.approx(expected, abs=1e-12)
        assert pi[1] == pytest.approx(0.288, abs=1e-12)

    def test_root_uses_prior(self, dating_graph):
        state = dating_state(dating_graph)
        assert state.pi_val[PROPS["lonely"].key()][1] == pytest.approx(0.3)

    def test_certainty_propagates_through_or(self):
        graph, factors, target = three_node_and_graph()
        state = BeliefState(graph, factors)
        state.set_evidence(Proposition("a", {"r": Constant("e1", "t")}).key(), 1)
        state.set_evidence(Proposition("b", {"r": Constant("e1", "t")}).key(), 1)
        state.fan_out()
        assert state.marginal(target.key()) == pytest.approx(1.0)

    def test_missing_message_is_a_scheduling_error(self, dating_graph):
        state = dating_state(dating_graph)
        g_mutual = dating_graph.parents(PROPS["date"].key())[0]
        del state.pi_msg[(PROPS["like_bg"].key(), g_mutual)]
        with pytest.raises(SchedulingError):
            state.pi_value(g_mutual)


class TestLambdaValue:
    def test_leaf_is_vacuous(self, dating_graph):
        state = dating_state(dating_graph)
        state.fan_out()
        assert state.lam_val[PROPS["date"].key()] == (0.5, 0.5)

    def test_product_of_children_messages(self, dating_graph):
        state = dating_state(dating_graph)
        z = PROPS["like_bg"].key()
        state.lam_msg[(dating_graph.children(z)[0], z)] = (0.5, 1.0)
        value = state.lambda_value(z)
        assert value[1] / value[0] == pytest.approx(2.0)

    def test_observed_and_child_forces_parents(self):
        graph, factors, target = three_node_and_graph()
        # Oracle on the tiny universe: P(a=1 | c=1) = 1 under deterministic
        # conjunction of both causes.
        state = BeliefState(graph, factors)
        state.set_evidence(target.key(), 1)
        state.run(3)
        oracle = exact_marginals(graph, factors, {target.key(): 1})
        for z in graph.topo_order:
            assert state.marginal(z) == pytest.approx(oracle[z], abs=1e-9)
            assert state.marginal(z) == pytest.approx(1.0)


class TestMessages:
    def test_pi_message_of_single_child_parent_equals_pi(self, dating_graph):
        state = dating_state(dating_graph)
        like_gb = PROPS["like_gb"].key()
        (child,) = dating_graph.children(like_gb)
        msg = state.pi_msg[(like_gb, child)]
        assert msg[1] == pytest.approx(0.4)
        assert msg == tuple(state.pi_val[like_gb])

    def test_uniform_sibling_lambda_scales_nothing(self, dating_graph):
        state = dating_state(dating_graph)
        state.fan_out()
        lonely_g = dating_graph.children(PROPS["lonely"].key())[0]
        like_bg = PROPS["like_bg"].key()
        msg = state.pi_msg[(lonely_g, like_bg)]
        assert msg[1] == pytest.approx(state.pi_val[lonely_g][1])

    def test_unobserved_leaf_sends_vacuous_lambda(self):
        # The d-separation sanity case: an unobserved child tells its
        # parents nothing.
        graph, factors, target = three_node_and_graph()
        state = BeliefState(graph, factors)
        state.fan_out()
        for g in graph.parents(target.key()):
            msg = state.lam_msg[(target.key(), g)]
            assert msg[0] == pytest.approx(msg[1])

    def test_observed_and_child_zeroes_false_parent_value(self):
        graph, factors, target = three_node_and_graph()
        state = BeliefState(graph, factors)
        state.set_evidence(target.key(), 1)
        state.fan_out()
        (g,) = graph.parents(target.key())
        for a in graph.parents(g):
            msg = state.lam_msg[(g, a)]
            assert msg[0] == 0.0
            assert msg[1] > 0.0

    def test_backward_update_from_date(self, dating_graph):
        state = dating_state(dating_graph)
        state.set_evidence(PROPS["date"].key(), 1)
        state.run(5)
        oracle = exact_marginals(
            dating_graph, dating_analytic_factors(), {PROPS["date"].key(): 1}
        )
        lonely = PROPS["lonely"].key()
        assert oracle[lonely] == pytest.approx(0.3 / 0.72, abs=1e-12)
        assert state.marginal(lonely) == pytest.approx(oracle[lonely], abs=1e-9)


class TestMarginal:
    def test_vacuous_lambda_returns_pi(self, dating_graph):
        state = dating_state(dating_graph)
        assert state.marginal(PROPS["like_bg"].key()) == pytest.approx(0.72)

    def test_evidence_node_reports_exactly_one(self, dating_graph):
        state = dating_state(dating_graph)
        state.set_evidence(PROPS["like_gb"].key(), 1)
        state.fan_out()
        assert state.marginal(PROPS["like_gb"].key()) == 1.0
        assert state.marginal_pair(PROPS["like_gb"].key()) == (0.0, 1.0)

    def test_no_evidence_matches_enumeration(self, dating_graph):
        state = dating_state(dating_graph)
        oracle = exact_marginals(dating_graph, dating_analytic_factors())
        assert state.marginal(PROPS["date"].key()) == pytest.approx(
            oracle[PROPS["date"].key()], abs=1e-12
        )
        assert oracle[PROPS["date"].key()] == pytest.approx(0.288, abs=1e-12)

    def test_contradiction_raises_with_node_id(self):
        n = 3
        kb = chain_knowledge_base(n)
        chain = chain_propositions(n)
        graph = build_graph(kb, chain[-1])
        state = BeliefState(graph, chain_analytic_factors(n))
        state.set_evidence(chain[0].key(), 1)
        state.set_evidence(chain[-1].key(), 0)
        with pytest.raises(ContradictionError):
            state.run(3)


class TestEvidenceAndFanOut:
    def test_conflicting_evidence_rejected(self, dating_graph):
        state = dating_state(dating_graph)
        state.set_evidence(PROPS["date"].key(), 1)
        with pytest.raises(EvidenceConflictError):
            state.set_evidence(PROPS["date"].key(), 0)

    def test_unknown_evidence_node_rejected(self, dating_graph):
        state = dating_state(dating_graph)
        with pytest.raises(KeyError):
            state.set_evidence("mystery(subj=e1:t)", 1)

    def test_chain_forward_converges_in_one_fan_out(self):
        n = 10
        graph = build_graph(chain_knowledge_base(n), chain_propositions(n)[-1])
        state = BeliefState(graph, chain_analytic_factors(n))
        state.set_evidence(chain_propositions(n)[0].key(), 1)
        state.fan_out()
        assert min(state.marginals().values()) >= 0.99

    def test_chain_backward_converges_within_two_n(self):
        n = 10
        graph = build_graph(chain_knowledge_base(n), chain_propositions(n)[-1])
        state = BeliefState(graph, chain_analytic_factors(n))
        state.set_evidence(chain_propositions(n)[-1].key(), 1)
        converged_sizes = []
        for _ in range(2 * n):
            marginals = state.fan_out()
            converged_sizes.append(sum(1 for m in marginals.values() if m >= 0.99))
            if converged_sizes[-1] == len(graph.topo_order):
                break
        assert converged_sizes[-1] == len(graph.topo_order)
        assert len(converged_sizes) <= 2 * n
        assert converged_sizes == sorted(converged_sizes)

    def test_quiescence_without_evidence(self, dating_graph):
        state = dating_state(dating_graph)
        before = state.marginals()
        state.run(10)
        after = state.marginals()
        assert max(abs(after[z] - before[z]) for z in before) <= 1e-9


class TestRunAndTrace:
    def test_zero_rounds_trace_holds_priors_only(self, dating_graph):
        state = dating_state(dating_graph)
        trace = state.run(0)
        assert trace.iterations() == 0
        assert len(trace.rows) == len(dating_graph.topo_order)
        assert trace.at(0)[PROPS["like_bg"].key()] == pytest.approx(0.72)

    def test_trace_row_count(self, dating_graph):
        state = dating_state(dating_graph)
        k = 4
        trace = state.run(k)
        assert len(trace.rows) == (k + 1) * len(dating_graph.topo_order)

    def test_consistency_every_iteration(self, dating_graph):
        state = dating_state(dating_graph)
        state.set_evidence(PROPS["date"].key(), 1)
        for _ in range(5):
            state.fan_out()
            for z in dating_graph.topo_order:
                pair = state.marginal_pair(z)
                assert abs(pair[0] + pair[1] - 1.0) <= 1e-9

    def test_forward_only_independence(self, dating_graph):
        state = dating_state(dating_graph)
        untouched = [PROPS["like_bg"].key(), PROPS["lonely"].key(), PROPS["exciting"].key()]
        before = {z: state.marginal(z) for z in untouched}
        date_before = state.marginal(PROPS["date"].key())
        state.set_evidence(PROPS["like_gb"].key(), 1)
        state.run(5)
        assert abs(state.marginal(PROPS["date"].key()) - date_before) > 0.1
        for z in untouched:
            assert abs(state.marginal(z) - before[z]) <= 1e-9

    def test_convergence_helper_stops(self, dating_graph):
        state = dating_state(dating_graph)
        state.set_evidence(PROPS["date"].key(), 1)
        rounds = state.run_until_converged()
        assert rounds <= 5


class TestNoisyOrInGraph:
    def make(self):
        graph, _, target = three_node_and_graph()
        # Reinterpret the same shape with a leaky, partially activating OR
        # at the effect node (its single cause group keeps the AND).
        e = Constant("e1", "t")
        factors = AnalyticFactors(
            priors={
                Proposition("a", {"r": e}).key(): 0.3,
                Proposition("b", {"r": e}).key(): 0.6,
            },
            or_params={
                target.key(): NoisyOrParams(activation=(0.8,), leak=0.1)
            },
        )
        return graph, factors, target

    def test_fast_path_equals_enumeration(self):
        graph, factors, target = self.make()
        state = BeliefState(graph, factors)
        fast = state.marginal(target.key())
        # Disable the linear path and recompute through the 2^n sum.
        state.forward_params[target.key()] = None
        slow = state.pi_value(target.key())[1]
        assert fast == pytest.approx(slow, abs=1e-12)

    def test_matches_oracle_with_and_without_evidence(self):
        graph, factors, target = self.make()
        e = Constant("e1", "t")
        a_key = Proposition("a", {"r": e}).key()
        for evidence in ({}, {target.key(): 1}, {a_key: 1}):
            state = BeliefState(graph, factors)
            for z, v in evidence.items():
                state.set_evidence(z, v)
            state.run(5)
            oracle = exact_marginals(graph, factors, evidence)
            for z in graph.topo_order:
                assert state.marginal(z) == pytest.approx(oracle[z], abs=1e-9)


class TestTreeExactness:
    @pytest.mark.parametrize("value", [0, 1])
    def test_single_evidence_matches_oracle_everywhere(self, dating_graph, value):
        factors = dating_analytic_factors()
        for node in dating_graph.topo_order:
            state = BeliefState(dating_graph, factors)
            state.set_evidence(node, value)
            state.run(6)
            oracle = exact_marginals(dating_graph, factors, {node: value})
            for z in dating_graph.topo_order:
                assert state.marginal(z) == pytest.approx(oracle[z], abs=1e-6)

    def test_random_multi_evidence_matches_oracle(self, dating_graph):
        import random

        factors = dating_analytic_factors()
        rng = random.Random(0)
        nodes = list(dating_graph.topo_order)
        checked = 0
        for _ in range(60):
            chosen = rng.sample(nodes, rng.randint(2, 3))
            evidence = {z: rng.randint(0, 1) for z in chosen}
            try:
                oracle = exact_marginals(dating_graph, factors, evidence)
            except ContradictionError:
                # BP must agree that this evidence set is impossible.
                state = BeliefState(dating_graph, factors)
                with pytest.raises(ContradictionError):
                    for z, v in evidence.items():
                        state.set_evidence(z, v)
                    state.run(8)
                    for z in nodes:
                        state.marginal(z)
                continue
            state = BeliefState(dating_graph, factors)
            for z, v in evidence.items():
                state.set_evidence(z, v)
            state.run_until_converged(tolerance=1e-12, max_rounds=16)
            for z in nodes:
                assert state.marginal(z) == pytest.approx(oracle[z], abs=1e-6)
            checked += 1
        assert checked >= 30

    def test_learned_factors_match_oracle(self, dating_graph):
        # Arbitrary finite weights stand in for a trained model here.
        weights = WeightVector()
        from andornet.implication import Feature

        kb = dating_knowledge_base()
        for i, link in enumerate(kb.links()):
            for v in (0, 1):
                for g in (0, 1):
                    weights.add(Feature(v, link.link_id, g), 0.3 * (i + 1) * (2 * v - 1) * (g + 0.5))
        from andornet.implication import prior_link_id

        for name in ("lonely", "exciting", "like_gb"):
            weights.add(Feature(1, prior_link_id(PROPS[name]), 1), -0.4)
        factors = LearnedFactors(weights)
        state = BeliefState(dating_graph, factors)
        state.set_evidence(PROPS["date"].key(), 1)
        state.run(6)
        oracle = exact_marginals(dating_graph, factors, {PROPS["date"].key(): 1})
        for z in dating_graph.topo_order:
            assert state.marginal(z) == pytest.approx(oracle[z], abs=1e-9)
