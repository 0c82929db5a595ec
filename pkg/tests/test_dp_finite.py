"""Tests for the reachable-belief DP on finite sources."""

from __future__ import annotations

import numpy as np
import pytest

from remest.belief import FinitePMF, Prescription
from remest.errors import GuardError, NodeBudgetError
from remest.models import (
    DistortionMatrix,
    FiniteMarkovSource,
    FiniteProblem,
    GilbertElliottChannel,
    SymbolTag,
)
from remest.solvers import (
    BeliefNode,
    Stage,
    backup_post,
    backup_pre,
    enumerate_reachable,
    solve_finite,
)
from tests.conftest import ALWAYS_ON, CALIBRATION_P, CALIBRATION_Q, _calibration_problem


def _independent_node_count(p: np.ndarray, q: np.ndarray, pmf0, channel0, horizon: int) -> int:
    """Breadth-first count of reachable (t, stage, s, belief) nodes, written from scratch."""

    def key(v):
        return tuple(float(x) + 0.0 for x in np.round(v, 12))

    n = p.shape[0]
    phis = [np.array([(bits >> (n - 1 - i)) & 1 for i in range(n)]) for bits in range(2**n)]
    pre = {(s, key(pmf0)): np.asarray(pmf0) for s in (0, 1) if channel0[s] > 0}
    seen = {("pre", 0) + k for k in pre}
    for t in range(horizon + 1):
        post = {}
        for (s_prev, _), v in pre.items():
            for phi in phis:
                if q[s_prev, 0] > 0:
                    post[(0, key(v))] = v
                if q[s_prev, 1] > 0:
                    for x in range(n):
                        if phi[x] and v[x] > 0:
                            e = np.zeros(n)
                            e[x] = 1.0
                            post[(1, key(e))] = e
                    silent = np.where(phi == 0, v, 0.0)
                    if silent.sum() > 0:
                        cond = silent / silent.sum()
                        post[(1, key(cond))] = cond
        seen |= {("post", t) + k for k in post}
        pre = {}
        for (s, _), v in post.items():
            nxt = v @ p
            pre[(s, key(nxt))] = nxt
        seen |= {("pre", t + 1) + k for k in pre}
    return len(seen)


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


class TestEnumerateReachable:
    """Reachable-belief graph construction."""

    def test_single_stage_graph(self, calibration_problem: FiniteProblem) -> None:
        graph = enumerate_reachable(
            calibration_problem.source, calibration_problem.channel, 0
        )
        assert len(graph.layers[(0, Stage.PRE)]) == 2
        assert len(graph.layers[(0, Stage.POST)]) == 4
        assert len(graph.layers[(1, Stage.PRE)]) == 4
        assert len(graph) == 10

    def test_node_count_matches_independent_traversal(
        self, calibration_problem: FiniteProblem
    ) -> None:
        graph = enumerate_reachable(
            calibration_problem.source, calibration_problem.channel, 2
        )
        expected = _independent_node_count(
            np.array(CALIBRATION_P), np.array(CALIBRATION_Q), [0.5, 0.5], [0.5, 0.5], 2
        )
        assert len(graph) == expected

    def test_always_transmit_children(self, calibration_problem: FiniteProblem) -> None:
        graph = enumerate_reachable(
            calibration_problem.source, calibration_problem.channel, 2
        )
        always = Prescription((1, 1))
        for key, by_phi in graph.edges.items():
            pre = graph.nodes[key]
            for branch in by_phi[always]:
                if branch.symbol.tag is SymbolTag.BLANK0:
                    assert branch.target.pmf.allclose(pre.pmf)
                else:
                    assert branch.symbol.tag is SymbolTag.PAYLOAD
                    x = branch.symbol.value
                    assert branch.target.pmf.allclose(FinitePMF.one_hot(2, x))

    def test_branch_probabilities_sum_to_one(self, calibration_problem: FiniteProblem) -> None:
        graph = enumerate_reachable(
            calibration_problem.source, calibration_problem.channel, 1
        )
        for by_phi in graph.edges.values():
            for branches in by_phi.values():
                assert sum(b.probability for b in branches) == pytest.approx(1.0, abs=1e-12)

    def test_prunes_impossible_channel_bit(self, calibration_problem: FiniteProblem) -> None:
        graph = enumerate_reachable(
            calibration_problem.source,
            calibration_problem.channel,
            1,
            initial_channel=[1.0, 0.0],
        )
        assert list(graph.initial) == [0]

    def test_state_guard(self) -> None:
        n = 5
        source = FiniteMarkovSource(
            transition=np.eye(n).tolist(), initial=[1.0] + [0.0] * (n - 1)
        )
        channel = GilbertElliottChannel(q=CALIBRATION_Q)
        with pytest.raises(GuardError, match="at most 4"):
            enumerate_reachable(source, channel, 1)

    def test_horizon_guard(self, calibration_problem: FiniteProblem) -> None:
        with pytest.raises(GuardError, match="horizon 6"):
            enumerate_reachable(calibration_problem.source, calibration_problem.channel, 6)

    def test_node_budget(self, calibration_problem: FiniteProblem) -> None:
        with pytest.raises(NodeBudgetError):
            enumerate_reachable(
                calibration_problem.source, calibration_problem.channel, 2, max_nodes=8
            )


# ---------------------------------------------------------------------------
# Backups
# ---------------------------------------------------------------------------


class TestBackups:
    """One-step Bellman backups."""

    def test_post_backup_dirac(self, calibration_problem: FiniteProblem) -> None:
        node = BeliefNode(1, Stage.POST, 1, FinitePMF.one_hot(2, 1))
        successor = BeliefNode(2, Stage.PRE, 1, FinitePMF(np.array([0.2, 0.8])))
        value, estimate = backup_post(
            node, {successor.key: 0.0}, calibration_problem.distortion, calibration_problem.source
        )
        assert (value, estimate) == (0.0, 1)

    def test_post_backup_tie_breaks_to_smallest(self, calibration_problem: FiniteProblem) -> None:
        node = BeliefNode(0, Stage.POST, 0, FinitePMF.uniform(2))
        successor = BeliefNode(1, Stage.PRE, 0, FinitePMF(np.array([0.55, 0.45])))
        value, estimate = backup_post(
            node, {successor.key: 0.0}, calibration_problem.distortion, calibration_problem.source
        )
        assert value == pytest.approx(0.5)
        assert estimate == 0

    def test_pre_backup_free_transmission(self) -> None:
        problem = _calibration_problem(lam=0.0).model_copy(
            update={"channel": GilbertElliottChannel(q=ALWAYS_ON)}
        )
        solution = solve_finite(problem, 0)
        assert solution.optimal_cost == 0.0
        node = solution.graph.nodes[solution.graph.initial[1]]
        value, phi = backup_pre(node, solution.value, 0.0, problem.channel)
        assert value == 0.0
        assert phi == Prescription((0, 1))

    def test_expensive_transmission_never_transmits(self) -> None:
        horizon = 2
        problem = _calibration_problem(lam=(horizon + 1) * 1.0 + 1.0)
        solution = solve_finite(problem, horizon)
        assert all(phi == Prescription((0, 0)) for phi in solution.policy.values())


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


class TestSolveFinite:
    """Backward induction over the reachable graph."""

    def test_terminal_values_are_zero(self, calibration_problem: FiniteProblem) -> None:
        solution = solve_finite(calibration_problem, 2)
        terminal = solution.graph.layers[(3, Stage.PRE)]
        assert terminal
        assert all(solution.value[key] == 0.0 for key in terminal)

    def test_stored_policy_attains_value(self, calibration_problem: FiniteProblem) -> None:
        solution = solve_finite(calibration_problem, 2)
        assert solution.recomputation_gap() <= 1e-12

    def test_relabeling_source_states(self) -> None:
        p = [[0.8, 0.2], [0.2, 0.8]]
        values = []
        for initial in ([0.3, 0.7], [0.7, 0.3]):
            problem = FiniteProblem(
                source=FiniteMarkovSource(transition=p, initial=initial),
                channel=GilbertElliottChannel(q=[[0.6, 0.4], [0.4, 0.6]]),
                distortion=DistortionMatrix.zero_one(2),
                lam=0.3,
            )
            values.append(solve_finite(problem, 2).optimal_cost)
        assert values[0] == pytest.approx(values[1], abs=1e-12)

    def test_estimates_depend_only_on_belief(self, calibration_problem: FiniteProblem) -> None:
        solution = solve_finite(calibration_problem, 2)
        by_belief: dict[tuple, set[int]] = {}
        for key, estimate in solution.estimates.items():
            t, _, _, belief = key
            by_belief.setdefault((t, belief), set()).add(estimate)
        assert all(len(estimates) == 1 for estimates in by_belief.values())

    def test_value_monotone_and_lipschitz_in_lambda(self) -> None:
        horizon = 2
        lambdas = [0.0, 0.1, 0.25, 0.4, 0.8, 1.5, 4.0]
        values = [solve_finite(_calibration_problem(lam), horizon).optimal_cost for lam in lambdas]
        for i in range(len(lambdas) - 1):
            step = values[i + 1] - values[i]
            assert step >= -1e-12
            assert step <= (lambdas[i + 1] - lambdas[i]) * (horizon + 1) + 1e-12

    def test_to_dict_lists_every_node(self, calibration_problem: FiniteProblem) -> None:
        solution = solve_finite(calibration_problem, 1)
        data = solution.to_dict()
        assert data["node_count"] == len(solution.graph) == len(data["nodes"])
        assert data["optimal_cost"] == solution.optimal_cost
        assert "elapsed_s" not in data
        pre0 = [n for n in data["nodes"] if n["time"] == 0 and n["stage"] == "pre"]
        assert all("prescription" in n for n in pre0)

    def test_tiny_silent_mass_is_a_regular_branch(self) -> None:
        near = _calibration_problem().model_copy(
            update={
                "source": FiniteMarkovSource(transition=CALIBRATION_P, initial=[1 - 1e-13, 1e-13])
            }
        )
        exact = _calibration_problem().model_copy(
            update={"source": FiniteMarkovSource(transition=CALIBRATION_P, initial=[1.0, 0.0])}
        )
        solution = solve_finite(near, 1)
        assert solution.recomputation_gap() <= 1e-12
        assert solution.optimal_cost == pytest.approx(
            solve_finite(exact, 1).optimal_cost, abs=1e-9
        )
