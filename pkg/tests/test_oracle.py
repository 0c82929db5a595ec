"""Tests for exact path-sum evaluation and the exhaustive strategy search."""

from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np
import pytest

from remest.errors import GuardError, ModelValidationError
from remest.models import (
    OFF,
    ON,
    DistortionMatrix,
    FiniteMarkovSource,
    FiniteProblem,
    GilbertElliottChannel,
)
from remest.oracle import (
    Granularity,
    StrategyProfile,
    TinyInstance,
    exact_cost,
    exhaustive_search,
    profile_from_solution,
    reachable_histories,
    search_size,
)
from remest.oracle.profiles import BLANK0, BLANK1, transmitter_key
from remest.simulation import simulate_profile
from remest.solvers import solve_finite
from tests.conftest import ALWAYS_ON, _calibration_problem


def _always_on_instance(lam: float, horizon: int = 0) -> TinyInstance:
    problem = _calibration_problem(lam).model_copy(
        update={"channel": GilbertElliottChannel(q=ALWAYS_ON)}
    )
    return TinyInstance(problem, horizon)


# ---------------------------------------------------------------------------
# Exact evaluation
# ---------------------------------------------------------------------------


class TestExactCost:
    """Path-sum expected cost of a fixed profile."""

    def test_never_transmit_single_step(self) -> None:
        instance = TinyInstance(_calibration_problem(), 0)
        profile = StrategyProfile.constant(instance, 0, 0, Granularity.RESTRICTED)
        assert exact_cost(instance, profile) == pytest.approx(0.5, abs=1e-15)

    def test_always_transmit_perfect_channel(self) -> None:
        instance = _always_on_instance(0.3)
        profile = StrategyProfile(Granularity.RESTRICTED)
        for x in (0, 1):
            profile.transmitter[(0, x, (1,))] = 1
            profile.receiver[(0, (1, x))] = x
        assert exact_cost(instance, profile) == pytest.approx(0.3, abs=1e-15)

    def test_reachable_history_probabilities(self) -> None:
        instance = TinyInstance(_calibration_problem(), 2)
        final = [p for t, *_, p in reachable_histories(instance, lambda *_: 1) if t == 2]
        assert sum(final) == pytest.approx(1.0, abs=1e-12)

    def test_missing_decision_is_reported(self) -> None:
        instance = TinyInstance(_calibration_problem(), 0)
        with pytest.raises(ModelValidationError, match="no transmitter decision"):
            exact_cost(instance, StrategyProfile(Granularity.RESTRICTED))

    def test_monte_carlo_agrees(self) -> None:
        instance = TinyInstance(_calibration_problem(), 2)
        profile = StrategyProfile.constant(instance, 1, 1, Granularity.FULL)
        estimate = simulate_profile(instance, profile, n_reps=4000, seed=8)
        assert estimate.within(exact_cost(instance, profile), n_se=4.0)


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


class TestSearchSize:
    """Information-set and candidate counts."""

    def test_single_step_counts(self) -> None:
        size = search_size(TinyInstance(_calibration_problem(), 0), Granularity.RESTRICTED)
        assert size.transmitter_sets == 4
        assert size.receiver_sets == 8
        assert size.profile_count == 2**4 * 2**8
        assert size.enumerated == 2

    def test_full_is_at_least_restricted(self) -> None:
        instance = TinyInstance(_calibration_problem(), 2)
        full = search_size(instance, Granularity.FULL)
        restricted = search_size(instance, Granularity.RESTRICTED)
        assert full.transmitter_sets >= restricted.transmitter_sets
        assert full.enumerated >= restricted.enumerated


class TestExhaustiveSearch:
    """Global minimum over strategy profiles."""

    def test_calibration_matches_dp(self, calibration_problem) -> None:
        solution = solve_finite(calibration_problem, 2)
        result = exhaustive_search(TinyInstance(calibration_problem, 2), Granularity.RESTRICTED)
        assert result.min_cost == pytest.approx(solution.optimal_cost, abs=1e-9)

    @pytest.mark.parametrize("lam", [0.0, 0.4, 1.5])
    @pytest.mark.parametrize("horizon", [0, 1])
    def test_small_instances_match_dp(self, lam: float, horizon: int) -> None:
        problem = _calibration_problem(lam)
        result = exhaustive_search(TinyInstance(problem, horizon))
        dp_value = solve_finite(problem, horizon).optimal_cost
        assert result.min_cost == pytest.approx(dp_value, abs=1e-9)

    def test_full_equals_restricted_at_one_step(self, calibration_problem) -> None:
        instance = TinyInstance(calibration_problem, 1)
        full = exhaustive_search(instance, Granularity.FULL)
        restricted = exhaustive_search(instance, Granularity.RESTRICTED)
        assert full.min_cost == pytest.approx(restricted.min_cost, abs=1e-9)

    def test_argmin_attains_minimum(self, calibration_problem) -> None:
        instance = TinyInstance(calibration_problem, 2)
        result = exhaustive_search(instance)
        assert exact_cost(instance, result.profile) == pytest.approx(result.min_cost, abs=1e-12)
        data = result.to_dict()
        assert data["min_cost"] == result.min_cost
        assert data["argmin"]["granularity"] == "restricted"

    def test_partial_transmission_beats_constants(self) -> None:
        instance = _always_on_instance(0.3)
        result = exhaustive_search(instance)
        assert result.min_cost == pytest.approx(0.15, abs=1e-12)


# ---------------------------------------------------------------------------
# Independent brute force
# ---------------------------------------------------------------------------


def _random_instance(seed: int, horizon: int) -> TinyInstance:
    rng = np.random.default_rng(seed)
    problem = FiniteProblem(
        source=FiniteMarkovSource(
            transition=rng.dirichlet([1.0, 1.0], size=2).tolist(),
            initial=rng.dirichlet([1.0, 1.0]).tolist(),
        ),
        channel=GilbertElliottChannel(
            q=rng.dirichlet([1.0, 1.0], size=2).tolist(),
            initial_state_dist=rng.dirichlet([1.0, 1.0]).tolist(),
        ),
        distortion=DistortionMatrix(matrix=rng.uniform(0.0, 1.0, size=(2, 2)).tolist()),
        lam=float(rng.uniform(0.0, 1.0)),
    )
    return TinyInstance(problem, horizon)


def _walk(instance: TinyInstance, granularity: Granularity, table: dict, stop: int):
    """Pre-transmission histories (t, xs, us, common, prob) up to step ``stop``."""
    P, Q = instance.P, instance.Q
    frontier = [
        ((x0,), (), (s0,), instance.initial_channel[s0] * instance.source_initial[x0])
        for s0 in (OFF, ON)
        for x0 in range(instance.n)
    ]
    for t in range(stop + 1):
        children = []
        for xs, us, common, prob in frontier:
            if prob <= 0.0:
                continue
            yield t, xs, us, common, prob
            if t == stop:
                continue
            u = table[transmitter_key(granularity, t, xs, us, common)]
            s_prev = common[0] if t == 0 else (OFF if common[-1] == BLANK0 else ON)
            for s in (OFF, ON):
                code = BLANK0 if s == OFF else (xs[-1] if u else BLANK1)
                for x_next in range(instance.n):
                    children.append(
                        (
                            xs + (x_next,),
                            us + (u,),
                            common + (code,),
                            prob * Q[s_prev, s] * P[xs[-1], x_next],
                        )
                    )
        frontier = children


def _table_cost(instance: TinyInstance, granularity: Granularity, table: dict) -> float:
    """Expected cost of a transmitter table paired with its best receiver."""
    Q, D = instance.Q, instance.D
    transmit = 0.0
    receivers: dict[tuple, np.ndarray] = defaultdict(lambda: np.zeros(instance.n))
    for t, xs, us, common, prob in _walk(instance, granularity, table, instance.horizon):
        u = table[transmitter_key(granularity, t, xs, us, common)]
        transmit += prob * instance.lam * u
        s_prev = common[0] if t == 0 else (OFF if common[-1] == BLANK0 else ON)
        for s in (OFF, ON):
            if Q[s_prev, s] > 0:
                code = BLANK0 if s == OFF else (xs[-1] if u else BLANK1)
                receivers[(t, common + (code,))] += prob * Q[s_prev, s] * D[xs[-1]]
    return transmit + sum(float(row.min()) for row in receivers.values())


def _brute_force(instance: TinyInstance, granularity: Granularity) -> float:
    """Minimum over every transmitter table, built one step at a time."""

    def extend(table: dict, t: int) -> float:
        keys = sorted(
            {
                transmitter_key(granularity, step, xs, us, common)
                for step, xs, us, common, _ in _walk(instance, granularity, table, t)
                if step == t
            }
        )
        best = math.inf
        for bits in itertools.product((0, 1), repeat=len(keys)):
            candidate = {**table, **dict(zip(keys, bits, strict=True))}
            if t == instance.horizon:
                best = min(best, _table_cost(instance, granularity, candidate))
            else:
                best = min(best, extend(candidate, t + 1))
        return best

    return extend({}, 0)


class TestBruteForceAgreement:
    """Exhaustive search against a table-by-table enumeration on random instances."""

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_restricted_single_step(self, seed: int) -> None:
        instance = _random_instance(seed, 0)
        result = exhaustive_search(instance, Granularity.RESTRICTED)
        expected = _brute_force(instance, Granularity.RESTRICTED)
        assert result.min_cost == pytest.approx(expected, abs=1e-9)

    @pytest.mark.parametrize("seed", [10, 11])
    def test_restricted_two_steps(self, seed: int) -> None:
        instance = _random_instance(seed, 1)
        result = exhaustive_search(instance, Granularity.RESTRICTED)
        expected = _brute_force(instance, Granularity.RESTRICTED)
        assert result.min_cost == pytest.approx(expected, abs=1e-9)

    @pytest.mark.parametrize("seed", [20, 21, 22])
    def test_full_single_step(self, seed: int) -> None:
        instance = _random_instance(seed, 0)
        result = exhaustive_search(instance, Granularity.FULL)
        expected = _brute_force(instance, Granularity.FULL)
        assert result.min_cost == pytest.approx(expected, abs=1e-9)


# ---------------------------------------------------------------------------
# DP cross-checks
# ---------------------------------------------------------------------------


class TestDPProfile:
    """The DP policy evaluated as a strategy profile."""

    def test_exact_cost_reproduces_dp_value(self, calibration_problem) -> None:
        instance = TinyInstance(calibration_problem, 2)
        solution = solve_finite(calibration_problem, 2)
        profile = profile_from_solution(instance, solution)
        assert exact_cost(instance, profile) == pytest.approx(solution.optimal_cost, abs=1e-9)

    @pytest.mark.parametrize("u", [0, 1])
    @pytest.mark.parametrize("xhat", [0, 1])
    def test_dp_value_below_constant_profiles(
        self, calibration_problem, u: int, xhat: int
    ) -> None:
        instance = TinyInstance(calibration_problem, 2)
        dp_value = solve_finite(calibration_problem, 2).optimal_cost
        profile = StrategyProfile.constant(instance, u, xhat, Granularity.FULL)
        assert dp_value <= exact_cost(instance, profile) + 1e-12

    def test_tiny_silent_mass_profile(self) -> None:
        problem = _calibration_problem().model_copy(
            update={
                "source": FiniteMarkovSource(
                    transition=[[0.9, 0.1], [0.2, 0.8]], initial=[1 - 1e-13, 1e-13]
                )
            }
        )
        instance = TinyInstance(problem, 1)
        solution = solve_finite(problem, 1)
        profile = profile_from_solution(instance, solution)
        assert exact_cost(instance, profile) == pytest.approx(solution.optimal_cost, abs=1e-9)
        result = exhaustive_search(instance)
        assert result.min_cost == pytest.approx(solution.optimal_cost, abs=1e-9)


# ---------------------------------------------------------------------------
# Guards
# ---------------------------------------------------------------------------


class TestGuards:
    """Instance-size guards."""

    def test_too_many_states(self) -> None:
        problem = _calibration_problem().model_copy(
            update={"source": FiniteMarkovSource(transition=np.eye(3).tolist(), initial=[1, 0, 0])}
        )
        with pytest.raises(GuardError, match="at most 2"):
            TinyInstance(problem, 1)

    def test_horizon_guard(self) -> None:
        with pytest.raises(GuardError, match="T <= 2"):
            TinyInstance(_calibration_problem(), 3)

    def test_candidate_guard(self) -> None:
        instance = TinyInstance(_calibration_problem(), 2, max_profiles=10)
        with pytest.raises(GuardError, match="guard allows 10"):
            exhaustive_search(instance)
