"""Exact path-sum evaluation and exhaustive strategy search on tiny instances.

Canonical enumeration order: s_{-1} = 0 before 1; transmitter information
sets before the final stage in sorted key order, each decision tried 0
before 1 (``itertools.product`` order); at the final stage every
information set prefers silence on ties; estimates prefer the smallest
index. A candidate replaces the incumbent only on a strictly lower cost.

Decisions that touch disjoint cost terms are minimized separately, which
is exact: S_{-1} is in every information set, each receiver affects only
its own distortion term, and final-stage decisions sharing a common
history interact only through that history's blank1 receiver.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from remest.belief.filters import f1_finite, f2_finite
from remest.belief.types import FinitePMF
from remest.errors import BeliefKeyError, GuardError
from remest.models.channel import OFF, ON, ChannelSymbol
from remest.oracle.profiles import (
    BLANK0,
    BLANK1,
    Common,
    Granularity,
    StrategyProfile,
    TinyInstance,
    last_channel_state,
    receiver_key,
    symbol_code,
    transmitter_key,
)
from remest.solvers.finite import FiniteDPSolution

logger = logging.getLogger(__name__)


# ------------------------------------------------------------------
# Exact evaluation
# ------------------------------------------------------------------


def exact_cost(instance: TinyInstance, profile: StrategyProfile) -> float:
    """Expected total cost of ``profile``, summed over every positive-probability path.

    Path terms are added with compensated summation (``math.fsum``).
    """
    lam, P, Q, D = instance.lam, instance.P, instance.Q, instance.D
    horizon = instance.horizon
    terms: list[float] = []

    def walk(t: int, xs: tuple, us: tuple, common: Common, prob: float, cost: float) -> None:
        x = xs[-1]
        u = profile.transmit(t, xs, us, common)
        s_prev = last_channel_state(common)
        for s in (OFF, ON):
            q = Q[s_prev, s]
            if q == 0:
                continue
            common_next = common + (symbol_code(u, s, x),)
            xhat = profile.estimate(t, common_next)
            total = cost + lam * u + D[x, xhat]
            if t == horizon:
                terms.append(prob * q * total)
                continue
            for x_next in range(instance.n):
                p = P[x, x_next]
                if p > 0:
                    walk(t + 1, xs + (x_next,), us + (u,), common_next, prob * q * p, total)

    for s0 in (OFF, ON):
        for x0 in range(instance.n):
            prob = instance.initial_channel[s0] * instance.source_initial[x0]
            if prob > 0:
                walk(0, (x0,), (), (s0,), prob, 0.0)
    return math.fsum(terms)


# ------------------------------------------------------------------
# Search sizes
# ------------------------------------------------------------------


@dataclass
class SearchSize:
    """Information-set and profile counts for one search.

    Attributes:
        granularity: Transmitter key format.
        transmitter_sets: Transmitter information sets reachable under some profile.
        receiver_sets: Receiver information sets reachable under some profile.
        profile_count: Number of distinct profiles at this granularity.
        enumerated: Candidates the search evaluates (checked against the guard).
    """

    granularity: Granularity
    transmitter_sets: int
    receiver_sets: int
    profile_count: int
    enumerated: int

    def to_dict(self) -> dict:
        return {
            "granularity": self.granularity.value,
            "transmitter_sets": self.transmitter_sets,
            "receiver_sets": self.receiver_sets,
            "profile_count_log10": round(math.log10(self.profile_count), 3),
            "enumerated": self.enumerated,
        }


def _information_sets(
    instance: TinyInstance, granularity: Granularity, s0: int
) -> tuple[list[list[tuple]], list[tuple]]:
    """Transmitter sets per t and receiver sets reachable from S_{-1} = s0 under any decisions."""
    P, Q = instance.P, instance.Q
    transmitter: list[set] = [set() for _ in range(instance.horizon + 1)]
    receiver: set = set()
    states = {
        ((s0,), (x0,), ()) for x0 in range(instance.n) if instance.source_initial[x0] > 0
    }
    for t in range(instance.horizon + 1):
        following = set()
        for common, xs, us in states:
            transmitter[t].add(transmitter_key(granularity, t, xs, us, common))
            s_prev = last_channel_state(common)
            for u, s in itertools.product((0, 1), (OFF, ON)):
                if Q[s_prev, s] == 0:
                    continue
                common_next = common + (symbol_code(u, s, xs[-1]),)
                receiver.add(receiver_key(t, common_next))
                if t < instance.horizon:
                    for x_next in range(instance.n):
                        if P[xs[-1], x_next] > 0:
                            following.add((common_next, xs + (x_next,), us + (u,)))
        states = following
    return [sorted(keys) for keys in transmitter], sorted(receiver)


def search_size(instance: TinyInstance, granularity: Granularity) -> SearchSize:
    """Count information sets and candidates without evaluating anything."""
    n_tx = n_rx = 0
    enumerated = 0
    for s0 in (OFF, ON):
        if instance.initial_channel[s0] == 0:
            continue
        transmitter, receiver = _information_sets(instance, granularity, s0)
        n_tx += sum(len(keys) for keys in transmitter)
        n_rx += len(receiver)
        enumerated += 2 ** sum(len(keys) for keys in transmitter[:-1])
    return SearchSize(
        granularity=granularity,
        transmitter_sets=n_tx,
        receiver_sets=n_rx,
        profile_count=2**n_tx * instance.n**n_rx,
        enumerated=enumerated,
    )


# ------------------------------------------------------------------
# Evaluation of one pre-final assignment
# ------------------------------------------------------------------


def _best_estimate(weights: np.ndarray, D: np.ndarray) -> tuple[float, int]:
    costs = weights @ D
    j = int(np.argmin(costs))
    return float(costs[j]), j


def _final_stage(
    instance: TinyInstance,
    common: Common,
    sets: dict[tuple, tuple[int, float]],
    terms: list[float],
    profile: StrategyProfile | None,
) -> None:
    """Optimal final-stage decisions and receivers for one common history."""
    lam, Q, D = instance.lam, instance.Q, instance.D
    horizon = instance.horizon
    s_prev = last_channel_state(common)
    q_off, q_on = Q[s_prev, OFF], Q[s_prev, ON]
    d_min = D.min(axis=1)

    if q_off > 0:
        weights = np.zeros(instance.n)
        for x, p in sets.values():
            weights[x] += p * q_off
        cost, xhat = _best_estimate(weights, D)
        terms.append(cost)
        if profile is not None:
            profile.receiver[receiver_key(horizon, common + (BLANK0,))] = xhat

    best_cost = math.inf
    best_blank = 0
    best_choice: dict[tuple, int] = {}
    for blank_estimate in range(instance.n):
        parts: list[float] = []
        choice: dict[tuple, int] = {}
        for key, (x, p) in sets.items():
            silent = p * q_on * D[x, blank_estimate]
            transmit = p * lam + p * q_on * d_min[x]
            choice[key] = 0 if silent <= transmit else 1
            parts.append(silent if choice[key] == 0 else transmit)
        cost = math.fsum(parts)
        if cost < best_cost:
            best_cost, best_blank, best_choice = cost, blank_estimate, choice
        if q_on == 0:
            break
    terms.append(best_cost)

    if profile is None:
        return
    profile.transmitter.update(best_choice)
    if q_on == 0:
        return
    for key, (x, _) in sets.items():
        if best_choice[key]:
            profile.receiver[receiver_key(horizon, common + (x,))] = int(np.argmin(D[x]))
    if not all(best_choice.values()):
        profile.receiver[receiver_key(horizon, common + (BLANK1,))] = best_blank


def _evaluate(
    instance: TinyInstance,
    granularity: Granularity,
    s0: int,
    decisions: dict[tuple, int],
    profile: StrategyProfile | None = None,
) -> float:
    """Cost contribution of S_{-1} = s0 with fixed pre-final decisions.

    Receivers and final-stage transmitters are optimized; when ``profile``
    is given their choices are written into it.
    """
    lam, P, Q, D = instance.lam, instance.P, instance.Q, instance.D
    horizon = instance.horizon
    terms: list[float] = []
    layer: dict[tuple, float] = {}
    for x0 in range(instance.n):
        prob = instance.initial_channel[s0] * instance.source_initial[x0]
        if prob > 0:
            layer[((s0,), (x0,), ())] = prob

    for t in range(horizon):
        received: dict[Common, np.ndarray] = {}
        following: dict[tuple, float] = defaultdict(float)
        for (common, xs, us), p in layer.items():
            x = xs[-1]
            u = decisions[transmitter_key(granularity, t, xs, us, common)]
            if u:
                terms.append(p * lam)
            s_prev = last_channel_state(common)
            for s in (OFF, ON):
                q = Q[s_prev, s]
                if q == 0:
                    continue
                common_next = common + (symbol_code(u, s, x),)
                received.setdefault(common_next, np.zeros(instance.n))[x] += p * q
                for x_next in range(instance.n):
                    if P[x, x_next] > 0:
                        following[(common_next, xs + (x_next,), us + (u,))] += p * q * P[x, x_next]
        for common_next in sorted(received):
            cost, xhat = _best_estimate(received[common_next], D)
            terms.append(cost)
            if profile is not None:
                profile.receiver[receiver_key(t, common_next)] = xhat
        layer = following

    groups: dict[Common, dict[tuple, tuple[int, float]]] = defaultdict(dict)
    for (common, xs, us), p in layer.items():
        key = transmitter_key(granularity, horizon, xs, us, common)
        _, mass = groups[common].get(key, (xs[-1], 0.0))
        groups[common][key] = (xs[-1], mass + p)
    for common in sorted(groups):
        _final_stage(instance, common, dict(sorted(groups[common].items())), terms, profile)
    return math.fsum(terms)


# ------------------------------------------------------------------
# Exhaustive search
# ------------------------------------------------------------------


@dataclass
class OracleResult:
    """Outcome of :func:`exhaustive_search`.

    Attributes:
        min_cost: Minimum expected cost over all profiles.
        profile: First minimizer in canonical order.
        size: Information-set and candidate counts.
        elapsed_s: Wall-clock time.
    """

    min_cost: float
    profile: StrategyProfile
    size: SearchSize
    elapsed_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "min_cost": self.min_cost,
            "size": self.size.to_dict(),
            "argmin": self.profile.to_dict(),
        }


def exhaustive_search(
    instance: TinyInstance, granularity: Granularity = Granularity.RESTRICTED
) -> OracleResult:
    """Global minimum of :func:`exact_cost` over every profile at ``granularity``.

    Raises:
        GuardError: The candidate count exceeds ``instance.max_profiles``.
    """
    size = search_size(instance, granularity)
    logger.info(
        "Oracle %s search: %d transmitter sets, %d receiver sets, "
        "10^%.1f profiles, %d candidates",
        granularity.value,
        size.transmitter_sets,
        size.receiver_sets,
        math.log10(size.profile_count),
        size.enumerated,
    )
    if size.enumerated > instance.max_profiles:
        raise GuardError(
            f"{granularity.value} search needs {size.enumerated} candidates; "
            f"guard allows {instance.max_profiles}"
        )

    started = time.monotonic()
    profile = StrategyProfile(granularity)
    costs: list[float] = []
    for s0 in (OFF, ON):
        if instance.initial_channel[s0] == 0:
            continue
        transmitter, _ = _information_sets(instance, granularity, s0)
        keys = [key for keys in transmitter[:-1] for key in keys]
        best_cost = math.inf
        best: dict[tuple, int] = {}
        for bits in itertools.product((0, 1), repeat=len(keys)):
            decisions = dict(zip(keys, bits, strict=True))
            cost = _evaluate(instance, granularity, s0, decisions)
            if cost < best_cost:
                best_cost, best = cost, decisions
        profile.transmitter.update(best)
        costs.append(_evaluate(instance, granularity, s0, best, profile))

    result = OracleResult(
        min_cost=math.fsum(costs),
        profile=profile,
        size=size,
        elapsed_s=time.monotonic() - started,
    )
    logger.info(
        "Oracle %s minimum %.12f (%.2fs)", granularity.value, result.min_cost, result.elapsed_s
    )
    return result


# ------------------------------------------------------------------
# DP policy as a profile
# ------------------------------------------------------------------


def profile_from_solution(instance: TinyInstance, solution: FiniteDPSolution) -> StrategyProfile:
    """Encode the DP-optimal policy as a RESTRICTED profile along every reachable history.

    Raises:
        BeliefKeyError: A replayed belief has no node in the solution graph.
    """
    source = instance.problem.source
    Q = instance.Q
    horizon = instance.horizon
    profile = StrategyProfile(Granularity.RESTRICTED)

    def walk(t: int, common: Common, pmf: FinitePMF) -> None:
        s_prev = last_channel_state(common)
        node = solution.pre_node(t, s_prev, pmf)
        if node is None:
            raise BeliefKeyError(f"no pre-transmission node at t={t}, s={s_prev}, {pmf.key()}")
        phi = solution.policy[node.key]
        for x in range(instance.n):
            profile.transmitter[(t, x, common)] = phi(x)
        for s in (OFF, ON):
            if Q[s_prev, s] == 0:
                continue
            if s == OFF:
                symbols = [ChannelSymbol.blank0()]
            else:
                symbols = [
                    ChannelSymbol.payload(x)
                    for x in range(instance.n)
                    if phi(x) and node.pmf.probs[x] > 0
                ]
                if node.pmf.mass(phi.silent_mask) > 0:
                    symbols.append(ChannelSymbol.blank1())
            for y in symbols:
                code = y.value if y.is_payload else (BLANK0 if s == OFF else BLANK1)
                post = f2_finite(node.pmf, phi, y)
                post_node = solution.post_node(t, s, post)
                if post_node is None:
                    raise BeliefKeyError(f"no post-transmission node at t={t}, s={s}, {post.key()}")
                profile.receiver[receiver_key(t, common + (code,))] = solution.estimates[
                    post_node.key
                ]
                if t < horizon:
                    walk(t + 1, common + (code,), f1_finite(post_node.pmf, source))

    for s0, key in sorted(solution.graph.initial.items()):
        if instance.initial_channel[s0] > 0:
            walk(0, (s0,), solution.graph.nodes[key].pmf)
    return profile
