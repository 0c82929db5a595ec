"""Exact finite-horizon DP over reachable beliefs for finite-alphabet sources.

Starting from the initial pre-transmission belief, every prescription
phi in {0,1}^n and every channel symbol is applied to enumerate the finite
set of beliefs the receiver can hold. Backward induction over that graph
solves the common-information dynamic program exactly:

    V1_t(s, pi1) = min_phi  lam*pi1(B1) + sum_y P(y | s, pi1, phi) V2_t(s', pi2_y)
    V2_t(s, pi2) = min_xhat sum_x d(x, xhat) pi2(x) + V1_{t+1}(s, pi2 P)

with V1_{T+1} = 0. Pre-stage nodes are indexed by the previous channel
state, post-stage nodes by the current one. Ties resolve to the
lexicographically smallest prescription and the smallest estimate index.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from remest.belief.filters import f1_finite, f2_finite
from remest.belief.majorization import expected_distortion
from remest.belief.types import FinitePMF, Prescription
from remest.errors import GuardError, MissingSuccessorError, NodeBudgetError
from remest.models.channel import OFF, ON, ChannelSymbol, GilbertElliottChannel
from remest.models.distortion import DistortionMatrix
from remest.models.problem import FiniteProblem
from remest.models.source import FiniteMarkovSource

logger = logging.getLogger(__name__)

DEFAULT_MAX_STATES = 4
DEFAULT_MAX_HORIZON = 5
DEFAULT_MAX_NODES = 1_000_000

# Candidate values within this of the incumbent do not replace it.
_TIE_TOL = 1e-13


class Stage(str, Enum):  # noqa: UP042
    """Position within a time step."""

    PRE = "pre"
    POST = "post"


NodeKey = tuple[int, str, int, tuple[float, ...]]


@dataclass(frozen=True, eq=False)
class BeliefNode:
    """DP state (t, stage, s, pi).

    Attributes:
        time: Time index t (T+1 for terminal pre-stage nodes).
        stage: PRE (before the channel use) or POST (after it).
        channel_bit: S_{t-1} for PRE nodes, S_t for POST nodes.
        pmf: The belief pi^1_t or pi^2_t.
    """

    time: int
    stage: Stage
    channel_bit: int
    pmf: FinitePMF

    @property
    def key(self) -> NodeKey:
        return (self.time, self.stage.value, self.channel_bit, self.pmf.key())


@dataclass(frozen=True)
class Branch:
    """One outcome of applying a prescription at a pre-stage node."""

    symbol: ChannelSymbol
    probability: float
    target: BeliefNode


@dataclass
class BeliefGraph:
    """Reachable-belief graph.

    Attributes:
        horizon: T.
        nodes: Every node by key, including terminal pre-stage nodes at T+1.
        layers: Node keys per (time, stage), in insertion order.
        edges: For each non-terminal pre-stage node, the branches of every prescription.
        successors: Post-stage node key -> next pre-stage node key.
        initial: Initial pre-stage node key per channel bit with positive probability.
    """

    horizon: int
    nodes: dict[NodeKey, BeliefNode] = field(default_factory=dict)
    layers: dict[tuple[int, Stage], list[NodeKey]] = field(default_factory=dict)
    edges: dict[NodeKey, dict[Prescription, list[Branch]]] = field(default_factory=dict)
    successors: dict[NodeKey, NodeKey] = field(default_factory=dict)
    initial: dict[int, NodeKey] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.nodes)

    def layer(self, t: int, stage: Stage) -> list[BeliefNode]:
        return [self.nodes[key] for key in self.layers.get((t, stage), [])]

    def add(self, node: BeliefNode, max_nodes: int) -> NodeKey:
        key = node.key
        if key not in self.nodes:
            if len(self.nodes) >= max_nodes:
                raise NodeBudgetError(
                    f"reachable-belief enumeration exceeded {max_nodes} nodes"
                )
            self.nodes[key] = node
            self.layers.setdefault((node.time, node.stage), []).append(key)
        return key


def all_prescriptions(n: int) -> list[Prescription]:
    """Every prescription on n states, in lexicographic order."""
    return [Prescription(bits) for bits in itertools.product((0, 1), repeat=n)]


def pre_branches(
    node: BeliefNode, phi: Prescription, channel: GilbertElliottChannel
) -> list[Branch]:
    """Positive-probability outcomes of applying ``phi`` at a pre-stage node.

    Order: blank0, payloads in alphabet order, blank1. The blank1 branch is
    absent when phi transmits on every state with positive probability.
    """
    pmf, s_prev, t = node.pmf, node.channel_bit, node.time
    q_off, q_on = channel.q[s_prev][OFF], channel.q[s_prev][ON]
    branches: list[Branch] = []
    if q_off > 0:
        target = BeliefNode(t, Stage.POST, OFF, pmf)
        branches.append(Branch(ChannelSymbol.blank0(), q_off, target))
    if q_on > 0:
        for x in range(pmf.n):
            if phi(x) and pmf.probs[x] > 0:
                symbol = ChannelSymbol.payload(x)
                target = BeliefNode(t, Stage.POST, ON, f2_finite(pmf, phi, symbol))
                branches.append(Branch(symbol, q_on * pmf.probs[x], target))
        silent_mass = pmf.mass(phi.silent_mask)
        if silent_mass > 0:
            symbol = ChannelSymbol.blank1()
            target = BeliefNode(t, Stage.POST, ON, f2_finite(pmf, phi, symbol))
            branches.append(Branch(symbol, q_on * silent_mass, target))
    return branches


def _post_successor(node: BeliefNode, source: FiniteMarkovSource) -> BeliefNode:
    return BeliefNode(node.time + 1, Stage.PRE, node.channel_bit, f1_finite(node.pmf, source))


# ------------------------------------------------------------------
# Enumeration
# ------------------------------------------------------------------


def enumerate_reachable(
    source: FiniteMarkovSource,
    channel: GilbertElliottChannel,
    horizon: int,
    initial: FinitePMF | None = None,
    initial_channel: np.ndarray | list[float] | None = None,
    *,
    max_states: int = DEFAULT_MAX_STATES,
    max_horizon: int = DEFAULT_MAX_HORIZON,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> BeliefGraph:
    """Enumerate every belief node reachable under some prescription sequence.

    Args:
        source: Markov source; its ``initial`` law is used unless ``initial`` is given.
        channel: Channel; its S_{-1} law is used unless ``initial_channel`` is given.
        horizon: T.
        initial: Initial pre-transmission belief.
        initial_channel: Distribution of S_{-1}.
        max_states: Guard on the alphabet size.
        max_horizon: Guard on T.
        max_nodes: Node budget.

    Raises:
        GuardError: Alphabet or horizon beyond the guard.
        NodeBudgetError: More than ``max_nodes`` nodes are reachable.
    """
    n = source.n_states
    if n > max_states:
        raise GuardError(
            f"finite source has {n} states; the reachable-belief solver supports at most "
            f"{max_states}"
        )
    if horizon < 0 or horizon > max_horizon:
        raise GuardError(f"horizon {horizon} outside the supported range 0..{max_horizon}")

    pmf0 = FinitePMF(np.asarray(source.initial)) if initial is None else initial
    channel0 = channel.initial if initial_channel is None else np.asarray(initial_channel)
    graph = BeliefGraph(horizon=horizon)
    for s in (OFF, ON):
        if channel0[s] > 0:
            graph.initial[s] = graph.add(BeliefNode(0, Stage.PRE, s, pmf0), max_nodes)

    prescriptions = all_prescriptions(n)
    for t in range(horizon + 1):
        for node in graph.layer(t, Stage.PRE):
            by_phi: dict[Prescription, list[Branch]] = {}
            for phi in prescriptions:
                branches = pre_branches(node, phi, channel)
                for branch in branches:
                    graph.add(branch.target, max_nodes)
                by_phi[phi] = branches
            graph.edges[node.key] = by_phi
        for node in graph.layer(t, Stage.POST):
            graph.successors[node.key] = graph.add(_post_successor(node, source), max_nodes)
        logger.debug(
            "t=%d: %d pre nodes, %d post nodes",
            t,
            len(graph.layers.get((t, Stage.PRE), [])),
            len(graph.layers.get((t, Stage.POST), [])),
        )
    logger.info("Enumerated %d reachable belief nodes (n=%d, T=%d)", len(graph), n, horizon)
    return graph


# ------------------------------------------------------------------
# Backups
# ------------------------------------------------------------------


def _lookup(values: dict[NodeKey, float], key: NodeKey) -> float:
    try:
        return values[key]
    except KeyError:
        raise MissingSuccessorError(f"no value computed for successor {key}") from None


def backup_post(
    node: BeliefNode,
    values: dict[NodeKey, float],
    d: DistortionMatrix,
    source: FiniteMarkovSource,
) -> tuple[float, int]:
    """V2_t(s, pi2) and the optimal estimate (ties -> smallest index)."""
    distortion, estimate = expected_distortion(node.pmf, d)
    continuation = _lookup(values, _post_successor(node, source).key)
    return distortion + continuation, int(estimate)


def backup_pre(
    node: BeliefNode,
    values: dict[NodeKey, float],
    lam: float,
    channel: GilbertElliottChannel,
) -> tuple[float, Prescription]:
    """V1_t(s, pi1) and the optimal prescription (ties -> lexicographically smallest)."""
    best_value = np.inf
    best_phi: Prescription | None = None
    for phi in all_prescriptions(node.pmf.n):
        value = lam * node.pmf.mass(phi.transmit_mask)
        for branch in pre_branches(node, phi, channel):
            value += branch.probability * _lookup(values, branch.target.key)
        if best_phi is None or value < best_value - _TIE_TOL * max(1.0, abs(best_value)):
            best_value, best_phi = value, phi
    assert best_phi is not None
    return float(best_value), best_phi


# ------------------------------------------------------------------
# Solver
# ------------------------------------------------------------------


@dataclass
class FiniteDPSolution:
    """Output of :func:`solve_finite`.

    Attributes:
        problem: The solved instance.
        graph: Reachable-belief graph.
        value: V1 at pre-stage nodes, V2 at post-stage nodes, 0 at terminal nodes.
        policy: Optimal prescription per non-terminal pre-stage node.
        estimates: Optimal estimate per post-stage node.
        initial_channel: Distribution of S_{-1} used for the optimal cost.
        elapsed_s: Wall-clock solve time.
    """

    problem: FiniteProblem
    graph: BeliefGraph
    value: dict[NodeKey, float]
    policy: dict[NodeKey, Prescription]
    estimates: dict[NodeKey, int]
    initial_channel: np.ndarray
    elapsed_s: float = 0.0

    @property
    def horizon(self) -> int:
        return self.graph.horizon

    @property
    def optimal_cost(self) -> float:
        """Sum over s of P(S_{-1} = s) V1_0(s, pi1_0)."""
        return float(
            sum(self.initial_channel[s] * self.value[key] for s, key in self.graph.initial.items())
        )

    def pre_node(self, t: int, s_prev: int, pmf: FinitePMF) -> BeliefNode | None:
        return self.graph.nodes.get((t, Stage.PRE.value, s_prev, pmf.key()))

    def post_node(self, t: int, s: int, pmf: FinitePMF) -> BeliefNode | None:
        return self.graph.nodes.get((t, Stage.POST.value, s, pmf.key()))

    def recomputation_gap(self) -> float:
        """Largest |stored value - one-step re-evaluation of the stored decision|."""
        problem = self.problem
        gap = 0.0
        for key, phi in self.policy.items():
            node = self.graph.nodes[key]
            value = problem.lam * node.pmf.mass(phi.transmit_mask)
            for branch in pre_branches(node, phi, problem.channel):
                value += branch.probability * self.value[branch.target.key]
            gap = max(gap, abs(value - self.value[key]))
        for key, estimate in self.estimates.items():
            node = self.graph.nodes[key]
            distortion = float(node.pmf.probs @ problem.distortion.array[:, estimate])
            successor = self.graph.successors[key]
            gap = max(gap, abs(distortion + self.value[successor] - self.value[key]))
        return gap

    def to_dict(self) -> dict:
        """JSON-ready encoding: value summary plus every node."""
        nodes = []
        for key, node in self.graph.nodes.items():
            entry = {
                "time": node.time,
                "stage": node.stage.value,
                "channel_bit": node.channel_bit,
                "belief": [float(p) for p in node.pmf.probs],
                "value": self.value[key],
            }
            if key in self.policy:
                entry["prescription"] = list(self.policy[key].decide)
            if key in self.estimates:
                entry["estimate"] = self.estimates[key]
            nodes.append(entry)
        return {
            "horizon": self.horizon,
            "lambda": self.problem.lam,
            "optimal_cost": self.optimal_cost,
            "initial_channel": [float(p) for p in self.initial_channel],
            "node_count": len(self.graph),
            "nodes": nodes,
        }


def solve_finite(
    problem: FiniteProblem,
    horizon: int,
    initial: FinitePMF | None = None,
    initial_channel: np.ndarray | list[float] | None = None,
    *,
    max_states: int = DEFAULT_MAX_STATES,
    max_horizon: int = DEFAULT_MAX_HORIZON,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> FiniteDPSolution:
    """Backward induction over the reachable-belief graph.

    Args:
        problem: Source, channel, distortion table and lambda.
        horizon: T.
        initial: Initial belief (defaults to the source's initial law).
        initial_channel: Distribution of S_{-1} (defaults to the channel's).

    Returns:
        The solution with values, policy, and estimates for every node.
    """
    started = time.monotonic()
    channel0 = (
        problem.channel.initial if initial_channel is None else np.asarray(initial_channel)
    )
    graph = enumerate_reachable(
        problem.source,
        problem.channel,
        horizon,
        initial,
        channel0,
        max_states=max_states,
        max_horizon=max_horizon,
        max_nodes=max_nodes,
    )
    terminal = graph.layers.get((horizon + 1, Stage.PRE), [])
    values: dict[NodeKey, float] = {key: 0.0 for key in terminal}
    policy: dict[NodeKey, Prescription] = {}
    estimates: dict[NodeKey, int] = {}

    for t in range(horizon, -1, -1):
        for node in graph.layer(t, Stage.POST):
            values[node.key], estimates[node.key] = backup_post(
                node, values, problem.distortion, problem.source
            )
        for node in graph.layer(t, Stage.PRE):
            values[node.key], policy[node.key] = backup_pre(
                node, values, problem.lam, problem.channel
            )

    solution = FiniteDPSolution(
        problem=problem,
        graph=graph,
        value=values,
        policy=policy,
        estimates=estimates,
        initial_channel=channel0,
        elapsed_s=time.monotonic() - started,
    )
    logger.info(
        "Solved finite DP: T=%d, lambda=%g, cost=%.12f (%d nodes, %.2fs)",
        horizon,
        problem.lam,
        solution.optimal_cost,
        len(graph),
        solution.elapsed_s,
    )
    return solution
