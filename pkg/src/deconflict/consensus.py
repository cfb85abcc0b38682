"""Procedural deconfliction: the deterministic weighted-consensus game.

Each round every agent proposes a setpoint vector. The deconflictor
averages the proposals into a weighted centroid; from round one on, an
agent's weight is the ratio of its initial distance to the previous
centroid over its current distance, so agents that move toward the
centroid gain influence. An agent landing on the previous centroid gets
infinite weight and ends the game; otherwise the game ends when all
proposals agree within tolerance or when the round limit is reached, in
which case the final centroid is the default resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping, Sequence

from .model import FeasibleSet, SetpointVector, distance

if TYPE_CHECKING:
    from .config import GameConfig
    from .strategies import Strategy


class AgentFault(RuntimeError):
    """An agent failed, timed out, or returned an invalid proposal."""

    def __init__(self, agent: str, reason: str):
        super().__init__(f"agent {agent!r}: {reason}")
        self.agent = agent
        self.reason = reason


@dataclass(frozen=True)
class RoundRecord:
    """One game round: proposals, the weights applied, and the centroid."""

    round: int
    proposals: Mapping[str, SetpointVector]
    weights: Mapping[str, float]
    centroid: SetpointVector

    def __post_init__(self) -> None:
        object.__setattr__(self, "proposals", dict(self.proposals))
        object.__setattr__(self, "weights", dict(self.weights))


@dataclass(frozen=True)
class GameResult:
    """Full procedural-game trajectory and its resolution."""

    rounds: tuple[RoundRecord, ...]
    resolution: SetpointVector
    converged: bool
    termination: str  # "consensus" | "proposal_hit_centroid" | "round_limit"


def weighted_centroid(
    proposals: Mapping[str, SetpointVector], weights: Mapping[str, float]
) -> SetpointVector:
    """Componentwise weighted average of the proposals.

    Any infinite-weight proposal short-circuits the average; with several
    such proposals the result is their unweighted mean.
    """
    if set(proposals) != set(weights):
        raise ValueError("proposals and weights must cover the same agents")
    if not proposals:
        raise ValueError("no proposals")
    for agent, w in weights.items():
        if w < 0 or math.isnan(w):
            raise ValueError(f"weight for {agent} must be >= 0")
    pinned = [agent for agent, w in weights.items() if math.isinf(w)]
    if pinned:
        chosen = [proposals[agent] for agent in sorted(pinned)]
        total = chosen[0]
        for p in chosen[1:]:
            total = total + p
        return total.scale(1.0 / len(chosen))
    total_weight = sum(weights.values())
    if total_weight == 0.0:
        raise ValueError("all weights are zero")
    agents = sorted(proposals)
    acc = proposals[agents[0]].scale(weights[agents[0]] / total_weight)
    for agent in agents[1:]:
        acc = acc + proposals[agent].scale(weights[agent] / total_weight)
    return acc


def flexibility_weight(
    x_i0: SetpointVector,
    x_ik: SetpointVector,
    c_prev: SetpointVector,
    eps_weight: float = 1e-6,
) -> float:
    """Weight ratio: initial distance to the previous centroid over current.

    Returns +inf when the current proposal sits on the previous centroid
    (within eps_weight), which terminates the game.
    """
    d_current = distance(x_ik, c_prev)
    if d_current < eps_weight:
        return math.inf
    return distance(x_i0, c_prev) / d_current


def _proposals_agree(proposals: Mapping[str, SetpointVector], eps: float) -> bool:
    vecs = list(proposals.values())
    return all(
        distance(vecs[i], vecs[j]) <= eps
        for i in range(len(vecs))
        for j in range(i + 1, len(vecs))
    )


def collect_initial_proposals(
    agents: Sequence["Strategy"], fs: FeasibleSet
) -> dict[str, SetpointVector]:
    from .strategies import NegotiationContext

    proposals: dict[str, SetpointVector] = {}
    for strategy in agents:
        ctx = NegotiationContext(feasible=fs, round=0)
        try:
            proposal = strategy.initial_proposal(ctx)
        except AgentFault:
            raise
        except Exception as exc:
            raise AgentFault(strategy.name, f"initial proposal failed: {exc}") from exc
        validate_proposal(strategy.name, proposal, fs)
        proposals[strategy.name] = proposal
    return proposals


def validate_proposal(agent: str, proposal: SetpointVector, fs: FeasibleSet) -> None:
    if proposal.devices != fs.devices:
        raise AgentFault(agent, f"proposal covers {proposal.devices}")
    bad = fs.first_violation(proposal)
    if bad is not None:
        raise AgentFault(agent, f"setpoint for {bad} outside the feasible box")


def run_procedural_game(
    agents: Sequence["Strategy"], fs: FeasibleSet, config: "GameConfig"
) -> GameResult:
    """Run the weighted-consensus game to termination."""
    from .strategies import NegotiationContext

    if len(agents) < 2:
        raise ValueError("procedural game needs at least two agents")
    names = [a.name for a in agents]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate agent names: {names}")

    initial = collect_initial_proposals(agents, fs)
    weights0 = {name: 1.0 for name in initial}
    centroid = weighted_centroid(initial, weights0)
    rounds = [RoundRecord(0, initial, weights0, centroid)]
    if _proposals_agree(initial, config.eps_consensus):
        return GameResult(tuple(rounds), centroid, True, "consensus")

    previous = dict(initial)
    for k in range(1, config.max_rounds + 1):
        proposals: dict[str, SetpointVector] = {}
        for strategy in agents:
            ctx = NegotiationContext(
                feasible=fs,
                round=k,
                reference=centroid,
                own_initial=initial[strategy.name],
                own_previous=previous[strategy.name],
            )
            try:
                response = strategy.respond(ctx)
            except AgentFault:
                raise
            except Exception as exc:
                raise AgentFault(strategy.name, f"respond failed: {exc}") from exc
            validate_proposal(strategy.name, response.setpoints, fs)
            proposals[strategy.name] = response.setpoints

        weights = {
            name: flexibility_weight(
                initial[name], proposals[name], centroid, config.eps_weight
            )
            for name in proposals
        }
        new_centroid = weighted_centroid(proposals, weights)
        rounds.append(RoundRecord(k, proposals, weights, new_centroid))
        if any(math.isinf(w) for w in weights.values()):
            return GameResult(tuple(rounds), new_centroid, True, "proposal_hit_centroid")
        if _proposals_agree(proposals, config.eps_consensus):
            return GameResult(tuple(rounds), new_centroid, True, "consensus")
        centroid = new_centroid
        previous = proposals

    return GameResult(tuple(rounds), rounds[-1].centroid, False, "round_limit")
