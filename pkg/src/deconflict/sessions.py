"""Deconfliction session engines and the session message schema.

Three modes share one message vocabulary:

- bilateral: two agents exchange offers directly; each round both see
  the counterpart's latest offer and either accept it or counter toward
  the midpoint of the current pair. Offers within the consensus
  tolerance also close the deal. The resolution is always the midpoint
  of the final pair of offers.
- mediated: a mediator runs the weighted-consensus loop, additionally
  broadcasting each centroid with a per-agent suggested flexibility and
  collecting accept votes; unanimous acceptance resolves on the current
  centroid. An agent that votes accept stands on its previous offer for
  that round's weighting.
- procedural: the deterministic weighted-consensus game with no voting,
  wrapped here so that all modes produce the same transcript and result
  shapes.

Round numbering: bilateral rounds are 1-based exchanges (round 1 is the
initial offers). Mediated and procedural sessions number their initial
proposals round 0 and count response rounds from 1, mirroring the game
records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .config import GameConfig
from .consensus import (
    AgentFault,
    RoundRecord,
    collect_initial_proposals,
    flexibility_weight,
    run_procedural_game,
    validate_proposal,
    weighted_centroid,
)
from .model import FeasibleSet, SetpointVector, distance
from .strategies import NegotiationContext, Strategy

MESSAGE_KINDS = (
    "initial_proposal",
    "counter_offer",
    "consensus_update",
    "accept",
    "reject",
    "final_resolution",
)

# kinds that must carry setpoints; accept/reject must not.
_SETPOINT_KINDS = ("counter_offer", "consensus_update", "final_resolution")
_BARE_KINDS = ("accept", "reject")

MAX_JUSTIFICATION_LENGTH = 4000


@dataclass(frozen=True)
class SessionMessage:
    """One protocol message within a deconfliction session.

    An initial_proposal carries setpoints when sent by an agent; without
    setpoints it is the engine's solicitation (wire protocol only).
    """

    session_id: str
    round: int
    sender: str
    kind: str
    setpoints: SetpointVector | None = None
    flexibility: float | None = None
    justification: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in MESSAGE_KINDS:
            raise ValueError(f"unknown message kind {self.kind!r}")
        if self.round < 0:
            raise ValueError("round must be >= 0")
        if self.kind in _SETPOINT_KINDS and self.setpoints is None:
            raise ValueError(f"{self.kind} requires setpoints")
        if self.kind in _BARE_KINDS and self.setpoints is not None:
            raise ValueError(f"{self.kind} must not carry setpoints")
        if self.flexibility is not None and not (0.0 <= self.flexibility <= 1.0):
            raise ValueError(f"flexibility {self.flexibility} outside [0, 1]")
        if (
            self.justification is not None
            and len(self.justification) > MAX_JUSTIFICATION_LENGTH
        ):
            raise ValueError("justification too long")


@dataclass(frozen=True)
class SessionResult:
    """Outcome of one deconfliction session."""

    mode: str  # "bilateral" | "mediated" | "procedural"
    transcript: tuple[SessionMessage, ...]
    rounds_used: int
    resolution: SetpointVector
    converged: bool
    rounds: tuple[RoundRecord, ...] = ()  # centroid trajectory, where applicable


def _check_transcript(messages: Sequence[SessionMessage]) -> tuple[SessionMessage, ...]:
    last = 0
    for msg in messages:
        if msg.round < last:
            raise ValueError("transcript rounds must be non-decreasing")
        last = msg.round
    return tuple(messages)


def _midpoint(a: SetpointVector, b: SetpointVector) -> SetpointVector:
    return (a + b).scale(0.5)


def run_bilateral(
    a: Strategy,
    b: Strategy,
    fs: FeasibleSet,
    config: GameConfig,
    session_id: str = "bilateral",
) -> SessionResult:
    """Direct two-agent negotiation by alternating offers."""
    if a.name == b.name:
        raise ValueError("bilateral agents need distinct names")
    transcript: list[SessionMessage] = []
    offers: dict[str, SetpointVector] = {}
    for strategy in (a, b):
        ctx = NegotiationContext(feasible=fs, round=0)
        try:
            offer = strategy.initial_proposal(ctx)
        except AgentFault:
            raise
        except Exception as exc:
            raise AgentFault(strategy.name, f"initial proposal failed: {exc}") from exc
        validate_proposal(strategy.name, offer, fs)
        offers[strategy.name] = offer
        transcript.append(
            SessionMessage(session_id, 1, strategy.name, "initial_proposal", offer)
        )
    initial = dict(offers)

    converged = False
    rounds_used = 1
    if distance(offers[a.name], offers[b.name]) <= config.eps_consensus:
        converged = True
    else:
        for k in range(2, config.max_rounds + 1):
            rounds_used = k
            responses = {}
            for strategy, other in ((a, b), (b, a)):
                ctx = NegotiationContext(
                    feasible=fs,
                    round=k - 1,  # concession index: first counter uses f_1
                    reference=offers[other.name],
                    own_initial=initial[strategy.name],
                    own_previous=offers[strategy.name],
                )
                try:
                    responses[strategy.name] = strategy.respond(ctx)
                except AgentFault:
                    raise
                except Exception as exc:
                    raise AgentFault(strategy.name, f"respond failed: {exc}") from exc
            accepted = [name for name, r in responses.items() if r.accept]
            if accepted:
                for name in accepted:
                    transcript.append(
                        SessionMessage(session_id, k, name, "accept")
                    )
                converged = True
                break
            for strategy in (a, b):
                response = responses[strategy.name]
                validate_proposal(strategy.name, response.setpoints, fs)
                offers[strategy.name] = response.setpoints
                transcript.append(
                    SessionMessage(
                        session_id,
                        k,
                        strategy.name,
                        "counter_offer",
                        response.setpoints,
                        flexibility=response.flexibility,
                    )
                )
            if distance(offers[a.name], offers[b.name]) <= config.eps_consensus:
                converged = True
                break

    resolution = _midpoint(offers[a.name], offers[b.name])
    transcript.append(
        SessionMessage(session_id, rounds_used, "session", "final_resolution", resolution)
    )
    return SessionResult(
        mode="bilateral",
        transcript=_check_transcript(transcript),
        rounds_used=rounds_used,
        resolution=resolution,
        converged=converged,
    )


def run_mediated(
    agents: Sequence[Strategy],
    fs: FeasibleSet,
    config: GameConfig,
    session_id: str = "mediated",
) -> SessionResult:
    """Mediator-coordinated consensus with acceptance voting."""
    if len(agents) < 2:
        raise ValueError("mediated session needs at least two agents")
    names = [s.name for s in agents]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate agent names: {names}")

    transcript: list[SessionMessage] = []
    initial = collect_initial_proposals(agents, fs)
    for name, proposal in initial.items():
        transcript.append(
            SessionMessage(session_id, 0, name, "initial_proposal", proposal)
        )
    weights = {name: 1.0 for name in initial}
    centroid = weighted_centroid(initial, weights)
    rounds = [RoundRecord(0, initial, weights, centroid)]
    previous = dict(initial)

    def finish(
        resolution: SetpointVector, converged: bool, rounds_used: int
    ) -> SessionResult:
        transcript.append(
            SessionMessage(
                session_id, rounds_used, "mediator", "final_resolution", resolution
            )
        )
        return SessionResult(
            mode="mediated",
            transcript=_check_transcript(transcript),
            rounds_used=rounds_used,
            resolution=resolution,
            converged=converged,
            rounds=tuple(rounds),
        )

    if _all_close(initial.values(), config.eps_consensus):
        return finish(centroid, True, 0)

    for k in range(1, config.max_rounds + 1):
        total_weight = sum(weights.values())
        responses = {}
        for strategy in agents:
            suggested = 1.0 - weights[strategy.name] / total_weight
            transcript.append(
                SessionMessage(
                    session_id,
                    k,
                    "mediator",
                    "consensus_update",
                    centroid,
                    flexibility=suggested,
                )
            )
            ctx = NegotiationContext(
                feasible=fs,
                round=k,
                reference=centroid,
                own_initial=initial[strategy.name],
                own_previous=previous[strategy.name],
                suggested_flexibility=suggested,
            )
            try:
                responses[strategy.name] = strategy.respond(ctx)
            except AgentFault:
                raise
            except Exception as exc:
                raise AgentFault(strategy.name, f"respond failed: {exc}") from exc

        if all(r.accept for r in responses.values()):
            for name in sorted(responses):
                transcript.append(SessionMessage(session_id, k, name, "accept"))
            return finish(centroid, True, k)

        proposals: dict[str, SetpointVector] = {}
        for strategy in agents:
            response = responses[strategy.name]
            if response.accept:
                # an accepting agent stands on its previous offer
                transcript.append(
                    SessionMessage(session_id, k, strategy.name, "accept")
                )
                proposals[strategy.name] = previous[strategy.name]
            else:
                validate_proposal(strategy.name, response.setpoints, fs)
                proposals[strategy.name] = response.setpoints
                transcript.append(
                    SessionMessage(
                        session_id,
                        k,
                        strategy.name,
                        "counter_offer",
                        response.setpoints,
                        flexibility=response.flexibility,
                    )
                )

        weights = {
            name: flexibility_weight(
                initial[name], proposals[name], centroid, config.eps_weight
            )
            for name in proposals
        }
        new_centroid = weighted_centroid(proposals, weights)
        rounds.append(RoundRecord(k, proposals, weights, new_centroid))
        if any(math.isinf(w) for w in weights.values()):
            return finish(new_centroid, True, k)
        if _all_close(proposals.values(), config.eps_consensus):
            return finish(new_centroid, True, k)
        centroid = new_centroid
        previous = proposals

    return finish(rounds[-1].centroid, False, config.max_rounds)


def run_procedural_session(
    agents: Sequence[Strategy],
    fs: FeasibleSet,
    config: GameConfig,
    session_id: str = "procedural",
) -> SessionResult:
    """Procedural game wrapped into the common session shape."""
    game = run_procedural_game(agents, fs, config)
    transcript: list[SessionMessage] = []
    for record in game.rounds:
        if record.round == 0:
            for name in sorted(record.proposals):
                transcript.append(
                    SessionMessage(
                        session_id, 0, name, "initial_proposal", record.proposals[name]
                    )
                )
        else:
            prev_centroid = game.rounds[record.round - 1].centroid
            transcript.append(
                SessionMessage(
                    session_id, record.round, "deconflictor", "consensus_update", prev_centroid
                )
            )
            for name in sorted(record.proposals):
                transcript.append(
                    SessionMessage(
                        session_id,
                        record.round,
                        name,
                        "counter_offer",
                        record.proposals[name],
                    )
                )
    rounds_used = game.rounds[-1].round
    transcript.append(
        SessionMessage(
            session_id, rounds_used, "deconflictor", "final_resolution", game.resolution
        )
    )
    return SessionResult(
        mode="procedural",
        transcript=_check_transcript(transcript),
        rounds_used=rounds_used,
        resolution=game.resolution,
        converged=game.converged,
        rounds=game.rounds,
    )


def run_session(
    agents: Sequence[Strategy],
    fs: FeasibleSet,
    config: GameConfig,
    session_id: str | None = None,
) -> SessionResult:
    """Dispatch to the engine selected by config.mode."""
    sid = session_id if session_id is not None else config.mode
    if config.mode == "bilateral":
        if len(agents) != 2:
            raise ValueError("bilateral mode requires exactly two agents")
        return run_bilateral(agents[0], agents[1], fs, config, sid)
    if config.mode == "mediated":
        return run_mediated(agents, fs, config, sid)
    return run_procedural_session(agents, fs, config, sid)


def _all_close(vectors, eps: float) -> bool:
    vecs = list(vectors)
    return all(
        distance(vecs[i], vecs[j]) <= eps
        for i in range(len(vecs))
        for j in range(i + 1, len(vecs))
    )
