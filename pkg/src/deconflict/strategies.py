"""Pluggable agent strategies.

A strategy represents one application in a deconfliction session. It
sees only its own objective and the shared feasible box, never the other
agents' objectives, and it interacts with the engines through exactly
two calls: an initial proposal and a per-round response to the current
reference point (the counterpart's offer in bilateral mode, the centroid
otherwise).

Strategies are stateless: everything they need per round arrives in the
context, so replaying a session with the same inputs is bit-identical.
"""

from __future__ import annotations

import abc
import random
from dataclasses import dataclass
from typing import Sequence

from .compromise import CompromiseRequest, balanced_compromise, flexibility_to_radius
from .model import FeasibleSet, Scenario, SetpointVector, distance
from .objectives import (
    ObjectiveSpec,
    cost_objective,
    objective_bounds,
    optimal_setpoints,
    resilience_objective,
)

DEFAULT_ACCEPTANCE_THRESHOLD = 0.35


@dataclass(frozen=True)
class NegotiationContext:
    """Everything an agent may inspect when producing a proposal."""

    feasible: FeasibleSet
    round: int
    reference: SetpointVector | None = None  # counterpart offer or centroid
    own_initial: SetpointVector | None = None
    own_previous: SetpointVector | None = None
    suggested_flexibility: float | None = None


@dataclass(frozen=True)
class StrategyResponse:
    setpoints: SetpointVector
    flexibility: float
    accept: bool


class Strategy(abc.ABC):
    """Interface between the deconfliction engines and one application."""

    name: str

    @abc.abstractmethod
    def initial_proposal(self, ctx: NegotiationContext) -> SetpointVector:
        """The agent's opening setpoint request."""

    @abc.abstractmethod
    def respond(self, ctx: NegotiationContext) -> StrategyResponse:
        """Counter-offer toward ctx.reference, with flexibility and accept flag."""


def _normalized_value(
    obj: ObjectiveSpec, fs: FeasibleSet, x: SetpointVector
) -> float:
    j_min, j_max = objective_bounds(obj, fs)
    if j_max - j_min <= 0.0:
        return 0.0
    return (obj.evaluate(x) - j_min) / (j_max - j_min)


class ScheduledFlexibilityStrategy(Strategy):
    """Compromise-tool strategy driven by a per-round flexibility schedule.

    Opens at its objective's optimum. Each round it concedes toward the
    reference by the scheduled flexibility: the new offer minimizes the
    private objective inside the ball around the reference whose radius
    is (1 - flexibility) times the current distance of its own stance.
    Accepts a reference whose normalized objective is within the
    acceptance threshold of its optimum.
    """

    def __init__(
        self,
        name: str,
        objective: ObjectiveSpec,
        schedule: Sequence[float],
        acceptance_threshold: float = DEFAULT_ACCEPTANCE_THRESHOLD,
    ):
        if not schedule:
            raise ValueError("schedule must not be empty")
        if any(not (0.0 <= f <= 1.0) for f in schedule):
            raise ValueError("schedule values must lie in [0, 1]")
        self.name = name
        self.objective = objective
        self.schedule = tuple(float(f) for f in schedule)
        self.acceptance_threshold = acceptance_threshold

    def flexibility_at(self, round_index: int) -> float:
        # rounds run from 1; the schedule's last value holds thereafter
        return self.schedule[min(round_index - 1, len(self.schedule) - 1)]

    def initial_proposal(self, ctx: NegotiationContext) -> SetpointVector:
        return optimal_setpoints(self.objective, ctx.feasible)

    def respond(self, ctx: NegotiationContext) -> StrategyResponse:
        assert ctx.reference is not None and ctx.own_previous is not None
        flexibility = self.flexibility_at(ctx.round)
        accept = (
            _normalized_value(self.objective, ctx.feasible, ctx.reference)
            <= self.acceptance_threshold
        )
        d = distance(ctx.own_previous, ctx.reference)
        request = CompromiseRequest(
            objective=self.objective,
            feasible=ctx.feasible,
            consensus=ctx.reference,
            desired=ctx.own_previous,
            radius=flexibility_to_radius(flexibility, d),
        )
        return StrategyResponse(balanced_compromise(request), flexibility, accept)


class StubbornStrategy(Strategy):
    """Re-proposes its optimum every round and never accepts."""

    def __init__(self, name: str, objective: ObjectiveSpec):
        self.name = name
        self.objective = objective

    def initial_proposal(self, ctx: NegotiationContext) -> SetpointVector:
        return optimal_setpoints(self.objective, ctx.feasible)

    def respond(self, ctx: NegotiationContext) -> StrategyResponse:
        assert ctx.own_initial is not None
        return StrategyResponse(ctx.own_initial, 0.0, False)


class MirrorStrategy(Strategy):
    """Proposes the reference itself from round one on.

    Useful as a degenerate test agent: in the procedural game it hits
    the previous centroid and triggers the infinite-weight rule.
    """

    def __init__(self, name: str, objective: ObjectiveSpec):
        self.name = name
        self.objective = objective

    def initial_proposal(self, ctx: NegotiationContext) -> SetpointVector:
        return optimal_setpoints(self.objective, ctx.feasible)

    def respond(self, ctx: NegotiationContext) -> StrategyResponse:
        assert ctx.reference is not None
        return StrategyResponse(ctx.feasible.clip(ctx.reference), 1.0, True)


class ThresholdGuardStrategy(Strategy):
    """Wraps a strategy and keeps the guarded aggregate from flipping sign.

    guard="charging" clamps positive BESS components to zero (the
    aggregate stays <= 0); guard="discharging" clamps negative ones.
    Componentwise projection only ever touches BESS devices.
    """

    def __init__(self, base: Strategy, bess_devices: Sequence[str], guard: str):
        if guard not in ("charging", "discharging"):
            raise ValueError(f"unknown guard {guard!r}")
        self.name = base.name
        self.base = base
        self.bess_devices = tuple(bess_devices)
        self.guard = guard

    def _clamp(self, x: SetpointVector, fs: FeasibleSet) -> SetpointVector:
        aggregate = sum(x[d] for d in self.bess_devices)
        if self.guard == "charging" and aggregate <= 0.0:
            return x
        if self.guard == "discharging" and aggregate >= 0.0:
            return x
        updates: dict[str, float] = {}
        for dev in self.bess_devices:
            value = x[dev]
            if self.guard == "charging" and value > 0.0:
                updates[dev] = max(fs.lower[dev], 0.0)
            elif self.guard == "discharging" and value < 0.0:
                updates[dev] = min(fs.upper[dev], 0.0)
        return x.replace(**updates) if updates else x

    def initial_proposal(self, ctx: NegotiationContext) -> SetpointVector:
        return self._clamp(self.base.initial_proposal(ctx), ctx.feasible)

    def respond(self, ctx: NegotiationContext) -> StrategyResponse:
        response = self.base.respond(ctx)
        return StrategyResponse(
            self._clamp(response.setpoints, ctx.feasible),
            response.flexibility,
            response.accept,
        )


def geometric_schedule(f0: float, decay: float, rounds: int) -> tuple[float, ...]:
    """Flexibility schedule f_k = f0 * decay^k for rounds k = 1..rounds."""
    return tuple(min(1.0, max(0.0, f0 * decay**k)) for k in range(1, rounds + 1))


def jittered_schedule(
    schedule: Sequence[float], rng: random.Random, jitter: float
) -> tuple[float, ...]:
    """Perturb a schedule multiplicatively for trial-to-trial variation."""
    return tuple(
        min(1.0, max(0.0, f * (1.0 + jitter * rng.uniform(-1.0, 1.0))))
        for f in schedule
    )


def _objective_by_name(name: str, scenario: Scenario, hour: int) -> ObjectiveSpec:
    if name == "cost":
        return cost_objective(scenario, hour)
    if name == "resilience":
        return resilience_objective(scenario)
    raise ValueError(f"unknown objective {name!r}")


def build_strategy(
    name: str,
    kind: str,
    params: dict[str, str],
    scenario: Scenario,
    hour: int,
    rng: random.Random | None = None,
    jitter: float = 0.0,
) -> Strategy:
    """Construct a shipped strategy from config-style string parameters.

    Recognized kinds: "scheduled" (params: objective, f0, decay, rounds,
    schedule, threshold, guard), "stubborn" and "mirror" (params:
    objective). An rng enables per-trial schedule jitter.
    """
    objective = _objective_by_name(params.get("objective", "cost"), scenario, hour)
    strategy: Strategy
    if kind == "scheduled":
        if "schedule" in params:
            schedule: tuple[float, ...] = tuple(
                float(v) for v in params["schedule"].split(",")
            )
        else:
            schedule = geometric_schedule(
                float(params.get("f0", 0.5)),
                float(params.get("decay", 0.85)),
                int(params.get("rounds", 10)),
            )
        if rng is not None and jitter > 0.0:
            schedule = jittered_schedule(schedule, rng, jitter)
        strategy = ScheduledFlexibilityStrategy(
            name,
            objective,
            schedule,
            acceptance_threshold=float(
                params.get("threshold", DEFAULT_ACCEPTANCE_THRESHOLD)
            ),
        )
    elif kind == "stubborn":
        strategy = StubbornStrategy(name, objective)
    elif kind == "mirror":
        strategy = MirrorStrategy(name, objective)
    else:
        raise ValueError(f"unknown strategy kind {kind!r}")
    guard = params.get("guard")
    if guard:
        bess = tuple(d.id for d in scenario.bess_devices())
        strategy = ThresholdGuardStrategy(strategy, bess, guard)
    return strategy


def default_agent_pair(
    scenario: Scenario,
    hour: int,
    rounds: int = 10,
    rng: random.Random | None = None,
    jitter: float = 0.0,
    acceptance_threshold: float = DEFAULT_ACCEPTANCE_THRESHOLD,
) -> tuple[Strategy, Strategy]:
    """The shipped experiment pairing: a conceding cost agent against a
    firmer resilience agent with a decaying flexibility schedule."""
    cost_schedule = geometric_schedule(0.5, 0.85, rounds)
    resilience_schedule = geometric_schedule(0.3, 0.76, rounds)
    if rng is not None and jitter > 0.0:
        cost_schedule = jittered_schedule(cost_schedule, rng, jitter)
        resilience_schedule = jittered_schedule(resilience_schedule, rng, jitter)
    cost_agent = ScheduledFlexibilityStrategy(
        "cost",
        cost_objective(scenario, hour),
        cost_schedule,
        acceptance_threshold=acceptance_threshold,
    )
    resilience_agent = ScheduledFlexibilityStrategy(
        "resilience",
        resilience_objective(scenario),
        resilience_schedule,
        acceptance_threshold=acceptance_threshold,
    )
    return cost_agent, resilience_agent
