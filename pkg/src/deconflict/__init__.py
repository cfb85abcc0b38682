"""Deterministic setpoint deconfliction for applications sharing devices.

Resolves conflicting dispatch requests from autonomous application
agents over a shared DER fleet through three modes: direct bilateral
negotiation, mediated consensus, and a procedural weighted-centroid
game. Includes the compromise optimization tool the agents use, the
cost and resilience example objectives, and evaluation machinery
(success metrics, Pareto front, fairness, consistency).
"""

from .compromise import (
    CompromiseRequest,
    balanced_compromise,
    flexibility_to_radius,
)
from .config import AgentConfig, ConfigError, GameConfig
from .consensus import (
    AgentFault,
    GameResult,
    RoundRecord,
    flexibility_weight,
    run_procedural_game,
    weighted_centroid,
)
from .evaluation import (
    TrialOutcome,
    consistency,
    fairness,
    make_trial_outcome,
    normalize_objective,
    pareto_front,
    success_metric,
)
from .model import (
    BessState,
    DeviceSpec,
    FeasibleSet,
    Scenario,
    ScenarioError,
    SetpointVector,
    aggregate,
    build_feasible_set,
    default_scenario,
    distance,
    load_scenario,
)
from .objectives import (
    HourlyDispatch,
    ObjectiveSpec,
    cost_objective,
    objective_bounds,
    optimal_setpoints,
    resilience_objective,
    simulate_exclusive,
    soc_step,
)
from .sessions import (
    SessionMessage,
    SessionResult,
    run_bilateral,
    run_mediated,
    run_procedural_session,
    run_session,
)
from .strategies import (
    MirrorStrategy,
    NegotiationContext,
    ScheduledFlexibilityStrategy,
    Strategy,
    StrategyResponse,
    StubbornStrategy,
    ThresholdGuardStrategy,
    build_strategy,
    default_agent_pair,
    geometric_schedule,
    jittered_schedule,
)
from .wire import (
    ExternalStrategy,
    ProtocolError,
    WireAgentServer,
    call_external_agent,
    decode_message,
    encode_message,
    serve_stdio,
    serve_tcp,
)

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "AgentFault",
    "BessState",
    "CompromiseRequest",
    "ConfigError",
    "DeviceSpec",
    "ExternalStrategy",
    "FeasibleSet",
    "GameConfig",
    "GameResult",
    "HourlyDispatch",
    "MirrorStrategy",
    "NegotiationContext",
    "ObjectiveSpec",
    "ProtocolError",
    "RoundRecord",
    "Scenario",
    "ScenarioError",
    "ScheduledFlexibilityStrategy",
    "SessionMessage",
    "SessionResult",
    "SetpointVector",
    "Strategy",
    "StrategyResponse",
    "StubbornStrategy",
    "ThresholdGuardStrategy",
    "TrialOutcome",
    "WireAgentServer",
    "aggregate",
    "balanced_compromise",
    "build_feasible_set",
    "build_strategy",
    "call_external_agent",
    "consistency",
    "cost_objective",
    "decode_message",
    "default_agent_pair",
    "default_scenario",
    "distance",
    "encode_message",
    "fairness",
    "flexibility_to_radius",
    "flexibility_weight",
    "geometric_schedule",
    "jittered_schedule",
    "load_scenario",
    "make_trial_outcome",
    "normalize_objective",
    "objective_bounds",
    "optimal_setpoints",
    "pareto_front",
    "resilience_objective",
    "run_bilateral",
    "run_mediated",
    "run_procedural_game",
    "run_procedural_session",
    "run_session",
    "serve_stdio",
    "serve_tcp",
    "simulate_exclusive",
    "soc_step",
    "success_metric",
    "weighted_centroid",
]
