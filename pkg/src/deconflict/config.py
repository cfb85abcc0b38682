"""Run configuration shared by the session engines and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

MODES = ("bilateral", "mediated", "procedural")


class ConfigError(ValueError):
    """Raised for invalid run configuration."""


@dataclass(frozen=True)
class AgentConfig:
    """Declaration of one negotiating agent.

    strategy selects a shipped strategy by name ("scheduled", "stubborn")
    or "external" with a wire endpoint ("stdio:<command>" or
    "tcp:<host>:<port>"). params carries strategy parameters such as
    objective=cost, f0=0.5, decay=0.85, guard=charging.
    """

    name: str
    strategy: str = "scheduled"
    params: dict[str, str] = field(default_factory=dict)
    endpoint: str | None = None


@dataclass(frozen=True)
class GameConfig:
    """Parameters of one deconfliction run or trial batch."""

    mode: str = "procedural"
    hour: int = 19
    max_rounds: int = 10
    eps_consensus: float = 1e-3  # MW, proposal-agreement tolerance
    eps_weight: float = 1e-6  # MW, infinite-weight guard
    trials: int = 20
    seed: int = 0
    schedule_jitter: float = 0.05  # per-trial relative perturbation
    agent_timeout: float = 30.0  # seconds, external agents only
    agents: tuple[AgentConfig, ...] = ()
    output_dir: Path | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not (0 <= self.hour < 24):
            raise ConfigError(f"hour {self.hour} out of range 0..23")
        if self.eps_consensus <= 0 or self.eps_weight <= 0:
            raise ConfigError("tolerances must be positive")
