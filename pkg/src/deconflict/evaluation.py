"""Post-hoc analysis: normalization, success metric, Pareto front, fairness.

Objective values are normalized against their exact extremes over the
feasible box, so 0 is the best attainable outcome and 1 the worst; the
box midpoint (the equal-weight centroid of two opposing optima) then
normalizes to one half for every linear objective, anchoring the
success-metric baseline.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import FeasibleSet, SetpointVector
from .objectives import ObjectiveSpec, objective_bounds

_SIGN_TOL = 1e-12


@dataclass(frozen=True)
class TrialOutcome:
    """One trial's resolution with per-agent normalized objective values."""

    trial: int
    mode: str
    resolution: SetpointVector
    normalized: Mapping[str, float]

    def __post_init__(self) -> None:
        cleaned: dict[str, float] = {}
        for agent, value in self.normalized.items():
            if not (-1e-12 <= value <= 1.0 + 1e-12):
                raise ValueError(f"normalized value {value} for {agent} outside [0, 1]")
            cleaned[agent] = min(1.0, max(0.0, value))
        object.__setattr__(self, "normalized", cleaned)


def normalize_objective(
    obj: ObjectiveSpec, fs: FeasibleSet, x: SetpointVector
) -> float:
    """Sub-optimality of x in [0, 1]: 0 at the objective's optimum."""
    j_min, j_max = objective_bounds(obj, fs)
    span = j_max - j_min
    if span <= 0.0:
        return 0.0
    value = (obj.evaluate(x) - j_min) / span
    return min(1.0, max(0.0, value))


def make_trial_outcome(
    trial: int,
    mode: str,
    resolution: SetpointVector,
    objectives: Mapping[str, ObjectiveSpec],
    fs: FeasibleSet,
) -> TrialOutcome:
    normalized = {
        agent: normalize_objective(obj, fs, resolution)
        for agent, obj in objectives.items()
    }
    return TrialOutcome(trial, mode, resolution, normalized)


def success_metric(outcomes: Sequence[TrialOutcome], agent: str) -> float:
    """Mean complement of the agent's normalized sub-optimality: 1 is ideal."""
    if not outcomes:
        raise ValueError("success metric needs at least one trial")
    return sum(1.0 - outcome.normalized[agent] for outcome in outcomes) / len(outcomes)


def fairness(outcome: TrialOutcome) -> float:
    """Perpendicular distance of the two normalized values to the x = y line."""
    values = list(outcome.normalized.values())
    if len(values) != 2:
        raise ValueError("fairness is defined for two-agent outcomes")
    return abs(values[0] - values[1]) / 2**0.5


def consistency(outcomes: Sequence[TrialOutcome]) -> dict[str, float]:
    """Sample variance of each agent's normalized objective across trials."""
    if not outcomes:
        raise ValueError("consistency needs at least one trial")
    agents = sorted(outcomes[0].normalized)
    result: dict[str, float] = {}
    for agent in agents:
        values = [outcome.normalized[agent] for outcome in outcomes]
        result[agent] = statistics.variance(values) if len(values) >= 2 else 0.0
    return result


def _scalarized_argmin(
    obj_a: ObjectiveSpec, obj_b: ObjectiveSpec, w: float, fs: FeasibleSet
) -> SetpointVector:
    # Minimize w*A + (1-w)*B over the box; ties at objective crossovers
    # are broken by A's own preference so endpoints stay at box corners.
    vals: dict[str, float] = {}
    for dev, ga, gb, lo, up in zip(
        fs.devices,
        obj_a.gradient.values,
        obj_b.gradient.values,
        fs.lower.values,
        fs.upper.values,
    ):
        g = w * ga + (1.0 - w) * gb
        scale = abs(w * ga) + abs((1.0 - w) * gb)
        if abs(g) <= _SIGN_TOL * max(scale, 1.0):
            g = ga if ga != 0.0 else gb
        if g > 0:
            vals[dev] = lo
        elif g < 0:
            vals[dev] = up
        else:
            vals[dev] = lo if abs(lo) < abs(up) else up if up < 0 else max(lo, min(0.0, up))
    return SetpointVector.from_mapping(vals)


def pareto_front(
    obj_a: ObjectiveSpec,
    obj_b: ObjectiveSpec,
    fs: FeasibleSet,
    n_weights: int = 101,
) -> list[tuple[float, float, SetpointVector]]:
    """Trade-off frontier by weighted-sum scalarization.

    Sweeps a uniform weight grid, solves each single-objective problem
    in closed form, and reports (normalized A, normalized B, setpoints),
    deduplicated and sorted by normalized A. Both objectives are linear,
    so the swept minimizers recover the full convex frontier once the
    grid is dense enough to isolate every coefficient sign change
    (the default 101 weights suffice for the shipped scenarios).
    """
    if n_weights < 2:
        raise ValueError("n_weights must be >= 2")
    points: list[tuple[float, float, SetpointVector]] = []
    seen: set[tuple[float, float]] = set()
    for i in range(n_weights):
        w = i / (n_weights - 1)
        x = _scalarized_argmin(obj_a, obj_b, w, fs)
        pair = (
            normalize_objective(obj_a, fs, x),
            normalize_objective(obj_b, fs, x),
        )
        key = (round(pair[0], 9), round(pair[1], 9))
        if key not in seen:
            seen.add(key)
            points.append((pair[0], pair[1], x))
    points.sort(key=lambda p: (p[0], p[1]))
    return points
