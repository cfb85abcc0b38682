"""Application objectives over device setpoints.

Both shipped objectives are linear functionals of the setpoint vector:

- operating cost: grid purchases offset by local generation, DG fuel
  cost, and a battery-energy opportunity term priced at the average
  grid price (fixed PV output folds into the constant),
- resilience: total DG plus BESS power, so that minimizing it preserves
  fuel and builds battery reserve.

Also contains the single-objective box minimizer, exact objective
bounds, SoC dynamics, and the 24-hour exclusivity simulation in which
one application controls the fleet unopposed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from .model import (
    BessState,
    FeasibleSet,
    Scenario,
    SetpointVector,
    _check_hour,
    build_feasible_set,
)


@dataclass(frozen=True)
class ObjectiveSpec:
    """A private agent objective: evaluate(x) = dot(gradient, x) + constant."""

    name: str
    gradient: SetpointVector  # $ per MWh-equivalent, per device
    constant: float = 0.0

    def evaluate(self, x: SetpointVector) -> float:
        self.gradient._check_same_devices(x)
        return sum(g * v for g, v in zip(self.gradient.values, x.values)) + self.constant


def cost_objective(scenario: Scenario, hour: int) -> ObjectiveSpec:
    """Instantaneous operating-cost objective at the given hour.

    Per-device coefficients: DG gets dg_cost - price[hour], BESS gets
    price_avg - price[hour]. The fixed PV injection contributes the
    decision-independent constant -price[hour] * pv_output. Load does
    not enter.
    """
    _check_hour(hour)
    price = scenario.price[hour]
    coeffs: dict[str, float] = {}
    for dev_id in scenario.conflicting_devices():
        if scenario.device(dev_id).kind == "DG":
            coeffs[dev_id] = scenario.dg_cost - price
        else:
            coeffs[dev_id] = scenario.price_avg - price
    constant = -price * scenario.pv_output(hour)
    return ObjectiveSpec(
        name="cost",
        gradient=SetpointVector.from_mapping(coeffs),
        constant=constant,
    )


def resilience_objective(scenario: Scenario) -> ObjectiveSpec:
    """Reserve-preservation objective: unit weight on every DG and BESS."""
    coeffs = {dev_id: 1.0 for dev_id in scenario.conflicting_devices()}
    return ObjectiveSpec(
        name="resilience",
        gradient=SetpointVector.from_mapping(coeffs),
        constant=0.0,
    )


def _tie_break(lo: float, up: float) -> float:
    # Indifferent device: idle at 0 when feasible, else nearest bound.
    if lo <= 0.0 <= up:
        return 0.0
    return lo if abs(lo) < abs(up) else up


def optimal_setpoints(obj: ObjectiveSpec, fs: FeasibleSet) -> SetpointVector:
    """Exact minimizer of a linear objective over the feasible box."""
    obj.gradient._check_same_devices(fs.lower)
    vals: dict[str, float] = {}
    for dev, g, lo, up in zip(
        fs.devices, obj.gradient.values, fs.lower.values, fs.upper.values
    ):
        if g > 0:
            vals[dev] = lo
        elif g < 0:
            vals[dev] = up
        else:
            vals[dev] = _tie_break(lo, up)
    return SetpointVector.from_mapping(vals)


def objective_bounds(obj: ObjectiveSpec, fs: FeasibleSet) -> tuple[float, float]:
    """Exact (min, max) of a linear objective over the feasible box."""
    obj.gradient._check_same_devices(fs.lower)
    j_min = obj.constant
    j_max = obj.constant
    for g, lo, up in zip(obj.gradient.values, fs.lower.values, fs.upper.values):
        j_min += g * (lo if g > 0 else up)
        j_max += g * (up if g > 0 else lo)
    return j_min, j_max


def soc_step(state: BessState, x: SetpointVector, scenario: Scenario) -> BessState:
    """Advance SoC by one step under dispatch x (lossless energy model).

    Discharge (x > 0) drains the battery, charging (x < 0) fills it.
    Raises ValueError when x exceeds the current headroom beyond 1e-9.
    """
    new_soc = dict(state.soc)
    for dev in scenario.bess_devices():
        if dev.id not in x.devices:
            continue
        power = x[dev.id]
        soc = state[dev.id]
        assert dev.capacity is not None
        max_discharge = min(dev.p_max, soc * dev.capacity / scenario.step_hours)
        max_charge = min(dev.p_max, (1.0 - soc) * dev.capacity / scenario.step_hours)
        if power > max_discharge + 1e-9 or power < -max_charge - 1e-9:
            raise ValueError(
                f"setpoint {power} MW for {dev.id} violates SoC headroom "
                f"[{-max_charge}, {max_discharge}]"
            )
        delta = power * scenario.step_hours / dev.capacity
        new_soc[dev.id] = min(1.0, max(0.0, soc - delta))
    return BessState(new_soc)


@dataclass(frozen=True)
class HourlyDispatch:
    """One hour of an exclusivity run: dispatch, post-hour SoC, objective value."""

    hour: int
    setpoints: SetpointVector
    state: BessState
    objective_value: float


ExclusiveKind = Literal["cost", "resilience"]


def simulate_exclusive(
    scenario: Scenario, which: ExclusiveKind
) -> list[HourlyDispatch]:
    """24-hour simulation with a single application controlling the fleet.

    At each hour the feasible set is rebuilt from the evolving SoC, the
    chosen objective is minimized over it, and the SoC advances.
    """
    if which not in ("cost", "resilience"):
        raise ValueError(f"unknown exclusivity kind {which!r}")
    state = scenario.initial_soc
    result: list[HourlyDispatch] = []
    for hour in range(len(scenario.price)):
        fs = build_feasible_set(scenario, hour, state)
        obj = (
            cost_objective(scenario, hour)
            if which == "cost"
            else resilience_objective(scenario)
        )
        x = optimal_setpoints(obj, fs)
        state = soc_step(state, x, scenario)
        result.append(HourlyDispatch(hour, x, state, obj.evaluate(x)))
    return result
