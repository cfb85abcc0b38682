"""Core domain types for device fleets, setpoint vectors, and scenarios.

Unit conventions:
- Power: MW (positive = injection/discharge, negative = BESS charging)
- Energy: MWh
- Prices: $/kWh
- Time: hourly steps over a 24-hour horizon

Scenario config files carry device ratings in kW/kWh; they are converted
to MW/MWh at ingestion.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

HOURS = 24

DEVICE_KINDS = ("DG", "PV", "BESS")


class ScenarioError(ValueError):
    """Raised when scenario data violates a structural invariant."""


@dataclass(frozen=True)
class DeviceSpec:
    """One controllable device: id, grid bus, kind, and power/energy ratings."""

    id: str
    bus: int
    kind: str  # "DG" | "PV" | "BESS"
    p_max: float  # MW, three-phase active power limit
    capacity: float | None = None  # MWh, BESS only

    def __post_init__(self) -> None:
        if self.kind not in DEVICE_KINDS:
            raise ScenarioError(f"unknown device kind {self.kind!r} for {self.id}")
        if not (self.p_max > 0):
            raise ScenarioError(f"device {self.id}: p_max must be > 0")
        if self.kind == "BESS":
            if self.capacity is None or not (self.capacity > 0):
                raise ScenarioError(f"BESS {self.id}: capacity must be > 0")
        elif self.capacity is not None:
            raise ScenarioError(f"device {self.id}: capacity only valid for BESS")


@dataclass(frozen=True)
class SetpointVector:
    """Ordered real-valued dispatch decision over the conflicting devices.

    Device order is canonical (sorted by id) so that all distance and
    centroid math operates on a fixed vector layout.
    """

    devices: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.devices) != len(self.values):
            raise ValueError("devices and values length mismatch")
        if tuple(sorted(self.devices)) != self.devices:
            raise ValueError("devices must be in sorted (canonical) order")
        if any(not math.isfinite(v) for v in self.values):
            raise ValueError("setpoint values must be finite")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float]) -> "SetpointVector":
        devices = tuple(sorted(mapping))
        return cls(devices, tuple(float(mapping[d]) for d in devices))

    @classmethod
    def from_array(cls, devices: tuple[str, ...], arr: np.ndarray) -> "SetpointVector":
        return cls(devices, tuple(float(v) for v in arr))

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.devices, self.values))

    def to_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def __getitem__(self, device: str) -> float:
        try:
            return self.values[self.devices.index(device)]
        except ValueError:
            raise KeyError(device) from None

    def replace(self, **updates: float) -> "SetpointVector":
        vals = self.as_dict()
        for dev, val in updates.items():
            if dev not in vals:
                raise KeyError(dev)
            vals[dev] = val
        return SetpointVector.from_mapping(vals)

    def _check_same_devices(self, other: "SetpointVector") -> None:
        if self.devices != other.devices:
            raise ValueError(
                f"mismatched device sets: {self.devices} vs {other.devices}"
            )

    def __add__(self, other: "SetpointVector") -> "SetpointVector":
        self._check_same_devices(other)
        return SetpointVector(
            self.devices, tuple(a + b for a, b in zip(self.values, other.values))
        )

    def __sub__(self, other: "SetpointVector") -> "SetpointVector":
        self._check_same_devices(other)
        return SetpointVector(
            self.devices, tuple(a - b for a, b in zip(self.values, other.values))
        )

    def scale(self, factor: float) -> "SetpointVector":
        return SetpointVector(self.devices, tuple(factor * v for v in self.values))


def distance(a: SetpointVector, b: SetpointVector) -> float:
    """Euclidean distance between two setpoint vectors (MW)."""
    a._check_same_devices(b)
    return float(np.linalg.norm(a.to_array() - b.to_array()))


@dataclass(frozen=True)
class FeasibleSet:
    """Per-device box bounds on setpoints (MW)."""

    lower: SetpointVector
    upper: SetpointVector

    def __post_init__(self) -> None:
        self.lower._check_same_devices(self.upper)
        for dev, lo, up in zip(self.lower.devices, self.lower.values, self.upper.values):
            if lo > up:
                raise ScenarioError(f"device {dev}: lower bound {lo} > upper {up}")

    @property
    def devices(self) -> tuple[str, ...]:
        return self.lower.devices

    def contains(self, x: SetpointVector, tol: float = 1e-9) -> bool:
        x._check_same_devices(self.lower)
        return all(
            lo - tol <= v <= up + tol
            for v, lo, up in zip(x.values, self.lower.values, self.upper.values)
        )

    def first_violation(self, x: SetpointVector, tol: float = 1e-9) -> str | None:
        """Id of the first device whose bound is violated, or None."""
        x._check_same_devices(self.lower)
        for dev, v, lo, up in zip(
            x.devices, x.values, self.lower.values, self.upper.values
        ):
            if v < lo - tol or v > up + tol:
                return dev
        return None

    def clip(self, x: SetpointVector) -> SetpointVector:
        arr = np.clip(x.to_array(), self.lower.to_array(), self.upper.to_array())
        return SetpointVector.from_array(self.devices, arr)

    def center(self) -> SetpointVector:
        arr = (self.lower.to_array() + self.upper.to_array()) / 2.0
        return SetpointVector.from_array(self.devices, arr)

    def corners(self) -> Iterator[SetpointVector]:
        """All 2^n corner points of the box."""
        n = len(self.devices)
        lo, up = self.lower.values, self.upper.values
        for mask in range(2**n):
            vals = tuple(
                up[i] if mask & (1 << i) else lo[i] for i in range(n)
            )
            yield SetpointVector(self.devices, vals)


@dataclass(frozen=True)
class BessState:
    """State of charge per BESS device, dimensionless in [0, 1]."""

    soc: Mapping[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "soc", dict(self.soc))
        for dev, s in self.soc.items():
            if not (0.0 <= s <= 1.0):
                raise ScenarioError(f"soc[{dev}]={s} outside [0, 1]")

    def __getitem__(self, device: str) -> float:
        return self.soc[device]


@dataclass(frozen=True)
class Scenario:
    """Device fleet plus the 24-hour price/PV/load context.

    price carries the hourly grid price, price_avg its arithmetic mean
    (validated to 1e-9), dg_cost the DG operational cost coefficient,
    pv_profile per-unit PV availability, and load_profile the feeder
    load in MW (informational; it does not enter the cost objective).
    """

    name: str
    devices: tuple[DeviceSpec, ...]
    price: tuple[float, ...]  # $/kWh
    price_avg: float  # $/kWh
    dg_cost: float  # $/kWh
    pv_profile: tuple[float, ...]  # per-unit of PV p_max
    load_profile: tuple[float, ...]  # MW
    initial_soc: BessState
    step_hours: float = 1.0

    def __post_init__(self) -> None:
        ids = [d.id for d in self.devices]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate device ids")
        for profile, label in (
            (self.price, "price"),
            (self.pv_profile, "pv_profile"),
            (self.load_profile, "load_profile"),
        ):
            if len(profile) != HOURS:
                raise ScenarioError(f"{label} must have {HOURS} entries")
            if any(not math.isfinite(v) for v in profile):
                raise ScenarioError(f"{label} entries must be finite")
        if any(not (0.0 <= v <= 1.0) for v in self.pv_profile):
            raise ScenarioError("pv_profile entries must lie in [0, 1]")
        mean_price = sum(self.price) / HOURS
        if abs(mean_price - self.price_avg) > 1e-9:
            raise ScenarioError(
                f"price_avg {self.price_avg} != mean(price) {mean_price}"
            )
        if not (self.step_hours > 0):
            raise ScenarioError("step_hours must be > 0")
        for dev in self.bess_devices():
            if dev.id not in self.initial_soc.soc:
                raise ScenarioError(f"initial_soc missing BESS {dev.id}")

    def device(self, device_id: str) -> DeviceSpec:
        for dev in self.devices:
            if dev.id == device_id:
                return dev
        raise KeyError(device_id)

    def conflicting_devices(self) -> tuple[str, ...]:
        """Canonically ordered negotiable devices (DG and BESS; PV is fixed)."""
        return tuple(sorted(d.id for d in self.devices if d.kind != "PV"))

    def bess_devices(self) -> tuple[DeviceSpec, ...]:
        return tuple(d for d in self.devices if d.kind == "BESS")

    def pv_devices(self) -> tuple[DeviceSpec, ...]:
        return tuple(d for d in self.devices if d.kind == "PV")

    def pv_output(self, hour: int) -> float:
        """Total fixed PV injection at the given hour (MW)."""
        _check_hour(hour)
        return self.pv_profile[hour] * sum(d.p_max for d in self.pv_devices())


def _check_hour(hour: int) -> None:
    if not (0 <= hour < HOURS):
        raise ValueError(f"hour {hour} out of range 0..{HOURS - 1}")


def build_feasible_set(scenario: Scenario, hour: int, state: BessState) -> FeasibleSet:
    """Box bounds for the conflicting devices at one hour.

    DG: [0, p_max].  BESS: discharge capped by stored energy, charging
    capped by remaining headroom (lossless energy model), both within
    the power rating.
    """
    _check_hour(hour)
    known = {d.id for d in scenario.devices}
    for dev_id in state.soc:
        if dev_id not in known:
            raise ScenarioError(f"unknown device in state: {dev_id}")
    lower: dict[str, float] = {}
    upper: dict[str, float] = {}
    for dev_id in scenario.conflicting_devices():
        dev = scenario.device(dev_id)
        if dev.kind == "DG":
            lower[dev_id] = 0.0
            upper[dev_id] = dev.p_max
        else:  # BESS
            if dev_id not in state.soc:
                raise ScenarioError(f"state missing BESS {dev_id}")
            soc = state[dev_id]
            assert dev.capacity is not None
            upper[dev_id] = min(dev.p_max, soc * dev.capacity / scenario.step_hours)
            lower[dev_id] = -min(
                dev.p_max, (1.0 - soc) * dev.capacity / scenario.step_hours
            )
    return FeasibleSet(
        SetpointVector.from_mapping(lower), SetpointVector.from_mapping(upper)
    )


def aggregate(x: SetpointVector, scenario: Scenario) -> tuple[float, float]:
    """Sum setpoints by device kind: (dg_total, bess_total) in MW."""
    expected = scenario.conflicting_devices()
    if x.devices != expected:
        raise ValueError(f"setpoints cover {x.devices}, expected {expected}")
    dg_total = 0.0
    bess_total = 0.0
    for dev_id, value in zip(x.devices, x.values):
        if scenario.device(dev_id).kind == "DG":
            dg_total += value
        else:
            bess_total += value
    return dg_total, bess_total


# -- scenario ingestion -------------------------------------------------

_DATA_DIR = Path(__file__).parent / "data"

BUNDLED_SCENARIOS = {
    "default": _DATA_DIR / "default_scenario.toml",
    "evening-peak": _DATA_DIR / "evening_peak.toml",
}


def load_scenario(source: str | Path) -> Scenario:
    """Load a scenario from a TOML file or a bundled scenario name."""
    path = BUNDLED_SCENARIOS.get(str(source), Path(source))
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {source}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"invalid scenario file {source}: {exc}") from None
    return _scenario_from_dict(raw, default_name=path.stem)


def default_scenario() -> Scenario:
    """The bundled example fleet (two DGs, three PVs, two BESS)."""
    return load_scenario("default")


def _scenario_from_dict(raw: dict, default_name: str) -> Scenario:
    try:
        devices = tuple(
            DeviceSpec(
                id=str(d["id"]),
                bus=int(d["bus"]),
                kind=str(d["kind"]),
                p_max=float(d["p_max_kw"]) / 1000.0,
                capacity=(
                    float(d["capacity_kwh"]) / 1000.0 if "capacity_kwh" in d else None
                ),
            )
            for d in raw["devices"]
        )
        profiles = raw["profiles"]
        price = tuple(float(v) for v in profiles["price"])
        price_avg = (
            float(profiles["price_avg"])
            if "price_avg" in profiles
            else sum(price) / len(price)
        )
        scenario = Scenario(
            name=str(raw.get("name", default_name)),
            devices=devices,
            price=price,
            price_avg=price_avg,
            dg_cost=float(profiles["dg_cost"]),
            pv_profile=tuple(float(v) for v in profiles["pv"]),
            load_profile=tuple(float(v) for v in profiles["load_mw"]),
            initial_soc=BessState(
                {str(k): float(v) for k, v in raw["soc"]["initial"].items()}
            ),
            step_hours=float(raw.get("step_hours", 1.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"malformed scenario data: {exc}") from exc
    return scenario
