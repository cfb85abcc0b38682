"""Artifact writers and parsers for run outputs.

All tabular outputs are CSV; transcripts are newline-delimited JSON
records in the wire format. Files are written to a temp path and
renamed into place, so aborted runs never leave partial artifacts.
Floats are serialized with repr and round-trip exactly.

Schemas (one header row each):

- trials CSV: trial, mode, rounds_used, converged, setpoint_<device>...,
  dg_total, bess_total, normalized_<agent>..., fairness
- summary CSV: mode, trials, mean_rounds, converged, success_<agent>...,
  variance_<agent>..., mean_fairness
- trajectory CSV: round, agent, proposal_<device>..., weight,
  centroid_<device>... (weight and centroid blank in bilateral mode)
- Pareto CSV: normalized_<agentA>, normalized_<agentB>, setpoint_<device>...
- exclusivity CSV: hour, setpoint_<device>..., soc_<bess>..., objective_value
"""

from __future__ import annotations

import csv
import math
import os
from pathlib import Path
from typing import Iterable, Sequence

from .evaluation import TrialOutcome
from .model import Scenario, SetpointVector, aggregate
from .objectives import HourlyDispatch
from .sessions import SessionMessage, SessionResult
from .wire import decode_message, encode_message


def _atomic_write(path: Path, write_body) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as handle:
        write_body(handle)
    os.replace(tmp, path)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    def body(handle) -> None:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])

    _atomic_write(path, body)


def read_csv_rows(path: Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def write_trials_csv(
    path: Path,
    scenario: Scenario,
    results: Sequence[SessionResult],
    outcomes: Sequence[TrialOutcome],
    fairness_values: Sequence[float | None],
) -> None:
    devices = scenario.conflicting_devices()
    agents = sorted(outcomes[0].normalized) if outcomes else []
    header = (
        ["trial", "mode", "rounds_used", "converged"]
        + [f"setpoint_{d}" for d in devices]
        + ["dg_total", "bess_total"]
        + [f"normalized_{a}" for a in agents]
        + ["fairness"]
    )
    rows = []
    for outcome, result, fair in zip(outcomes, results, fairness_values):
        dg_total, bess_total = aggregate(outcome.resolution, scenario)
        rows.append(
            [outcome.trial, outcome.mode, result.rounds_used, result.converged]
            + [outcome.resolution[d] for d in devices]
            + [dg_total, bess_total]
            + [outcome.normalized[a] for a in agents]
            + [fair if fair is not None else ""]
        )
    write_csv(path, header, rows)


def write_summary_csv(path: Path, rows: Sequence[dict]) -> None:
    if not rows:
        raise ValueError("summary needs at least one mode row")
    agents = sorted(
        {a for row in rows for a in row.get("success", {})}
    )
    header = (
        ["mode", "trials", "mean_rounds", "converged"]
        + [f"success_{a}" for a in agents]
        + [f"variance_{a}" for a in agents]
        + ["mean_fairness"]
    )
    table = []
    for row in rows:
        table.append(
            [row["mode"], row["trials"], row["mean_rounds"], row["converged"]]
            + [row["success"].get(a, "") for a in agents]
            + [row["variance"].get(a, "") for a in agents]
            + [row["mean_fairness"] if row["mean_fairness"] is not None else ""]
        )
    write_csv(path, header, table)


def write_trajectory_csv(
    path: Path, scenario: Scenario, result: SessionResult
) -> None:
    devices = scenario.conflicting_devices()
    header = (
        ["round", "agent"]
        + [f"proposal_{d}" for d in devices]
        + ["weight"]
        + [f"centroid_{d}" for d in devices]
    )
    rows: list[list] = []
    if result.rounds:
        for record in result.rounds:
            for agent in sorted(record.proposals):
                weight = record.weights[agent]
                rows.append(
                    [record.round, agent]
                    + [record.proposals[agent][d] for d in devices]
                    + ["inf" if math.isinf(weight) else weight]
                    + [record.centroid[d] for d in devices]
                )
    else:  # bilateral: offers straight from the transcript
        for msg in result.transcript:
            if msg.kind in ("initial_proposal", "counter_offer"):
                assert msg.setpoints is not None
                rows.append(
                    [msg.round, msg.sender]
                    + [msg.setpoints[d] for d in devices]
                    + [""]
                    + ["" for _ in devices]
                )
    write_csv(path, header, rows)


def write_transcript(path: Path, transcript: Sequence[SessionMessage]) -> None:
    def body(handle) -> None:
        for msg in transcript:
            handle.write(encode_message(msg) + "\n")

    _atomic_write(path, body)


def read_transcript(path: Path) -> list[SessionMessage]:
    with open(path, encoding="utf-8") as handle:
        return [decode_message(line) for line in handle if line.strip()]


def write_pareto_csv(
    path: Path,
    scenario: Scenario,
    agent_a: str,
    agent_b: str,
    points: Sequence[tuple[float, float, SetpointVector]],
) -> None:
    devices = scenario.conflicting_devices()
    header = [f"normalized_{agent_a}", f"normalized_{agent_b}"] + [
        f"setpoint_{d}" for d in devices
    ]
    rows = [[a, b] + [x[d] for d in devices] for a, b, x in points]
    write_csv(path, header, rows)


def write_exclusivity_csv(
    path: Path, scenario: Scenario, dispatches: Sequence[HourlyDispatch]
) -> None:
    devices = scenario.conflicting_devices()
    bess = [d.id for d in scenario.bess_devices()]
    header = (
        ["hour"]
        + [f"setpoint_{d}" for d in devices]
        + [f"soc_{d}" for d in bess]
        + ["objective_value"]
    )
    rows = []
    for dispatch in dispatches:
        rows.append(
            [dispatch.hour]
            + [dispatch.setpoints[d] for d in devices]
            + [dispatch.state[d] for d in bess]
            + [dispatch.objective_value]
        )
    write_csv(path, header, rows)
