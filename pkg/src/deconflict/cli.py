"""Command-line entry point: trial batches, exclusivity runs, Pareto export.

Typical invocations:

    deconflict run --mode procedural --hour 19 --trials 20 --seed 7 --out out/
    deconflict run --mode all --scenario evening-peak --out out/
    deconflict run --exclusivity --out out/
    deconflict run --pareto --hour 19 --out out/

Exit codes: 0 success, 2 config error, 3 agent failure, 4 scenario error.
The output directory may also be set via DECONFLICT_OUTPUT_DIR.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import random
import sys
from pathlib import Path
from statistics import mean
from typing import Sequence

from .config import MODES, AgentConfig, ConfigError, GameConfig
from .consensus import AgentFault
from .evaluation import (
    TrialOutcome,
    consistency,
    fairness,
    make_trial_outcome,
    pareto_front,
    success_metric,
)
from .model import Scenario, ScenarioError, build_feasible_set, load_scenario
from .objectives import (
    ObjectiveSpec,
    cost_objective,
    resilience_objective,
    simulate_exclusive,
)
from .reporting import (
    write_exclusivity_csv,
    write_pareto_csv,
    write_summary_csv,
    write_trajectory_csv,
    write_trials_csv,
    write_transcript,
)
from .sessions import run_session
from .strategies import Strategy, build_strategy, default_agent_pair
from .wire import ExternalStrategy

_MODE_OFFSET = {"bilateral": 1, "mediated": 2, "procedural": 3}


def _parse_agent_flag(text: str) -> AgentConfig:
    fields: dict[str, str] = {}
    for chunk in text.split(","):
        if "=" not in chunk:
            raise ConfigError(f"agent spec {text!r}: expected key=value, got {chunk!r}")
        key, value = chunk.split("=", 1)
        fields[key.strip()] = value.strip()
    name = fields.pop("name", None)
    if not name:
        raise ConfigError(f"agent spec {text!r} needs a name")
    strategy = fields.pop("strategy", "scheduled")
    endpoint = fields.pop("endpoint", None)
    if strategy == "external" and not endpoint:
        raise ConfigError(f"agent {name!r}: external strategy needs an endpoint")
    return AgentConfig(name=name, strategy=strategy, params=fields, endpoint=endpoint)


def _trial_rng(config: GameConfig, mode: str, trial: int) -> random.Random:
    return random.Random(
        config.seed * 1_000_003 + _MODE_OFFSET[mode] * 10_007 + trial
    )


def _agent_objective(
    spec: AgentConfig, scenario: Scenario, hour: int
) -> ObjectiveSpec | None:
    if spec.strategy == "external":
        return None  # objectives of external agents stay private
    name = spec.params.get("objective", "cost")
    return cost_objective(scenario, hour) if name == "cost" else resilience_objective(scenario)


def _build_trial_agents(
    config: GameConfig,
    scenario: Scenario,
    mode: str,
    trial: int,
    externals: dict[str, ExternalStrategy],
    acceptance_threshold: float,
) -> list[Strategy]:
    rng = _trial_rng(config, mode, trial)
    if not config.agents:
        return list(
            default_agent_pair(
                scenario,
                config.hour,
                rounds=config.max_rounds,
                rng=rng,
                jitter=config.schedule_jitter,
                acceptance_threshold=acceptance_threshold,
            )
        )
    agents: list[Strategy] = []
    for spec in config.agents:
        if spec.strategy == "external":
            agents.append(externals[spec.name])
        else:
            params = dict(spec.params)
            params.setdefault("rounds", str(config.max_rounds))
            params.setdefault("threshold", str(acceptance_threshold))
            agents.append(
                build_strategy(
                    spec.name,
                    spec.strategy,
                    params,
                    scenario,
                    config.hour,
                    rng=rng,
                    jitter=config.schedule_jitter,
                )
            )
    return agents


def run(
    config: GameConfig,
    scenario: Scenario,
    modes: Sequence[str] | None = None,
    acceptance_threshold: float = 0.35,
    exclusivity: bool = False,
    pareto: bool = False,
    pareto_weights: int = 101,
    sessions: bool = True,
) -> int:
    """Execute the configured batch and write all artifact files."""
    out_dir = config.output_dir if config.output_dir is not None else Path("deconflict-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    fs = build_feasible_set(scenario, config.hour, scenario.initial_soc)

    if exclusivity:
        for kind in ("cost", "resilience"):
            write_exclusivity_csv(
                out_dir / f"exclusivity_{kind}.csv",
                scenario,
                simulate_exclusive(scenario, kind),
            )
    if pareto:
        points = pareto_front(
            cost_objective(scenario, config.hour),
            resilience_objective(scenario),
            fs,
            pareto_weights,
        )
        write_pareto_csv(out_dir / "pareto.csv", scenario, "cost", "resilience", points)
    if not sessions:
        return 0

    if config.agents:
        objectives = {
            spec.name: obj
            for spec in config.agents
            if (obj := _agent_objective(spec, scenario, config.hour)) is not None
        }
    else:
        objectives = {
            "cost": cost_objective(scenario, config.hour),
            "resilience": resilience_objective(scenario),
        }

    externals: dict[str, ExternalStrategy] = {}
    for spec in config.agents:
        if spec.strategy == "external":
            assert spec.endpoint is not None
            externals[spec.name] = ExternalStrategy(
                spec.name, spec.endpoint, timeout=config.agent_timeout
            )

    if modes is None:
        modes = (config.mode,)
    summary_rows = []
    try:
        for mode in modes:
            mode_config = dataclasses.replace(config, mode=mode, output_dir=out_dir)
            results = []
            outcomes: list[TrialOutcome] = []
            fairness_values: list[float | None] = []
            for trial in range(config.trials):
                agents = _build_trial_agents(
                    mode_config, scenario, mode, trial, externals, acceptance_threshold
                )
                session_id = f"{mode}-seed{config.seed}-trial{trial:03d}"
                result = run_session(agents, fs, mode_config, session_id)
                outcome = make_trial_outcome(
                    trial, mode, result.resolution, objectives, fs
                )
                results.append(result)
                outcomes.append(outcome)
                fairness_values.append(
                    fairness(outcome) if len(outcome.normalized) == 2 else None
                )
                write_trajectory_csv(
                    out_dir / f"{mode}_trial{trial:03d}_trajectory.csv", scenario, result
                )
                write_transcript(
                    out_dir / f"{mode}_trial{trial:03d}_transcript.jsonl",
                    result.transcript,
                )
            write_trials_csv(
                out_dir / f"trials_{mode}.csv", scenario, results, outcomes, fairness_values
            )
            fair_known = [f for f in fairness_values if f is not None]
            summary_rows.append(
                {
                    "mode": mode,
                    "trials": config.trials,
                    "mean_rounds": mean(r.rounds_used for r in results),
                    "converged": sum(1 for r in results if r.converged),
                    "success": {
                        agent: success_metric(outcomes, agent) for agent in objectives
                    },
                    "variance": consistency(outcomes) if objectives else {},
                    "mean_fairness": mean(fair_known) if fair_known else None,
                }
            )
        write_summary_csv(out_dir / "summary.csv", summary_rows)
    finally:
        for external in externals.values():
            external.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deconflict",
        description="Deterministic setpoint deconfliction for shared-device applications.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run trial batches and write artifacts")
    runp.add_argument("--scenario", default="default",
                      help="scenario TOML path or bundled name (default, evening-peak)")
    runp.add_argument("--mode", default="procedural", choices=MODES + ("all",))
    runp.add_argument("--hour", type=int, default=19)
    runp.add_argument("--trials", type=int, default=20)
    runp.add_argument("--seed", type=int, default=0)
    runp.add_argument("--max-rounds", type=int, default=10)
    runp.add_argument("--eps-consensus", type=float, default=1e-3)
    runp.add_argument("--eps-weight", type=float, default=1e-6)
    runp.add_argument("--jitter", type=float, default=0.05,
                      help="relative per-trial flexibility perturbation")
    runp.add_argument("--acceptance-threshold", type=float, default=0.35)
    runp.add_argument("--timeout", type=float, default=30.0,
                      help="per-call timeout for external agents, seconds")
    runp.add_argument("--agent", action="append", default=[],
                      metavar="name=...,strategy=...,key=value",
                      help="agent declaration, repeatable; default is the shipped cost/resilience pairing")
    runp.add_argument("--out", default=None, help="output directory")
    runp.add_argument("--exclusivity", action="store_true",
                      help="write the single-application 24-hour time series")
    runp.add_argument("--pareto", action="store_true", help="write the Pareto front CSV")
    runp.add_argument("--pareto-weights", type=int, default=101)
    runp.add_argument("--no-sessions", action="store_true",
                      help="skip trial batches (exclusivity/pareto only)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        out = args.out or os.environ.get("DECONFLICT_OUTPUT_DIR") or "deconflict-out"
        config = GameConfig(
            mode=args.mode if args.mode != "all" else "procedural",
            hour=args.hour,
            max_rounds=args.max_rounds,
            eps_consensus=args.eps_consensus,
            eps_weight=args.eps_weight,
            trials=args.trials,
            seed=args.seed,
            schedule_jitter=args.jitter,
            agent_timeout=args.timeout,
            agents=tuple(_parse_agent_flag(a) for a in args.agent),
            output_dir=Path(out),
        )
        modes = MODES if args.mode == "all" else (args.mode,)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 4
    try:
        return run(
            config,
            scenario,
            modes=modes,
            acceptance_threshold=args.acceptance_threshold,
            exclusivity=args.exclusivity,
            pareto=args.pareto,
            pareto_weights=args.pareto_weights,
            sessions=not args.no_sessions,
        )
    except AgentFault as exc:
        print(f"agent failure: {exc}", file=sys.stderr)
        return 3
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
