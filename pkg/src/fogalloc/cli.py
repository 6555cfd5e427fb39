"""Command-line experiment driver.

Subcommands:
  gen     write a scenario file from a config
  train   train a learnable allocator, writing a checkpoint and history CSV
  sweep   evaluate allocators across a swept scenario variable, writing CSV
  oracle  exact brute-force grants for a small static instance file
  replay  re-run one scenario file with one allocator, writing per-task CSV

Exit codes: 0 success, 2 bad config/usage, 3 missing artifact (checkpoint
or input file), 4 exhaustive-search guard violation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import statistics
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .agent import AgentConfig, OraAgent, history_to_csv
from .allocators import (
    ALLOCATOR_NAMES,
    LEARNABLE_NAMES,
    RandomAllocator,
    brute_force_static,
    make_allocator,
)
from .engine import report_to_csv, run_episode
from .errors import (
    CheckpointError,
    ConfigError,
    DimensionMismatch,
    FogAllocError,
    InstanceTooLarge,
)
from .fog_model import SystemCapacity
from .scenario import (
    Scenario,
    ScenarioConfig,
    capacity_from_table,
    generate,
    load_scenario,
    save_scenario,
    scenario_with,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_GUARD = 4

SWEEP_VARIABLES = {
    "num_tasks": "num_tasks",
    "data_size_mean": "data_size_mean_bits",
    "intensity_mean": "intensity_mean",
}

SWEEP_CSV_HEADER = (
    "variable,value,allocator,seed,stat,"
    "mean_total_s,mean_transmission_s,mean_computing_s,drop_rate"
)


@dataclass
class CapacityInputs:
    bandwidth_hz: float = 5e6
    block_hz: float = 1.8e5
    fog_cycles_per_s: float = 3e8
    unit_cycles_per_s: float = 1e7
    qos_s: float = 1.0
    drop_penalty_s: float = 10.0
    shannon_plus_one: bool = True

    def build(self) -> SystemCapacity:
        return capacity_from_table(
            self.bandwidth_hz,
            self.block_hz,
            self.fog_cycles_per_s,
            self.unit_cycles_per_s,
            self.qos_s,
            self.drop_penalty_s,
            self.shannon_plus_one,
        )


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    capacity: CapacityInputs = field(default_factory=CapacityInputs)
    agent: AgentConfig = field(default_factory=AgentConfig)
    allocator: str = "ora"
    allocators: tuple = ("ora", "tx-only", "comp-only")
    sweep_variable: str = "num_tasks"
    sweep_values: tuple = (300, 400, 500, 600, 700)
    seeds: tuple = (1, 2, 3, 4, 5)
    out_dir: str = "results"

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(
                f"sweep variable must be one of {sorted(SWEEP_VARIABLES)}, "
                f"got {self.sweep_variable!r}"
            )
        if any(v <= 0 for v in self.sweep_values):
            raise ConfigError("sweep values must be positive")
        for name in (self.allocator, *self.allocators):
            if name not in ALLOCATOR_NAMES:
                raise ConfigError(f"unknown allocator {name!r}")


def _build_section(cls, payload: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    return cls(**payload)


def load_experiment_config(path) -> ExperimentConfig:
    try:
        payload = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})")
    known = {"scenario", "capacity", "agent", "allocator", "allocators", "sweep", "seeds", "out_dir"}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    sweep = payload.get("sweep", {})
    if not isinstance(sweep, dict) or set(sweep) - {"variable", "values"}:
        raise ConfigError("sweep must be an object with keys 'variable' and 'values'")
    try:
        return ExperimentConfig(
            scenario=_build_section(ScenarioConfig, payload.get("scenario", {}), "scenario"),
            capacity=_build_section(CapacityInputs, payload.get("capacity", {}), "capacity"),
            agent=_build_section(AgentConfig, payload.get("agent", {}), "agent"),
            allocator=payload.get("allocator", "ora"),
            allocators=tuple(payload.get("allocators", ("ora", "tx-only", "comp-only"))),
            sweep_variable=sweep.get("variable", "num_tasks"),
            sweep_values=tuple(sweep.get("values", (300, 400, 500, 600, 700))),
            seeds=tuple(payload.get("seeds", (1, 2, 3, 4, 5))),
            out_dir=payload.get("out_dir", "results"),
        )
    except TypeError as exc:
        raise ConfigError(str(exc))


def _out_dir(config: ExperimentConfig, args) -> Path:
    out = getattr(args, "out", None) or os.environ.get("FOGALLOC_OUT") or config.out_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def checkpoint_path(out_dir: Path, allocator: str, seed: int) -> Path:
    return out_dir / "checkpoints" / f"{allocator}_seed{seed}.json"


def history_path(out_dir: Path, allocator: str, seed: int) -> Path:
    return out_dir / f"history_{allocator}_seed{seed}.csv"


def train_one(
    config: ExperimentConfig, allocator_name: str, seed: int, out_dir: Path
) -> tuple[Path, Path]:
    """Train one (allocator, seed) cell; returns (checkpoint, history) paths."""
    capacity = config.capacity.build()
    scenario_cfg = replace(config.scenario, seed=seed)
    agent_cfg = replace(config.agent, seed=seed)
    agent = make_allocator(allocator_name, capacity, scenario_cfg, agent_cfg)

    def factory(epoch: int) -> Scenario:
        return generate(scenario_with(scenario_cfg, seed=seed + epoch), capacity)

    history = agent.train(factory)
    ckpt = checkpoint_path(out_dir, allocator_name, seed)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    agent.save(ckpt)
    hist = history_path(out_dir, allocator_name, seed)
    history_to_csv(history, hist)
    return ckpt, hist


def cmd_train(config: ExperimentConfig, args) -> int:
    name = args.allocator or config.allocator
    if name not in LEARNABLE_NAMES:
        raise ConfigError(f"train needs a learnable allocator, got {name!r}")
    out_dir = _out_dir(config, args)
    seeds = [args.seed] if args.seed is not None else list(config.seeds)
    for seed in seeds:
        ckpt, hist = train_one(config, name, seed, out_dir)
        print(f"trained {name} seed {seed}: {ckpt} {hist}")
    return EXIT_OK


def _evaluation_allocator(
    name: str,
    seed: int,
    config: ExperimentConfig,
    capacity: SystemCapacity,
    out_dir: Path,
    train_missing: bool,
):
    if name == "random":
        return RandomAllocator(capacity, seed)
    ckpt = checkpoint_path(out_dir, name, seed)
    if not ckpt.exists():
        if not train_missing:
            raise FileNotFoundError(f"missing checkpoint {ckpt}; train it first")
        train_one(config, name, seed, out_dir)
    agent = OraAgent.load(ckpt, capacity)
    agent.explore = False
    return agent


def run_sweep(
    config: ExperimentConfig,
    variable: str,
    out_dir: Path,
    names: list[str] | None = None,
    values=None,
    train_missing: bool = False,
) -> Path:
    """Evaluate allocators across one swept scenario variable; returns the CSV path."""
    capacity = config.capacity.build()
    if variable not in SWEEP_VARIABLES:
        raise ConfigError(f"unknown sweep variable {variable!r}")
    field_name = SWEEP_VARIABLES[variable]
    values = config.sweep_values if values is None else values
    names = list(config.allocators) if names is None else names

    cached = {}

    def allocator_for(name, seed):
        if (name, seed) not in cached:
            cached[(name, seed)] = _evaluation_allocator(
                name, seed, config, capacity, out_dir, train_missing
            )
        return cached[(name, seed)]

    lines = [SWEEP_CSV_HEADER]
    for value in values:
        for name in names:
            per_seed = []
            for seed in config.seeds:
                allocator = allocator_for(name, seed)
                overrides = {field_name: int(value) if field_name == "num_tasks" else value}
                scn_cfg = scenario_with(config.scenario, seed=seed, **overrides)
                report = run_episode(generate(scn_cfg, capacity), allocator, seed=seed)
                row = (
                    report.mean_total_s,
                    report.mean_transmission_s,
                    report.mean_computing_s,
                    report.drop_count / len(report.results),
                )
                per_seed.append(row)
                lines.append(
                    f"{variable},{value!r},{name},{seed},seed,"
                    f"{row[0]!r},{row[1]!r},{row[2]!r},{row[3]!r}"
                )
            for stat, fn in (("mean", statistics.fmean), ("std", _std)):
                agg = [fn([r[i] for r in per_seed]) for i in range(4)]
                lines.append(
                    f"{variable},{value!r},{name},,{stat},"
                    f"{agg[0]!r},{agg[1]!r},{agg[2]!r},{agg[3]!r}"
                )
    out_csv = out_dir / f"sweep_{variable}.csv"
    out_csv.write_text("\n".join(lines) + "\n")
    return out_csv


def cmd_sweep(config: ExperimentConfig, args) -> int:
    out_dir = _out_dir(config, args)
    variable = args.variable or config.sweep_variable
    names = [args.allocator] if args.allocator else None
    out_csv = run_sweep(
        config, variable, out_dir, names=names, train_missing=args.train_missing
    )
    print(f"wrote {out_csv}")
    return EXIT_OK


def _std(values) -> float:
    return statistics.pstdev(values) if len(values) > 1 else 0.0


def cmd_oracle(args) -> int:
    path = Path(args.scenario)
    if not path.exists():
        raise FileNotFoundError(f"instance file not found: {path}")
    scenario = load_scenario(path)
    grants, objective = brute_force_static(list(scenario.tasks), scenario.capacity)
    for task, grant in zip(scenario.tasks, grants):
        print(f"task {task.id}: blocks={grant.blocks} units={grant.units}")
    print(f"objective_s={objective!r}")
    return EXIT_OK


def cmd_replay(config: ExperimentConfig, args) -> int:
    path = Path(args.scenario)
    if not path.exists():
        raise FileNotFoundError(f"scenario file not found: {path}")
    scenario = load_scenario(path)
    out_dir = _out_dir(config, args)
    seed = args.seed if args.seed is not None else config.seeds[0]
    name = args.allocator or config.allocator
    if name == "random":
        allocator = RandomAllocator(scenario.capacity, seed)
    elif args.checkpoint:
        allocator = OraAgent.load(Path(args.checkpoint), scenario.capacity)
        allocator.explore = False
    else:
        allocator = _evaluation_allocator(
            name, seed, config, scenario.capacity, out_dir, train_missing=False
        )
    report = run_episode(scenario, allocator, seed=seed)
    out_csv = out_dir / f"episode_{name}_{path.stem}.csv"
    report_to_csv(report, out_csv)
    print(
        f"wrote {out_csv}: mean_delay_s={report.mean_total_s!r} "
        f"drops={report.drop_count}/{len(report.results)}"
    )
    return EXIT_OK


def cmd_gen(config: ExperimentConfig, args) -> int:
    out_dir = _out_dir(config, args)
    seed = args.seed if args.seed is not None else config.scenario.seed
    scenario = generate(replace(config.scenario, seed=seed), config.capacity.build())
    out_file = Path(args.file) if args.file else out_dir / f"scenario_seed{seed}.txt"
    out_file.parent.mkdir(parents=True, exist_ok=True)
    save_scenario(scenario, out_file)
    print(f"wrote {out_file}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogalloc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        p.add_argument("--config", default=None, help="experiment config JSON")
        p.add_argument("--out", default=None, help="output directory (or env FOGALLOC_OUT)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--allocator", choices=ALLOCATOR_NAMES, default=None)

    p_gen = sub.add_parser("gen", help="write a scenario file")
    common(p_gen)
    p_gen.add_argument("--file", default=None, help="explicit output path")

    p_train = sub.add_parser("train", help="train a learnable allocator")
    common(p_train)

    p_sweep = sub.add_parser("sweep", help="evaluate allocators across a sweep")
    common(p_sweep)
    p_sweep.add_argument("--variable", choices=sorted(SWEEP_VARIABLES), default=None)
    p_sweep.add_argument(
        "--train-missing", action="store_true", help="train any missing checkpoint first"
    )

    p_oracle = sub.add_parser("oracle", help="brute-force a small static instance")
    p_oracle.add_argument("--scenario", required=True, help="scenario/instance file")

    p_replay = sub.add_parser("replay", help="re-run one scenario file")
    common(p_replay)
    p_replay.add_argument("--scenario", required=True)
    p_replay.add_argument("--checkpoint", default=None)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "oracle":
            return cmd_oracle(args)
        config = (
            load_experiment_config(args.config) if args.config else ExperimentConfig()
        )
        if args.command == "gen":
            return cmd_gen(config, args)
        if args.command == "train":
            return cmd_train(config, args)
        if args.command == "sweep":
            return cmd_sweep(config, args)
        if args.command == "replay":
            return cmd_replay(config, args)
        raise ConfigError(f"unknown command {args.command!r}")
    except InstanceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigError, CheckpointError, DimensionMismatch, FogAllocError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
