"""Allocation policies: random, fixed-grant, single-resource baselines, and
the exact exhaustive oracle for small static instances.

The two baselines reuse the actor-critic agent with one head frozen to a
fixed per-task share, so the only difference from the joint learner is
which resource they are allowed to adapt.
"""

from __future__ import annotations

import math
from itertools import product
from typing import Sequence

import numpy as np

from .agent import AgentConfig, OraAgent
from .engine import Allocator, JointAction, ObsState, run_episode
from .errors import ConfigError, InstanceTooLarge
from .fog_model import ResourceGrants, SystemCapacity, TaskSpec, task_delay
from .scenario import Scenario, ScenarioConfig, generate

ALLOCATOR_NAMES = ("ora", "tx-only", "comp-only", "random")
LEARNABLE_NAMES = ("ora", "tx-only", "comp-only")

BRUTE_FORCE_MAX_TASKS = 4
BRUTE_FORCE_MAX_POOL = 8


class RandomAllocator(Allocator):
    """Uniform requests over the whole action space; the engine clamps them."""

    def __init__(self, capacity: SystemCapacity, seed: int = 0):
        self.total_blocks = capacity.total_blocks
        self.total_units = capacity.total_units
        self.rng = np.random.default_rng(seed)

    def begin_episode(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    def decide(self, state: ObsState) -> JointAction:
        return JointAction(
            int(self.rng.integers(0, self.total_blocks + 1)),
            int(self.rng.integers(0, self.total_units + 1)),
        )


class FixedGrantAllocator(Allocator):
    """Requests the same grant for every task."""

    def __init__(self, blocks: int, units: int):
        self.blocks = blocks
        self.units = units

    def decide(self, state: ObsState) -> JointAction:
        return JointAction(self.blocks, self.units)


def fixed_share(total: int, expected_concurrency: int) -> int:
    """Equal static share of a pool among the expected concurrent tasks."""
    if total < 1 or expected_concurrency < 1:
        raise ConfigError("total and expected_concurrency must be at least 1")
    return max(1, total // expected_concurrency)


def pilot_expected_concurrency(config: ScenarioConfig, capacity: SystemCapacity) -> int:
    """Expected concurrent tasks, measured from one fixed-share pilot episode.

    The pilot grants equal shares sized as if every admitted task held its
    resources for the full QoS deadline, then estimates concurrency as
    arrival rate x mean pilot delay, rounded up.  The mean delay is capped
    at the deadline before multiplying: an admitted task never occupies the
    pools longer than that, so the fixed drop penalty must not inflate the
    holding-time estimate.
    """
    rate = config.num_tasks / config.horizon_s
    provisional = max(1, math.ceil(rate * capacity.qos_deadline_s))
    pilot = FixedGrantAllocator(
        fixed_share(capacity.total_blocks, provisional),
        fixed_share(capacity.total_units, provisional),
    )
    report = run_episode(generate(config, capacity), pilot, seed=config.seed)
    holding = min(report.mean_total_s, capacity.qos_deadline_s)
    return max(1, math.ceil(rate * holding))


def _norms(config: ScenarioConfig) -> tuple[float, float]:
    norm_d = 2.0 * config.data_size_mean_bits
    return norm_d, norm_d * config.intensity_mean


def make_ora(
    capacity: SystemCapacity, agent_config: AgentConfig, scenario_config: ScenarioConfig
) -> OraAgent:
    norm_d, norm_c = _norms(scenario_config)
    return OraAgent(capacity, agent_config, norm_d, norm_c)


def make_transmission_only(
    capacity: SystemCapacity, agent_config: AgentConfig, scenario_config: ScenarioConfig
) -> OraAgent:
    """Learns the radio grant; compute units pinned to the static equal share."""
    share = fixed_share(
        capacity.total_units, pilot_expected_concurrency(scenario_config, capacity)
    )
    norm_d, norm_c = _norms(scenario_config)
    return OraAgent(capacity, agent_config, norm_d, norm_c, frozen_units=share)


def make_computation_only(
    capacity: SystemCapacity, agent_config: AgentConfig, scenario_config: ScenarioConfig
) -> OraAgent:
    """Learns the compute grant; radio blocks pinned to the static equal share."""
    share = fixed_share(
        capacity.total_blocks, pilot_expected_concurrency(scenario_config, capacity)
    )
    norm_d, norm_c = _norms(scenario_config)
    return OraAgent(capacity, agent_config, norm_d, norm_c, frozen_blocks=share)


def make_allocator(
    name: str,
    capacity: SystemCapacity,
    scenario_config: ScenarioConfig,
    agent_config: AgentConfig | None = None,
) -> Allocator:
    """Construct an allocator by its CLI name."""
    if name == "random":
        seed = agent_config.seed if agent_config is not None else 0
        return RandomAllocator(capacity, seed)
    if agent_config is None:
        agent_config = AgentConfig()
    if name == "ora":
        return make_ora(capacity, agent_config, scenario_config)
    if name == "tx-only":
        return make_transmission_only(capacity, agent_config, scenario_config)
    if name == "comp-only":
        return make_computation_only(capacity, agent_config, scenario_config)
    raise ConfigError(f"unknown allocator {name!r}; expected one of {ALLOCATOR_NAMES}")


def brute_force_static(
    tasks: Sequence[TaskSpec], cap: SystemCapacity
) -> tuple[list[ResourceGrants], float]:
    """Exact minimizer of the mean-delay objective for one static instance.

    Every grant vector with per-pool sums within capacity is scored, with
    QoS-violating tasks priced at the drop penalty.  Ties go to the
    lexicographically smallest (blocks..., units...) vector.  Guarded to
    tiny instances because the enumeration is exponential in the task count.
    """
    k = len(tasks)
    if k == 0:
        raise ConfigError("need at least one task")
    m, n = cap.total_blocks, cap.total_units
    if k > BRUTE_FORCE_MAX_TASKS or m > BRUTE_FORCE_MAX_POOL or n > BRUTE_FORCE_MAX_POOL:
        raise InstanceTooLarge(
            f"{k} tasks with pools {m}x{n} exceeds the {BRUTE_FORCE_MAX_TASKS}-task, "
            f"{BRUTE_FORCE_MAX_POOL}-pool guard"
        )

    delay = np.empty((k, m + 1, n + 1))
    for i, t in enumerate(tasks):
        for x in range(m + 1):
            for y in range(n + 1):
                delay[i, x, y] = task_delay(t, ResourceGrants(x, y), cap).total_s

    block_vectors = [v for v in product(range(m + 1), repeat=k) if sum(v) <= m]
    unit_vectors = [v for v in product(range(n + 1), repeat=k) if sum(v) <= n]

    best_sum = math.inf
    best = None
    for xv in block_vectors:
        rows = [delay[i, xv[i]] for i in range(k)]
        for yv in unit_vectors:
            total = 0.0
            for i in range(k):
                total += rows[i][yv[i]]
            if total < best_sum:
                best_sum = total
                best = (xv, yv)
    xv, yv = best
    grants = [ResourceGrants(xv[i], yv[i]) for i in range(k)]
    return grants, best_sum / k
