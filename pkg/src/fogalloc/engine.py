"""Discrete-event episode runner.

Arrivals and departures are processed in time order (departures first on
ties, then by task id).  Each arriving task is shown to the allocator as an
observation of free resources plus its own size, gets a joint grant back,
and either holds that grant for its whole service time or is dropped on the
spot.  The runner emits learning transitions and per-task delay records.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from .errors import EmptyInstance, ProtocolViolation
from .fog_model import DelayBreakdown, ResourceGrants, task_delay
from .scenario import Scenario


class JointAction(NamedTuple):
    """Blocks and units requested for one task."""

    blocks: int
    units: int


class ObsState(NamedTuple):
    """What a policy sees when a task arrives: free pools plus the task's size."""

    remaining_blocks: int
    remaining_units: int
    data_size_bits: float
    computation_cycles: float


class Transition(NamedTuple):
    """One decision step: `next_state` is the observation at the next arrival."""

    state: ObsState
    action: JointAction
    reward: float
    next_state: ObsState


class TaskResult(NamedTuple):
    """Executed grant and delay outcome for one task."""

    task_id: int
    arrival_s: float
    blocks: int
    units: int
    breakdown: DelayBreakdown
    reward: float


class Allocator:
    """Decision policy queried once per arriving task.

    Subclasses must implement `decide`; `observe` and `begin_episode` are
    optional hooks for learning and per-episode reseeding.
    """

    def decide(self, state: ObsState) -> JointAction:
        raise NotImplementedError

    def observe(self, transition: Transition) -> None:
        pass

    def begin_episode(self, seed: int) -> None:
        pass


class ResourceLedger:
    """Time-ordered reservations against the block and unit pools."""

    def __init__(self, total_blocks: int, total_units: int):
        self.total_blocks = total_blocks
        self.total_units = total_units
        self.free_blocks = total_blocks
        self.free_units = total_units
        self._pending = []  # heap of (release_time, task_id, blocks, units)

    def release_due(self, now: float) -> None:
        """Release every reservation whose release time is <= now."""
        while self._pending and self._pending[0][0] <= now:
            _, _, blocks, units = heapq.heappop(self._pending)
            self.free_blocks += blocks
            self.free_units += units
        assert self.free_blocks <= self.total_blocks
        assert self.free_units <= self.total_units

    def reserve(self, task_id: int, blocks: int, units: int, release_time: float) -> None:
        self.free_blocks -= blocks
        self.free_units -= units
        assert self.free_blocks >= 0 and self.free_units >= 0, "pool overcommitted"
        heapq.heappush(self._pending, (release_time, task_id, blocks, units))

    def drain(self) -> None:
        self.release_due(math.inf)

    @property
    def live_reservations(self) -> int:
        return len(self._pending)


@dataclass
class EpisodeReport:
    """Per-task outcomes plus the episode-level summary metrics.

    Component-delay means cover non-dropped tasks only (0.0 if every task
    dropped); the total-delay mean covers all tasks with drops at the
    penalty value.
    """

    results: list[TaskResult]
    transitions: list[Transition]
    mean_total_s: float
    mean_transmission_s: float
    mean_computing_s: float
    drop_count: int


def build_state(ledger: ResourceLedger, task) -> ObsState:
    """Observation for one arriving task against the current ledger."""
    return ObsState(
        remaining_blocks=ledger.free_blocks,
        remaining_units=ledger.free_units,
        data_size_bits=task.data_size_bits,
        computation_cycles=task.computation_cycles,
    )


def reward_of(breakdown: DelayBreakdown) -> float:
    """Negated total delay; dropped tasks score the negated penalty."""
    return -breakdown.total_s


def run_episode(
    scenario: Scenario,
    allocator: Allocator,
    seed: int = 0,
    release_mode: str = "whole",
) -> EpisodeReport:
    """Run one episode of `scenario` under `allocator`.

    Grants are clamped to current availability; a clamped grant that misses
    the QoS deadline (or is zero on either resource) drops the task and
    reserves nothing.  With release_mode="whole" (default) an admitted task
    holds both resources for its full service time; "phased" frees the
    radio blocks as soon as the upload finishes.
    """
    if not scenario.tasks:
        raise EmptyInstance("cannot run an episode with zero tasks")
    if release_mode not in ("whole", "phased"):
        raise ValueError(f"unknown release_mode {release_mode!r}")

    cap = scenario.capacity
    ledger = ResourceLedger(cap.total_blocks, cap.total_units)
    allocator.begin_episode(seed)

    results: list[TaskResult] = []
    transitions: list[Transition] = []
    pending: tuple[ObsState, JointAction, float] | None = None

    for task in scenario.tasks:
        now = task.arrival_time_s
        ledger.release_due(now)
        state = build_state(ledger, task)

        if pending is not None:
            tr = Transition(pending[0], pending[1], pending[2], state)
            transitions.append(tr)
            allocator.observe(tr)

        action = allocator.decide(state)
        blocks, units = int(action.blocks), int(action.units)
        if not (0 <= blocks <= cap.total_blocks and 0 <= units <= cap.total_units):
            raise ProtocolViolation(
                f"action ({blocks}, {units}) outside 0..{cap.total_blocks} x 0..{cap.total_units}"
            )

        granted = ResourceGrants(
            min(blocks, state.remaining_blocks), min(units, state.remaining_units)
        )
        breakdown = task_delay(task, granted, cap)
        if not breakdown.dropped:
            if release_mode == "whole":
                ledger.reserve(task.id, granted.blocks, granted.units, now + breakdown.total_s)
            else:
                ledger.reserve(task.id, granted.blocks, 0, now + breakdown.transmission_s)
                ledger.reserve(task.id, 0, granted.units, now + breakdown.total_s)

        reward = reward_of(breakdown)
        results.append(
            TaskResult(task.id, now, granted.blocks, granted.units, breakdown, reward)
        )
        pending = (state, JointAction(blocks, units), reward)

    ledger.drain()
    assert ledger.free_blocks == cap.total_blocks and ledger.free_units == cap.total_units

    last = scenario.tasks[-1]
    final_state = ObsState(
        remaining_blocks=ledger.free_blocks,
        remaining_units=ledger.free_units,
        data_size_bits=last.data_size_bits,
        computation_cycles=last.computation_cycles,
    )
    tr = Transition(pending[0], pending[1], pending[2], final_state)
    transitions.append(tr)
    allocator.observe(tr)

    served = [r.breakdown for r in results if not r.breakdown.dropped]
    n = len(results)
    return EpisodeReport(
        results=results,
        transitions=transitions,
        mean_total_s=sum(r.breakdown.total_s for r in results) / n,
        mean_transmission_s=(
            sum(b.transmission_s for b in served) / len(served) if served else 0.0
        ),
        mean_computing_s=(
            sum(b.computing_s for b in served) / len(served) if served else 0.0
        ),
        drop_count=n - len(served),
    )


EPISODE_CSV_HEADER = "id,arrival_s,x,y,dt_s,dc_s,d_s,dropped,reward"


def report_to_csv(report: EpisodeReport, path) -> None:
    """One row per task under the documented episode schema."""
    lines = [EPISODE_CSV_HEADER]
    for r in report.results:
        b = r.breakdown
        lines.append(
            f"{r.task_id},{r.arrival_s!r},{r.blocks},{r.units},"
            f"{b.transmission_s!r},{b.computing_s!r},{b.total_s!r},"
            f"{int(b.dropped)},{r.reward!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
