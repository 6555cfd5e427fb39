"""Uplink/compute delay model of a single fog cell and the static allocation objective.

A task uploads `data_size_bits` over an integer number of radio blocks
(each `block_width_hz` wide) and then executes `computation_cycles` on an
integer number of computation units (each `unit_cycles_per_s` fast).  A task
whose total delay would exceed the QoS deadline, or that holds a zero grant
on either resource, is dropped and charged a fixed penalty delay instead.

Everything here is a pure function over immutable values; no simulation
state is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import EmptyInstance, InfeasibleAllocation


@dataclass(frozen=True)
class LinkBudget:
    """Uplink budget of one device, all in linear units (watts / power ratio)."""

    tx_power_w: float
    channel_gain: float
    noise_power_w: float

    def __post_init__(self):
        if self.tx_power_w <= 0.0:
            raise ValueError(f"tx_power_w must be positive, got {self.tx_power_w}")
        if not 0.0 < self.channel_gain <= 1.0:
            raise ValueError(f"channel_gain must be in (0, 1], got {self.channel_gain}")
        if self.noise_power_w <= 0.0:
            raise ValueError(f"noise_power_w must be positive, got {self.noise_power_w}")

    @property
    def snr(self) -> float:
        return self.tx_power_w * self.channel_gain / self.noise_power_w


@dataclass(frozen=True)
class TaskSpec:
    """One offloaded task: when it arrives, how much it uploads and computes."""

    id: int
    arrival_time_s: float
    data_size_bits: float
    intensity_cycles_per_bit: float
    computation_cycles: float
    link: LinkBudget

    def __post_init__(self):
        if self.data_size_bits <= 0.0:
            raise ValueError(f"data_size_bits must be positive, got {self.data_size_bits}")
        if self.intensity_cycles_per_bit <= 0.0:
            raise ValueError(f"intensity must be positive, got {self.intensity_cycles_per_bit}")
        if self.computation_cycles != self.intensity_cycles_per_bit * self.data_size_bits:
            raise ValueError("computation_cycles must equal intensity * data_size_bits exactly")


class ResourceGrants(NamedTuple):
    """Joint grant for one task: radio blocks and computation units."""

    blocks: int
    units: int


@dataclass(frozen=True)
class SystemCapacity:
    """Cell-wide resource pools, granularities, and the QoS/drop policy.

    `shannon_plus_one` selects the rate curve: log2(1 + SNR) when true
    (default), the bare log2(SNR) otherwise.  The bare form goes negative
    below 0 dB, so it is only useful for reproducing legacy numbers.
    """

    block_width_hz: float
    unit_cycles_per_s: float
    total_blocks: int
    total_units: int
    qos_deadline_s: float
    drop_penalty_s: float = 10.0
    shannon_plus_one: bool = True

    def __post_init__(self):
        if self.total_blocks < 1 or self.total_units < 1:
            raise ValueError("total_blocks and total_units must be at least 1")
        if self.block_width_hz <= 0.0 or self.unit_cycles_per_s <= 0.0:
            raise ValueError("block_width_hz and unit_cycles_per_s must be positive")
        if self.qos_deadline_s <= 0.0:
            raise ValueError("qos_deadline_s must be positive")
        if self.drop_penalty_s < self.qos_deadline_s:
            raise ValueError("drop_penalty_s must be at least qos_deadline_s")


class DelayBreakdown(NamedTuple):
    """Per-task delay outcome; `total_s` is the drop penalty when dropped."""

    transmission_s: float
    computing_s: float
    total_s: float
    dropped: bool


def spectral_efficiency(link: LinkBudget, plus_one: bool = True) -> float:
    """Achievable bits/s/Hz on the uplink for this link budget."""
    snr = link.snr
    return math.log2(1.0 + snr) if plus_one else math.log2(snr)


def transmission_delay(task: TaskSpec, blocks: int, cap: SystemCapacity) -> float:
    """Seconds to upload the task's data over `blocks` radio blocks."""
    if blocks < 1:
        raise InfeasibleAllocation(f"task {task.id}: {blocks} blocks gives zero uplink rate")
    eta = spectral_efficiency(task.link, cap.shannon_plus_one)
    return task.data_size_bits / (blocks * cap.block_width_hz * eta)


def computing_delay(task: TaskSpec, units: int, cap: SystemCapacity) -> float:
    """Seconds to execute the task's cycles on `units` computation units."""
    if units < 1:
        raise InfeasibleAllocation(f"task {task.id}: {units} units gives zero compute rate")
    return task.computation_cycles / (units * cap.unit_cycles_per_s)


def task_delay(task: TaskSpec, grants: ResourceGrants, cap: SystemCapacity) -> DelayBreakdown:
    """Delay outcome of serving `task` with `grants`.

    Zero grants on either resource, or a total beyond the QoS deadline,
    mean the task is dropped: `total_s` is then the drop penalty and the
    unachievable component delays are recorded as infinity.
    """
    dt = transmission_delay(task, grants.blocks, cap) if grants.blocks >= 1 else math.inf
    dc = computing_delay(task, grants.units, cap) if grants.units >= 1 else math.inf
    total = dt + dc
    if total <= cap.qos_deadline_s:
        return DelayBreakdown(dt, dc, total, False)
    return DelayBreakdown(dt, dc, cap.drop_penalty_s, True)


def qos_feasible(task: TaskSpec, grants: ResourceGrants, cap: SystemCapacity) -> bool:
    """True iff both grants are nonzero and the task meets the QoS deadline."""
    return not task_delay(task, grants, cap).dropped


def objective_value(
    tasks: Sequence[TaskSpec],
    grants: Sequence[ResourceGrants],
    cap: SystemCapacity,
) -> float:
    """Mean total delay over tasks; dropped tasks contribute the penalty."""
    if len(tasks) != len(grants):
        raise ValueError(f"{len(tasks)} tasks but {len(grants)} grants")
    if not tasks:
        raise EmptyInstance("objective is undefined for zero tasks")
    return sum(task_delay(t, g, cap).total_s for t, g in zip(tasks, grants)) / len(tasks)
