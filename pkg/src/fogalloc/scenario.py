"""Reproducible workload generation for one fog cell.

Devices sit at fixed locations drawn uniformly in a square cell with the
gateway at the center; each task is pinned to one location and gets its
channel gain from the 3GPP-style log-distance path loss there.  Task sizes
and intensities are truncated normal draws.  Equal seeds give bit-identical
scenarios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidCapacity, InvalidDistance
from .fog_model import LinkBudget, SystemCapacity, TaskSpec

MIN_DATA_SIZE_BITS = 1e4
MIN_INTENSITY = 1.0
MIN_DISTANCE_KM = 0.01

SCENARIO_FORMAT = "fogalloc-scenario-v1"


@dataclass(frozen=True)
class ScenarioConfig:
    """Workload knobs; defaults reproduce the reference cell setup."""

    seed: int = 1
    area_km: float = 1.0
    num_locations: int = 50
    num_tasks: int = 500
    horizon_s: float = 50.0
    data_size_mean_bits: float = 1e6
    data_size_std_bits: float = 3e5
    intensity_mean: float = 10.0
    intensity_std: float = 3.0
    tx_power_w: float = 0.2
    noise_dbm: float = -104.0
    pathloss_a: float = 128.1
    pathloss_b: float = 37.6

    def __post_init__(self):
        for name in ("seed", "num_locations", "num_tasks"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.num_tasks < 1:
            raise ConfigError("num_tasks must be at least 1")
        if self.num_locations < 1:
            raise ConfigError("num_locations must be at least 1")
        if self.horizon_s <= 0.0:
            raise ConfigError("horizon_s must be positive")
        if self.data_size_std_bits < 0.0 or self.intensity_std < 0.0:
            raise ConfigError("std values must be nonnegative")
        if self.area_km <= 0.0:
            raise ConfigError("area_km must be positive")
        if self.data_size_std_bits == 0.0 and self.data_size_mean_bits < MIN_DATA_SIZE_BITS:
            raise ConfigError("degenerate data size below the truncation floor")
        if self.intensity_std == 0.0 and self.intensity_mean < MIN_INTENSITY:
            raise ConfigError("degenerate intensity below the truncation floor")


@dataclass(frozen=True)
class Scenario:
    """Tasks sorted by arrival (ties by id) plus the cell capacity they run on."""

    tasks: tuple[TaskSpec, ...]
    capacity: SystemCapacity


def path_loss_db(distance_km: float, a: float = 128.1, b: float = 37.6) -> float:
    """Log-distance path loss a + b*log10(d), d in km."""
    if distance_km <= 0.0:
        raise InvalidDistance(f"distance must be positive, got {distance_km}")
    return a + b * math.log10(distance_km)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def capacity_from_table(
    bandwidth_hz: float,
    block_hz: float,
    fog_cycles_per_s: float,
    unit_cycles_per_s: float,
    qos_s: float,
    drop_penalty_s: float = 10.0,
    shannon_plus_one: bool = True,
) -> SystemCapacity:
    """Derive integer pool sizes from raw bandwidth/compute capacity."""
    if min(bandwidth_hz, block_hz, fog_cycles_per_s, unit_cycles_per_s, qos_s) <= 0.0:
        raise InvalidCapacity("all capacity inputs must be positive")
    total_blocks = int(bandwidth_hz // block_hz)
    total_units = int(fog_cycles_per_s // unit_cycles_per_s)
    if total_blocks < 1 or total_units < 1:
        raise InvalidCapacity(
            f"capacity floors to {total_blocks} blocks / {total_units} units"
        )
    return SystemCapacity(
        block_width_hz=block_hz,
        unit_cycles_per_s=unit_cycles_per_s,
        total_blocks=total_blocks,
        total_units=total_units,
        qos_deadline_s=qos_s,
        drop_penalty_s=drop_penalty_s,
        shannon_plus_one=shannon_plus_one,
    )


def default_capacity() -> SystemCapacity:
    """5 MHz of 180 kHz blocks, 3e8 cycles/s of 1e7-cycle units, 1 s deadline."""
    return capacity_from_table(5e6, 1.8e5, 3e8, 1e7, 1.0)


def _truncated_normal(rng: np.random.Generator, mean, std, floor, n, max_rounds=1000):
    """Vector of N(mean, std) draws resampled (not clipped) to stay >= floor."""
    values = mean + std * rng.standard_normal(n)
    for _ in range(max_rounds):
        bad = values < floor
        if not bad.any():
            return values
        values[bad] = mean + std * rng.standard_normal(int(bad.sum()))
    raise ConfigError(f"could not draw values >= {floor} from N({mean}, {std})")


def generate(config: ScenarioConfig, capacity: SystemCapacity | None = None) -> Scenario:
    """Draw one scenario; equal (config, capacity) gives a bit-identical result."""
    cap = capacity if capacity is not None else default_capacity()
    rng = np.random.default_rng(config.seed)
    n = config.num_tasks

    locations = rng.uniform(0.0, config.area_km, size=(config.num_locations, 2))
    task_loc = rng.integers(0, config.num_locations, size=n)
    arrivals = rng.uniform(0.0, config.horizon_s, size=n)
    sizes = _truncated_normal(
        rng, config.data_size_mean_bits, config.data_size_std_bits, MIN_DATA_SIZE_BITS, n
    )
    intensities = _truncated_normal(
        rng, config.intensity_mean, config.intensity_std, MIN_INTENSITY, n
    )

    center = config.area_km / 2.0
    dx = locations[:, 0] - center
    dy = locations[:, 1] - center
    distances = np.maximum(np.hypot(dx, dy), MIN_DISTANCE_KM)

    noise_w = dbm_to_watts(config.noise_dbm)
    tasks = []
    for i in range(n):
        d = float(distances[task_loc[i]])
        gain = 10.0 ** (-path_loss_db(d, config.pathloss_a, config.pathloss_b) / 10.0)
        size = float(sizes[i])
        mu = float(intensities[i])
        tasks.append(
            TaskSpec(
                id=i,
                arrival_time_s=float(arrivals[i]),
                data_size_bits=size,
                intensity_cycles_per_bit=mu,
                computation_cycles=mu * size,
                link=LinkBudget(config.tx_power_w, gain, noise_w),
            )
        )
    tasks.sort(key=lambda t: (t.arrival_time_s, t.id))
    return Scenario(tasks=tuple(tasks), capacity=cap)


def scenario_with(config: ScenarioConfig, **overrides) -> ScenarioConfig:
    """Copy of `config` with fields replaced (sweep helper)."""
    return replace(config, **overrides)


def save_scenario(scenario: Scenario, path) -> None:
    """Write the line-oriented text form: one task per line plus capacity headers."""
    cap = scenario.capacity
    link0 = scenario.tasks[0].link
    lines = [
        f"# {SCENARIO_FORMAT}",
        "# capacity "
        f"block_width_hz={cap.block_width_hz!r} "
        f"unit_cycles_per_s={cap.unit_cycles_per_s!r} "
        f"total_blocks={cap.total_blocks} "
        f"total_units={cap.total_units} "
        f"qos_deadline_s={cap.qos_deadline_s!r} "
        f"drop_penalty_s={cap.drop_penalty_s!r} "
        f"shannon_plus_one={int(cap.shannon_plus_one)}",
        f"# link tx_power_w={link0.tx_power_w!r} noise_power_w={link0.noise_power_w!r}",
        "# columns id,arrival_s,data_size_bits,intensity,gain_db",
    ]
    for t in scenario.tasks:
        gain_db = 10.0 * math.log10(t.link.channel_gain)
        lines.append(
            f"{t.id},{t.arrival_time_s!r},{t.data_size_bits!r},"
            f"{t.intensity_cycles_per_bit!r},{gain_db!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_kv(line: str) -> dict:
    return dict(part.split("=", 1) for part in line.split()[2:])


def load_scenario(path) -> Scenario:
    """Read a scenario written by `save_scenario`."""
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != f"# {SCENARIO_FORMAT}":
        raise ConfigError(f"{path}: not a {SCENARIO_FORMAT} file")
    cap_kv = _parse_kv(lines[1])
    link_kv = _parse_kv(lines[2])
    cap = SystemCapacity(
        block_width_hz=float(cap_kv["block_width_hz"]),
        unit_cycles_per_s=float(cap_kv["unit_cycles_per_s"]),
        total_blocks=int(cap_kv["total_blocks"]),
        total_units=int(cap_kv["total_units"]),
        qos_deadline_s=float(cap_kv["qos_deadline_s"]),
        drop_penalty_s=float(cap_kv["drop_penalty_s"]),
        shannon_plus_one=bool(int(cap_kv["shannon_plus_one"])),
    )
    tx_w = float(link_kv["tx_power_w"])
    noise_w = float(link_kv["noise_power_w"])
    tasks = []
    for line in lines[4:]:
        tid, arrival, size, mu, gain_db = line.split(",")
        size_f, mu_f = float(size), float(mu)
        tasks.append(
            TaskSpec(
                id=int(tid),
                arrival_time_s=float(arrival),
                data_size_bits=size_f,
                intensity_cycles_per_bit=mu_f,
                computation_cycles=mu_f * size_f,
                link=LinkBudget(tx_w, 10.0 ** (float(gain_db) / 10.0), noise_w),
            )
        )
    tasks.sort(key=lambda t: (t.arrival_time_s, t.id))
    return Scenario(tasks=tuple(tasks), capacity=cap)
