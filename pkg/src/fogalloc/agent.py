"""Actor-critic allocation policy with two categorical heads.

The actor maps the 4-dimensional observation to one categorical
distribution over block counts and one over unit counts; the joint policy
is their product.  A separate critic estimates the observation's value and
serves as the baseline for the policy gradient.  Training interleaves one
simulated episode with one minibatch update from a replay memory.

Either head can be frozen to a fixed grant, which turns the agent into the
single-resource baselines while keeping the identical training machinery
for the live head.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .engine import Allocator, JointAction, ObsState, Transition, run_episode
from .errors import CheckpointError, ConfigError, DimensionMismatch
from .fog_model import SystemCapacity
from .nets import Adam, DenseNet, GradientTape
from .scenario import Scenario

AGENT_FORMAT = "fogalloc-agent-v1"


@dataclass
class AgentConfig:
    gamma: float = 0.95
    epochs: int = 3000
    batch_size: int = 256
    memory_capacity: int = 50000
    entropy_coef: float = 0.01
    use_discounted_target: bool = True
    action_masking: bool = True
    seed: int = 0
    hidden: tuple = (64, 64)
    actor_lr: float = 1e-3
    critic_lr: float = 2e-2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self):
        for name in ("epochs", "batch_size", "memory_capacity", "seed"):
            setattr(self, name, int(getattr(self, name)))
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.batch_size > self.memory_capacity:
            raise ConfigError("batch_size cannot exceed memory_capacity")
        if self.batch_size < 1 or self.memory_capacity < 1:
            raise ConfigError("batch_size and memory_capacity must be positive")
        if self.entropy_coef < 0.0:
            raise ConfigError("entropy_coef must be nonnegative")
        if self.epochs < 1:
            raise ConfigError("epochs must be positive")
        self.hidden = tuple(self.hidden)


class ExperienceMemory:
    """FIFO ring buffer of transitions with uniform batch sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("memory capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0

    def push(self, transition: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        """Uniform i.i.d. sample (with replacement) of stored transitions."""
        if not self._items:
            raise ConfigError("cannot sample from an empty memory")
        idx = rng.integers(0, len(self._items), size=batch_size)
        return [self._items[i] for i in idx]

    def __len__(self) -> int:
        return len(self._items)


class EpochStats(NamedTuple):
    epoch: int
    mean_reward: float
    mean_delay_s: float
    drop_count: int


HISTORY_CSV_HEADER = "epoch,mean_reward,mean_delay_s,drop_count"


def history_to_csv(history: Sequence[EpochStats], path) -> None:
    lines = [HISTORY_CSV_HEADER]
    for h in history:
        lines.append(f"{h.epoch},{h.mean_reward!r},{h.mean_delay_s!r},{h.drop_count}")
    Path(path).write_text("\n".join(lines) + "\n")


class OraAgent(Allocator):
    """Online joint-resource allocator trained by actor-critic updates.

    `frozen_blocks` / `frozen_units` pin one grant dimension to a constant
    (clamped to availability), leaving only the other head learnable.
    """

    def __init__(
        self,
        capacity: SystemCapacity,
        config: AgentConfig,
        norm_data_size_bits: float,
        norm_computation_cycles: float,
        frozen_blocks: int | None = None,
        frozen_units: int | None = None,
    ):
        if frozen_blocks is not None and frozen_units is not None:
            raise ConfigError("at most one head may be frozen")
        self.total_blocks = capacity.total_blocks
        self.total_units = capacity.total_units
        self.config = config
        self.norm_data_size_bits = float(norm_data_size_bits)
        self.norm_computation_cycles = float(norm_computation_cycles)
        self.frozen_blocks = frozen_blocks
        self.frozen_units = frozen_units
        self.x_dim = capacity.total_blocks + 1
        self.y_dim = capacity.total_units + 1

        self.rng = np.random.default_rng(config.seed)
        sizes = [4, *config.hidden]
        self.actor = DenseNet(sizes + [self.x_dim + self.y_dim], self.rng)
        self.critic = DenseNet(sizes + [1], self.rng)
        self.actor_opt = Adam(
            self.actor, config.actor_lr, config.adam_beta1, config.adam_beta2, config.adam_epsilon
        )
        self.critic_opt = Adam(
            self.critic, config.critic_lr, config.adam_beta1, config.adam_beta2, config.adam_epsilon
        )
        self.memory = ExperienceMemory(config.memory_capacity)
        self.update_count = 0
        self.explore = True
        self.op_counts = {"decides": 0, "head_logits": 0, "sampled_transitions": 0}

    # ---------- observation and head handling ----------

    def _normalize(self, state: ObsState) -> np.ndarray:
        return np.array(
            [
                state.remaining_blocks / self.total_blocks,
                state.remaining_units / self.total_units,
                state.data_size_bits / self.norm_data_size_bits,
                state.computation_cycles / self.norm_computation_cycles,
            ]
        )

    def _allowed_matrix(self, limits: np.ndarray, head_dim: int) -> np.ndarray:
        """Row-wise support masks: grant <= limit, zero forbidden while limit >= 1."""
        idx = np.arange(head_dim)
        if not self.config.action_masking:
            return np.ones((limits.shape[0], head_dim), dtype=bool)
        allowed = idx[None, :] <= limits[:, None]
        allowed[:, 0] = limits < 1
        return allowed

    def _masked_probs(self, logits2d: np.ndarray, limits: np.ndarray) -> np.ndarray:
        allowed = self._allowed_matrix(limits, logits2d.shape[1])
        shifted = logits2d - np.where(allowed, logits2d, -np.inf).max(axis=1, keepdims=True)
        exp = np.where(allowed, np.exp(np.where(allowed, shifted, 0.0)), 0.0)
        return exp / exp.sum(axis=1, keepdims=True)

    def action_distributions(self, state: ObsState) -> tuple[np.ndarray, np.ndarray]:
        """Masked head distributions at `state`; a frozen head is a point mass."""
        logits = self.actor.forward(self._normalize(state))
        px = self._head_probs(logits[: self.x_dim], state.remaining_blocks, self.frozen_blocks)
        py = self._head_probs(logits[self.x_dim :], state.remaining_units, self.frozen_units)
        return px, py

    def _head_probs(self, logits: np.ndarray, limit: int, frozen: int | None) -> np.ndarray:
        if frozen is not None:
            point = np.zeros(len(logits))
            point[min(frozen, limit)] = 1.0
            return point
        return self._masked_probs(logits[None, :], np.array([limit]))[0]

    def _sample(self, probs: np.ndarray) -> int:
        cum = np.cumsum(probs)
        return int(min(np.searchsorted(cum, self.rng.random(), side="right"), len(probs) - 1))

    # ---------- Allocator interface ----------

    def _support(self, limit: int, head_dim: int) -> tuple[int, int]:
        """Allowed grants form a contiguous index range [lo, hi)."""
        if not self.config.action_masking:
            return 0, head_dim
        return (1, limit + 1) if limit >= 1 else (0, 1)

    def decide(self, state: ObsState, explore: bool | None = None) -> JointAction:
        if explore is None:
            explore = self.explore
        self.op_counts["decides"] += 1
        logits = self.actor.forward(self._normalize(state))
        x = self._pick(logits[: self.x_dim], state.remaining_blocks, self.frozen_blocks, explore)
        y = self._pick(logits[self.x_dim :], state.remaining_units, self.frozen_units, explore)
        return JointAction(x, y)

    def _pick(self, logits: np.ndarray, limit: int, frozen: int | None, explore: bool) -> int:
        if frozen is not None:
            return min(frozen, limit)
        self.op_counts["head_logits"] += len(logits)
        lo, hi = self._support(limit, len(logits))
        z = logits[lo:hi]
        if not explore:
            return lo + int(np.argmax(z))
        exp = np.exp(z - z.max())
        return lo + self._sample(exp / exp.sum())

    def observe(self, transition: Transition) -> None:
        # evaluation runs must not pollute the replay memory
        if self.explore:
            self.memory.push(transition)

    def begin_episode(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    # ---------- learning ----------

    def _values(self, states: np.ndarray) -> np.ndarray:
        return self.critic.forward(states)[:, 0]

    def advantage(self, transition: Transition) -> float:
        v_s = float(self._values(self._normalize(transition.state)[None, :])[0])
        if self.config.use_discounted_target:
            v_next = float(self._values(self._normalize(transition.next_state)[None, :])[0])
            return transition.reward + self.config.gamma * v_next - v_s
        return transition.reward - v_s

    def _batch_arrays(self, batch: Sequence[Transition]):
        states = np.stack([self._normalize(t.state) for t in batch])
        next_states = np.stack([self._normalize(t.next_state) for t in batch])
        rewards = np.array([t.reward for t in batch])
        return states, next_states, rewards

    def _advantages(self, batch, states, next_states, rewards) -> np.ndarray:
        v_s = self._values(states)
        if self.config.use_discounted_target:
            return rewards + self.config.gamma * self._values(next_states) - v_s
        return rewards - v_s

    def actor_loss_gradient(self, batch: Sequence[Transition]) -> GradientTape:
        """Gradient of the negated, entropy-regularized policy objective.

        Advantages enter as constants; the batch mean of
        -(log px[a_x] + log py[a_y]) * A - entropy_coef * (H(px) + H(py))
        is differentiated with respect to the actor parameters.
        """
        states, next_states, rewards = self._batch_arrays(batch)
        adv = self._advantages(batch, states, next_states, rewards)
        logits = self.actor.forward(states)
        out_grad = np.zeros_like(logits)
        n = len(batch)

        heads = []
        if self.frozen_blocks is None:
            heads.append(
                (
                    slice(0, self.x_dim),
                    np.array([t.state.remaining_blocks for t in batch]),
                    np.array([t.action.blocks for t in batch]),
                )
            )
        if self.frozen_units is None:
            heads.append(
                (
                    slice(self.x_dim, self.x_dim + self.y_dim),
                    np.array([t.state.remaining_units for t in batch]),
                    np.array([t.action.units for t in batch]),
                )
            )
        for head_slice, limits, chosen in heads:
            probs = self._masked_probs(logits[:, head_slice], limits)
            grad = probs * adv[:, None]
            grad[np.arange(n), chosen] -= adv
            if self.config.entropy_coef > 0.0:
                safe = np.where(probs > 0.0, probs, 1.0)
                logp = np.log(safe)
                entropy = -(probs * logp).sum(axis=1, keepdims=True)
                grad += self.config.entropy_coef * probs * (logp + entropy)
            out_grad[:, head_slice] = grad / n
        return self.actor.backward(out_grad)

    def critic_loss_gradient(self, batch: Sequence[Transition]) -> GradientTape:
        """Gradient of the batch-mean squared error against the bootstrap target."""
        states, next_states, rewards = self._batch_arrays(batch)
        gamma = self.config.gamma if self.config.use_discounted_target else 1.0
        targets = rewards + gamma * self._values(next_states)
        predicted = self._values(states)  # leaves the forward cache on `states`
        out_grad = ((predicted - targets) / len(batch))[:, None]
        return self.critic.backward(out_grad)

    def update(self, batch: Sequence[Transition]) -> None:
        self.actor_opt.step(self.actor, self.actor_loss_gradient(batch))
        self.critic_opt.step(self.critic, self.critic_loss_gradient(batch))
        self.update_count += 1

    def train(
        self,
        scenario_factory: Callable[[int], Scenario],
        epochs: int | None = None,
    ) -> list[EpochStats]:
        """Alternate one exploring episode with one minibatch update per epoch."""
        epochs = self.config.epochs if epochs is None else epochs
        history = []
        for epoch in range(epochs):
            scenario = scenario_factory(epoch)
            self.explore = True
            report = run_episode(
                scenario, self, seed=self.config.seed * 1_000_003 + epoch
            )
            if len(self.memory) > 0:
                batch = self.memory.sample(self.config.batch_size, self.rng)
                self.update(batch)
                self.op_counts["sampled_transitions"] += len(batch)
            mean_reward = sum(t.reward for t in report.transitions) / len(report.transitions)
            history.append(
                EpochStats(epoch, mean_reward, report.mean_total_s, report.drop_count)
            )
        return history

    # ---------- persistence ----------

    def save(self, path) -> None:
        payload = {
            "format": AGENT_FORMAT,
            "total_blocks": self.total_blocks,
            "total_units": self.total_units,
            "frozen_blocks": self.frozen_blocks,
            "frozen_units": self.frozen_units,
            "norm_data_size_bits": self.norm_data_size_bits,
            "norm_computation_cycles": self.norm_computation_cycles,
            "config": asdict(self.config),
            "update_count": self.update_count,
            "actor": self.actor.state_dict(),
            "critic": self.critic.state_dict(),
            "actor_opt": self.actor_opt.state_dict(),
            "critic_opt": self.critic_opt.state_dict(),
            "rng": self.rng.bit_generator.state,
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True, separators=(",", ":")))

    @classmethod
    def load(cls, path, capacity: SystemCapacity | None = None) -> "OraAgent":
        try:
            payload = json.loads(Path(path).read_text())
        except (json.JSONDecodeError, OSError) as exc:
            raise CheckpointError(f"{path}: unreadable checkpoint") from exc
        if payload.get("format") != AGENT_FORMAT:
            raise CheckpointError(f"{path}: expected {AGENT_FORMAT}")
        if capacity is not None and (
            payload["total_blocks"] != capacity.total_blocks
            or payload["total_units"] != capacity.total_units
        ):
            raise DimensionMismatch(
                f"checkpoint built for {payload['total_blocks']}x{payload['total_units']} pools, "
                f"system has {capacity.total_blocks}x{capacity.total_units}"
            )
        cfg_kv = dict(payload["config"])
        cfg_kv["hidden"] = tuple(cfg_kv["hidden"])
        config = AgentConfig(**cfg_kv)
        shell_cap = SystemCapacity(
            block_width_hz=1.0,
            unit_cycles_per_s=1.0,
            total_blocks=payload["total_blocks"],
            total_units=payload["total_units"],
            qos_deadline_s=1.0,
        )
        agent = cls(
            shell_cap,
            config,
            payload["norm_data_size_bits"],
            payload["norm_computation_cycles"],
            frozen_blocks=payload["frozen_blocks"],
            frozen_units=payload["frozen_units"],
        )
        agent.actor = DenseNet.from_state_dict(payload["actor"])
        agent.critic = DenseNet.from_state_dict(payload["critic"])
        agent.actor_opt = Adam.from_state_dict(agent.actor, payload["actor_opt"])
        agent.critic_opt = Adam.from_state_dict(agent.critic, payload["critic_opt"])
        agent.update_count = payload["update_count"]
        agent.rng = np.random.default_rng()
        agent.rng.bit_generator.state = payload["rng"]
        return agent
