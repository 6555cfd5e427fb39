import json
import math

import numpy as np
import pytest

from fogalloc.agent import AgentConfig, ExperienceMemory, OraAgent, history_to_csv
from fogalloc.engine import JointAction, ObsState, Transition, run_episode
from fogalloc.errors import ConfigError, DimensionMismatch
from fogalloc.fog_model import LinkBudget, SystemCapacity, TaskSpec
from fogalloc.scenario import Scenario, ScenarioConfig, default_capacity, generate

NORM_D = 2e6
NORM_C = 2e7


def small_cap(m=5, n=6):
    return SystemCapacity(1.8e5, 1e7, m, n, qos_deadline_s=1.0)


def agent_of(m=5, n=6, frozen_blocks=None, frozen_units=None, **cfg_kw):
    cfg = AgentConfig(**{"seed": 0, **cfg_kw})
    return OraAgent(small_cap(m, n), cfg, NORM_D, NORM_C, frozen_blocks, frozen_units)


def state_of(e, c, d=1e6, l=1e7):
    return ObsState(e, c, d, l)


def transition_of(e=5, c=6, reward=-0.9, e2=4, c2=5, x=2, y=3):
    return Transition(state_of(e, c), JointAction(x, y), reward, state_of(e2, c2))


def zero_output_layer(net):
    net.weights[-1][...] = 0.0
    net.biases[-1][...] = 0.0


def manual_forward(weights, biases, x):
    out = np.asarray(x, dtype=float)
    for i, (w, b) in enumerate(zip(weights, biases)):
        out = out @ np.asarray(w) + np.asarray(b)
        if i < len(weights) - 1:
            out = np.maximum(out, 0.0)
    return out


# ---------- memory ----------


def test_memory_fifo_eviction():
    mem = ExperienceMemory(3)
    for r in range(5):
        mem.push(transition_of(reward=-float(r + 1)))
    assert len(mem) == 3
    rewards = {t.reward for t in mem._items}
    assert rewards == {-3.0, -4.0, -5.0}


def test_memory_sampling_is_uniform_enough():
    mem = ExperienceMemory(10)
    for r in range(10):
        mem.push(transition_of(reward=-float(r + 1)))
    rng = np.random.default_rng(0)
    counts = {}
    for t in mem.sample(20_000, rng):
        counts[t.reward] = counts.get(t.reward, 0) + 1
    # each item expected 2000 times, sigma ~ 42
    assert all(abs(c - 2000) < 200 for c in counts.values())


def test_memory_rejects_empty_sample():
    with pytest.raises(ConfigError):
        ExperienceMemory(4).sample(2, np.random.default_rng(0))


# ---------- config ----------


def test_config_validation():
    with pytest.raises(ConfigError):
        AgentConfig(gamma=1.5)
    with pytest.raises(ConfigError):
        AgentConfig(batch_size=100, memory_capacity=10)
    with pytest.raises(ConfigError):
        AgentConfig(entropy_coef=-0.1)


# ---------- decide and masking ----------


def test_decide_with_no_blocks_left_returns_zero_blocks():
    agent = agent_of()
    action = agent.decide(state_of(0, 6), explore=True)
    assert action.blocks == 0
    assert 1 <= action.units <= 6


def test_masked_sampling_never_exceeds_availability():
    agent = agent_of(m=8, n=8)
    rng = np.random.default_rng(3)
    for _ in range(300):
        e, c = int(rng.integers(0, 9)), int(rng.integers(0, 9))
        a = agent.decide(state_of(e, c), explore=True)
        assert a.blocks <= e and a.units <= c
        if e >= 1:
            assert a.blocks >= 1
        if c >= 1:
            assert a.units >= 1


def test_head_distributions_match_hand_renormalization():
    agent = agent_of(m=8, n=8)
    state = state_of(5, 3)
    logits = agent.actor.forward(agent._normalize(state))
    px, py = agent.action_distributions(state)

    # hand renormalization oracle over the allowed entries {1..limit}
    def renorm(z, limit):
        zs = z[1 : limit + 1]
        e = np.exp(zs - zs.max())
        out = np.zeros(len(z))
        out[1 : limit + 1] = e / e.sum()
        return out

    assert np.allclose(px, renorm(logits[:9], 5), atol=1e-12)
    assert np.allclose(py, renorm(logits[9:], 3), atol=1e-12)
    assert px[0] == 0.0 and np.all(px[6:] == 0.0)


def test_head_distributions_are_valid_probabilities():
    agent = agent_of(m=8, n=8)
    rng = np.random.default_rng(11)
    for _ in range(100):
        state = state_of(
            int(rng.integers(0, 9)),
            int(rng.integers(0, 9)),
            float(rng.uniform(1e5, 3e6)),
            float(rng.uniform(1e6, 4e7)),
        )
        px, py = agent.action_distributions(state)
        for p in (px, py):
            assert np.all(p >= 0.0)
            assert abs(p.sum() - 1.0) < 1e-9


def test_unmasked_uniform_logits_sample_uniformly():
    agent = agent_of(m=27, n=30, action_masking=False, seed=3)
    zero_output_layer(agent.actor)
    state = state_of(27, 30)
    counts = np.zeros(28, dtype=int)
    draws = 100_000
    for _ in range(draws):
        counts[agent.decide(state, explore=True).blocks] += 1
    p = 1.0 / 28.0
    sigma = math.sqrt(draws * p * (1.0 - p))
    assert np.abs(counts - draws * p).max() <= 3.0 * sigma


def test_argmax_mode_is_deterministic():
    agent = agent_of()
    state = state_of(5, 6)
    picks = {agent.decide(state, explore=False) for _ in range(10)}
    assert len(picks) == 1


def test_frozen_units_pin_the_compute_grant():
    agent = agent_of(m=8, n=8, frozen_units=6)
    for c in (8, 7, 6):
        assert agent.decide(state_of(8, c), explore=True).units == 6
    assert agent.decide(state_of(8, 4), explore=True).units == 4  # clamp
    assert agent.decide(state_of(8, 0), explore=True).units == 0


def test_frozen_blocks_pin_the_radio_grant():
    agent = agent_of(m=8, n=8, frozen_blocks=5)
    assert agent.decide(state_of(8, 8), explore=True).blocks == 5
    assert agent.decide(state_of(2, 8), explore=True).blocks == 2


# ---------- advantage ----------


def test_advantage_with_zero_critic_equals_reward():
    agent = agent_of()
    zero_output_layer(agent.critic)
    assert agent.advantage(transition_of(reward=-0.9)) == pytest.approx(-0.9)


def test_advantage_literal_form_with_perfect_baseline():
    agent = agent_of(gamma=0.0, use_discounted_target=False)
    zero_output_layer(agent.critic)
    agent.critic.biases[-1][...] = -1.0
    assert agent.advantage(transition_of(reward=-1.0)) == pytest.approx(0.0)


def test_advantage_matches_recomputation_from_checkpoint(tmp_path):
    agent = agent_of(gamma=0.9, use_discounted_target=True)
    path = tmp_path / "agent.json"
    agent.save(path)
    payload = json.loads(path.read_text())
    tr = transition_of(reward=-0.7)

    critic = payload["critic"]
    v_s = manual_forward(critic["weights"], critic["biases"], agent._normalize(tr.state))[0]
    v_n = manual_forward(critic["weights"], critic["biases"], agent._normalize(tr.next_state))[0]
    expected = tr.reward + 0.9 * v_n - v_s
    assert agent.advantage(tr) == pytest.approx(expected, rel=1e-12)


# ---------- gradients ----------


def actor_logpi_loss(agent, weights, biases, tr, advantage):
    """Independent recomputation of -log pi(a|s) * A from raw parameter lists."""
    logits = manual_forward(weights, biases, agent._normalize(tr.state))
    xd = agent.x_dim

    def head_logp(z, limit, chosen):
        lo, hi = (1, limit + 1) if limit >= 1 else (0, 1)
        zs = z[lo:hi]
        shifted = zs - zs.max()
        logsum = math.log(np.exp(shifted).sum())
        return float(shifted[chosen - lo] - logsum)

    logp = head_logp(logits[:xd], tr.state.remaining_blocks, tr.action.blocks)
    logp += head_logp(logits[xd:], tr.state.remaining_units, tr.action.units)
    return -logp * advantage


def test_actor_gradient_zero_when_advantage_zero():
    agent = agent_of(entropy_coef=0.0, use_discounted_target=False)
    zero_output_layer(agent.critic)
    tr = Transition(state_of(5, 6), JointAction(2, 3), 0.0, state_of(4, 5))
    tape = agent.actor_loss_gradient([tr])
    assert all(np.allclose(g, 0.0) for g in tape.d_weights)


def test_actor_gradient_matches_finite_differences():
    agent = agent_of(entropy_coef=0.0, use_discounted_target=False, seed=4)
    tr = transition_of(reward=-0.8, x=2, y=4)
    adv = agent.advantage(tr)
    tape = agent.actor_loss_gradient([tr])

    step = 1e-5
    flat_analytic = []
    flat_numeric = []

    def loss_at():
        return actor_logpi_loss(agent, agent.actor.weights, agent.actor.biases, tr, adv)

    for params, grads in (
        (agent.actor.weights, tape.d_weights),
        (agent.actor.biases, tape.d_biases),
    ):
        for p, g in zip(params, grads):
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = p[ix]
                p[ix] = orig + step
                hi = loss_at()
                p[ix] = orig - step
                lo = loss_at()
                p[ix] = orig
                flat_numeric.append((hi - lo) / (2 * step))
                flat_analytic.append(g[ix])
    flat_numeric = np.array(flat_numeric)
    flat_analytic = np.array(flat_analytic)
    denom = max(np.abs(flat_numeric).max(), np.abs(flat_analytic).max())
    assert np.abs(flat_numeric - flat_analytic).max() / denom < 1e-4


def test_positive_advantage_raises_action_probability():
    agent = agent_of(entropy_coef=0.0, use_discounted_target=False, seed=2)
    zero_output_layer(agent.critic)
    tr = Transition(state_of(5, 6), JointAction(3, 2), 1.0, state_of(4, 5))  # A = +1
    px0, py0 = agent.action_distributions(tr.state)
    before = px0[3] * py0[2]
    tape = agent.actor_loss_gradient([tr])
    for p, g in zip(agent.actor.weights + agent.actor.biases, tape.d_weights + tape.d_biases):
        p -= 1e-5 * g
    px1, py1 = agent.action_distributions(tr.state)
    assert px1[3] * py1[2] > before


def test_critic_gradient_zero_when_value_equals_target():
    agent = agent_of(gamma=0.95, use_discounted_target=True)
    zero_output_layer(agent.critic)
    agent.critic.biases[-1][...] = -2.0
    # target = r + gamma * V(s') = -0.1 + 0.95 * (-2) = -2.0 = V(s)
    tr = transition_of(reward=-0.1)
    tape = agent.critic_loss_gradient([tr])
    assert all(np.allclose(g, 0.0, atol=1e-12) for g in tape.d_weights + tape.d_biases)


def test_critic_gradient_scalar_hand_derivation():
    # one linear layer: V = x.w + b, dLoss/dw = (V - target) x, dLoss/db = V - target
    cap = small_cap()
    agent = OraAgent(cap, AgentConfig(seed=0, hidden=()), NORM_D, NORM_C)
    assert agent.critic.sizes == [4, 1]
    tr = transition_of(reward=-0.5)
    x_s = agent._normalize(tr.state)
    x_n = agent._normalize(tr.next_state)
    w = agent.critic.weights[0][:, 0]
    b = agent.critic.biases[0][0]
    v_s, v_n = float(x_s @ w + b), float(x_n @ w + b)
    target = tr.reward + agent.config.gamma * v_n
    tape = agent.critic_loss_gradient([tr])
    assert np.allclose(tape.d_weights[0][:, 0], (v_s - target) * x_s, rtol=1e-12)
    assert tape.d_biases[0][0] == pytest.approx(v_s - target, rel=1e-12)


def test_critic_gradient_matches_finite_differences():
    agent = agent_of(seed=6)
    batch = [transition_of(reward=-0.6), transition_of(e=3, c=2, reward=-1.4, x=1, y=1)]
    tape = agent.critic_loss_gradient(batch)
    gamma = agent.config.gamma

    # bootstrap targets are constants of the update; freeze them for the oracle
    targets = [
        tr.reward
        + gamma
        * manual_forward(
            agent.critic.weights, agent.critic.biases, agent._normalize(tr.next_state)
        )[0]
        for tr in batch
    ]

    def loss():
        total = 0.0
        for tr, target in zip(batch, targets):
            w, b = agent.critic.weights, agent.critic.biases
            v_s = manual_forward(w, b, agent._normalize(tr.state))[0]
            total += 0.5 * (target - v_s) ** 2
        return total / len(batch)

    step = 1e-5
    analytic, numeric = [], []
    for params, grads in (
        (agent.critic.weights, tape.d_weights),
        (agent.critic.biases, tape.d_biases),
    ):
        for p, g in zip(params, grads):
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = p[ix]
                p[ix] = orig + step
                hi = loss()
                p[ix] = orig - step
                lo = loss()
                p[ix] = orig
                numeric.append(hi - lo)
                analytic.append(2 * step * g[ix])
    numeric, analytic = np.array(numeric), np.array(analytic)
    denom = max(np.abs(numeric).max(), np.abs(analytic).max())
    assert np.abs(numeric - analytic).max() / denom < 1e-4


def test_critic_contraction_on_frozen_batch():
    # gamma 0 makes the target a constant, so small-step descent is monotone
    agent = agent_of(seed=7, gamma=0.0)
    rng = np.random.default_rng(0)
    batch = [
        transition_of(
            e=int(rng.integers(1, 6)),
            c=int(rng.integers(1, 7)),
            reward=float(-rng.uniform(0.1, 10.0)),
        )
        for _ in range(16)
    ]

    def batch_loss():
        total = 0.0
        for tr in batch:
            v_s = float(agent.critic.forward(agent._normalize(tr.state))[0])
            total += 0.5 * (tr.reward - v_s) ** 2
        return total / len(batch)

    losses = [batch_loss()]
    for _ in range(30):
        tape = agent.critic_loss_gradient(batch)
        for p, g in zip(
            agent.critic.weights + agent.critic.biases, tape.d_weights + tape.d_biases
        ):
            p -= 0.05 * g
        losses.append(batch_loss())
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


# ---------- training ----------


def tiny_scenario_factory(cap, seed0):
    def factory(epoch):
        cfg = ScenarioConfig(
            seed=seed0 + epoch,
            num_tasks=5,
            horizon_s=50.0,
            data_size_mean_bits=2e5,
            data_size_std_bits=2e4,
            intensity_mean=10.0,
            intensity_std=1.0,
        )
        return generate(cfg, cap)

    return factory


def test_training_with_zero_gamma_learns_max_grant_for_lone_task():
    cap = SystemCapacity(1.8e5, 1e7, 3, 3, qos_deadline_s=1.0)
    agent = OraAgent(
        cap,
        AgentConfig(seed=1, gamma=0.0, batch_size=32, memory_capacity=2000, epochs=2000),
        norm_data_size_bits=4e5,
        norm_computation_cycles=4e6,
    )
    agent.train(tiny_scenario_factory(cap, 100), epochs=2000)
    # a lone arrival sees the full pools; exhaustive search puts the optimum at (3, 3)
    action = agent.decide(state_of(3, 3, 2e5, 2e6), explore=False)
    assert action == JointAction(3, 3)


def test_training_history_shape_and_improvement():
    cap = default_capacity()
    cfg = ScenarioConfig(seed=1, num_tasks=120)
    agent = OraAgent(cap, AgentConfig(seed=0, batch_size=64), 2e6, 2e7)

    def factory(epoch):
        return generate(ScenarioConfig(seed=1 + epoch, num_tasks=120), cap)

    history = agent.train(factory, epochs=60)
    assert len(history) == 60
    assert [h.epoch for h in history] == list(range(60))
    first = np.mean([h.mean_reward for h in history[:10]])
    last = np.mean([h.mean_reward for h in history[-10:]])
    assert last > first


def test_operation_counts_match_complexity_model():
    cap = small_cap(m=4, n=5)
    agent = OraAgent(cap, AgentConfig(seed=0, batch_size=16), NORM_D, NORM_C)

    def factory(epoch):
        return generate(ScenarioConfig(seed=epoch + 1, num_tasks=12), cap)

    agent.train(factory, epochs=3)
    tasks_seen = 3 * 12
    assert agent.op_counts["decides"] == tasks_seen
    # two heads of sizes M+1 and N+1 evaluated per decision
    assert agent.op_counts["head_logits"] == tasks_seen * (4 + 1 + 5 + 1)
    assert agent.op_counts["sampled_transitions"] == 3 * 16


def test_history_csv_format(tmp_path):
    cap = small_cap()
    agent = OraAgent(cap, AgentConfig(seed=0, batch_size=8), NORM_D, NORM_C)
    history = agent.train(tiny_scenario_factory(cap, 0), epochs=4)
    path = tmp_path / "hist.csv"
    history_to_csv(history, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,mean_reward,mean_delay_s,drop_count"
    assert len(lines) == 5


# ---------- persistence ----------


def test_checkpoint_roundtrip_preserves_decisions(tmp_path):
    agent = agent_of(seed=9)
    path = tmp_path / "agent.json"
    agent.save(path)
    clone = OraAgent.load(path)
    rng = np.random.default_rng(17)
    for _ in range(100):
        state = state_of(
            int(rng.integers(0, 6)),
            int(rng.integers(0, 7)),
            float(rng.uniform(1e5, 3e6)),
            float(rng.uniform(1e6, 4e7)),
        )
        assert clone.decide(state, explore=True) == agent.decide(state, explore=True)
        assert clone.decide(state, explore=False) == agent.decide(state, explore=False)


def test_checkpoint_roundtrip_preserves_training_state(tmp_path):
    cap = small_cap()
    agent = OraAgent(cap, AgentConfig(seed=3, batch_size=8), NORM_D, NORM_C)
    agent.train(tiny_scenario_factory(cap, 50), epochs=5)
    path = tmp_path / "trained.json"
    agent.save(path)
    clone = OraAgent.load(path)
    assert clone.update_count == agent.update_count
    assert clone.actor_opt.t == agent.actor_opt.t
    assert np.array_equal(clone.actor.weights[0], agent.actor.weights[0])
    assert np.array_equal(clone.critic.biases[-1], agent.critic.biases[-1])


def test_checkpoint_wrong_dimensions_rejected(tmp_path):
    agent = agent_of(m=5, n=6)
    path = tmp_path / "agent.json"
    agent.save(path)
    with pytest.raises(DimensionMismatch):
        OraAgent.load(path, capacity=small_cap(m=6, n=6))


def test_fresh_checkpoint_reproduces_seeded_initialization(tmp_path):
    a = agent_of(seed=21)
    path = tmp_path / "fresh.json"
    a.save(path)
    b = agent_of(seed=21)
    loaded = OraAgent.load(path)
    for w1, w2 in zip(loaded.actor.weights, b.actor.weights):
        assert np.array_equal(w1, w2)
    for w1, w2 in zip(loaded.critic.weights, b.critic.weights):
        assert np.array_equal(w1, w2)
