"""Minimal dense feed-forward networks with exact backprop, on numpy.

Hidden layers are rectified, the output layer is linear; softmax (with
optional support masking) is applied by callers on top of the raw outputs.
Gradients are computed for whatever scalar loss the caller differentiates,
supplied as the gradient at the output layer.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import CheckpointError, EmptySupport, ShapeError

NET_FORMAT = "fogalloc-densenet-v1"


class GradientTape:
    """Per-parameter gradient buffers aligned with one network's shapes."""

    def __init__(self, d_weights: list[np.ndarray], d_biases: list[np.ndarray]):
        self.d_weights = d_weights
        self.d_biases = d_biases

    @classmethod
    def zeros_like(cls, net: "DenseNet") -> "GradientTape":
        return cls(
            [np.zeros_like(w) for w in net.weights],
            [np.zeros_like(b) for b in net.biases],
        )

    def add(self, other: "GradientTape") -> "GradientTape":
        for a, b in zip(self.d_weights, other.d_weights):
            a += b
        for a, b in zip(self.d_biases, other.d_biases):
            a += b
        return self

    def scale(self, factor: float) -> "GradientTape":
        for a in self.d_weights:
            a *= factor
        for a in self.d_biases:
            a *= factor
        return self


class DenseNet:
    """Fully connected net; `sizes` chains input through hiddens to output.

    Parameters initialize uniformly in +-sqrt(6 / (fan_in + fan_out)), so a
    given generator state fixes the network exactly.
    """

    def __init__(self, sizes: list[int], rng: np.random.Generator | None = None):
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ShapeError(f"need at least two positive layer sizes, got {sizes}")
        if rng is None:
            rng = np.random.default_rng()
        self.sizes = list(sizes)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-limit, limit, size=fan_out))
        self._cache_inputs: list[np.ndarray] | None = None
        self._cache_single = False

    @property
    def parameter_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def forward(self, x) -> np.ndarray:
        """Run the net on one vector or a batch of rows; caches for backward."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ShapeError(f"input width {x.shape} does not match layer size {self.sizes[0]}")
        inputs = [x]
        out = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out = out @ w + b
            if i < last:
                out = np.maximum(out, 0.0)
            inputs.append(out)
        self._cache_inputs = inputs
        self._cache_single = single
        return out[0] if single else out

    def backward(self, output_gradient) -> GradientTape:
        """Exact parameter gradients for the loss whose output gradient is given.

        Batched output gradients produce the sum of per-row gradients.
        """
        if self._cache_inputs is None:
            raise ShapeError("backward called before forward")
        grad = np.asarray(output_gradient, dtype=float)
        if self._cache_single:
            grad = grad[None, :]
        inputs = self._cache_inputs
        if grad.shape != inputs[-1].shape:
            raise ShapeError(
                f"output gradient shape {grad.shape} does not match output {inputs[-1].shape}"
            )
        d_weights = [None] * len(self.weights)
        d_biases = [None] * len(self.biases)
        delta = grad
        for i in range(len(self.weights) - 1, -1, -1):
            d_weights[i] = inputs[i].T @ delta
            d_biases[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (inputs[i] > 0.0)
        return GradientTape(d_weights, d_biases)

    def copy(self) -> "DenseNet":
        dup = DenseNet.__new__(DenseNet)
        dup.sizes = list(self.sizes)
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        dup._cache_inputs = None
        dup._cache_single = False
        return dup

    def state_dict(self) -> dict:
        return {
            "format": NET_FORMAT,
            "sizes": self.sizes,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_state_dict(cls, state: dict) -> "DenseNet":
        if state.get("format") != NET_FORMAT:
            raise CheckpointError(f"expected {NET_FORMAT}, got {state.get('format')!r}")
        net = cls.__new__(cls)
        net.sizes = list(state["sizes"])
        net.weights = [np.array(w, dtype=float) for w in state["weights"]]
        net.biases = [np.array(b, dtype=float) for b in state["biases"]]
        for w, fan_in, fan_out in zip(net.weights, net.sizes[:-1], net.sizes[1:]):
            if w.shape != (fan_in, fan_out):
                raise CheckpointError(f"weight shape {w.shape} breaks the layer chain")
        net._cache_inputs = None
        net._cache_single = False
        return net


def save_net(net: DenseNet, path) -> None:
    Path(path).write_text(json.dumps(net.state_dict(), sort_keys=True))


def load_net(path) -> DenseNet:
    try:
        state = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON") from exc
    return DenseNet.from_state_dict(state)


def softmax_probs(logits, allowed=None) -> np.ndarray:
    """Stable softmax over the allowed entries; disallowed entries get 0.

    `allowed` is a boolean mask, True where an entry may receive mass.
    """
    z = np.asarray(logits, dtype=float)
    if allowed is None:
        allowed = np.ones(z.shape, dtype=bool)
    else:
        allowed = np.asarray(allowed, dtype=bool)
    if not allowed.any():
        raise EmptySupport("every entry is masked out")
    shifted = z - z[allowed].max()
    exp = np.where(allowed, np.exp(np.where(allowed, shifted, 0.0)), 0.0)
    return exp / exp.sum()


class Adam:
    """Adaptive-moment optimizer owning the moment buffers for one net."""

    def __init__(
        self,
        net: DenseNet,
        step_size: float = 3e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        self.step_size = step_size
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in net.weights]
        self.v_w = [np.zeros_like(w) for w in net.weights]
        self.m_b = [np.zeros_like(b) for b in net.biases]
        self.v_b = [np.zeros_like(b) for b in net.biases]

    def step(self, net: DenseNet, tape: GradientTape) -> None:
        """One bias-corrected update of `net` in place."""
        if len(tape.d_weights) != len(net.weights):
            raise ShapeError("tape does not match the network layout")
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for params, grads, ms, vs in (
            (net.weights, tape.d_weights, self.m_w, self.v_w),
            (net.biases, tape.d_biases, self.m_b, self.v_b),
        ):
            for p, g, m, v in zip(params, grads, ms, vs):
                if p.shape != g.shape:
                    raise ShapeError(f"gradient shape {g.shape} vs parameter {p.shape}")
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                p -= self.step_size * (m / c1) / (np.sqrt(v / c2) + self.epsilon)

    def state_dict(self) -> dict:
        return {
            "step_size": self.step_size,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "t": self.t,
            "m_w": [a.tolist() for a in self.m_w],
            "v_w": [a.tolist() for a in self.v_w],
            "m_b": [a.tolist() for a in self.m_b],
            "v_b": [a.tolist() for a in self.v_b],
        }

    @classmethod
    def from_state_dict(cls, net: DenseNet, state: dict) -> "Adam":
        opt = cls(
            net,
            step_size=state["step_size"],
            beta1=state["beta1"],
            beta2=state["beta2"],
            epsilon=state["epsilon"],
        )
        opt.t = state["t"]
        opt.m_w = [np.array(a, dtype=float) for a in state["m_w"]]
        opt.v_w = [np.array(a, dtype=float) for a in state["v_w"]]
        opt.m_b = [np.array(a, dtype=float) for a in state["m_b"]]
        opt.v_b = [np.array(a, dtype=float) for a in state["v_b"]]
        return opt
