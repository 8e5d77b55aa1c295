"""Small fully connected Q-network with hand-written backprop and Adam.

All parameters of a network live in one flat float64 vector; the per-layer
weight matrices and bias vectors are views into it. That keeps cloning,
comparison, checkpointing and the optimizer update to single array ops.

Weights are stored ``(fan_in, fan_out)`` so a batch ``X`` of shape
``(batch, fan_in)`` maps through ``X @ W + b``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import TrainingError

CHECKPOINT_MAGIC = b"NSTMLP01"


def _layout(dims: Sequence[int]) -> list[tuple[int, int, int]]:
    """(offset, fan_in, fan_out) of each layer's weight block; bias follows."""
    out = []
    offset = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        out.append((offset, fan_in, fan_out))
        offset += fan_in * fan_out + fan_out
    return out


def n_params(dims: Sequence[int]) -> int:
    return sum(i * o + o for i, o in zip(dims[:-1], dims[1:]))


class Mlp:
    """tanh hidden layers, identity output."""

    def __init__(self, layer_dims: Sequence[int], theta: np.ndarray | None = None):
        dims = tuple(int(d) for d in layer_dims)
        if len(dims) < 2 or min(dims) < 1:
            raise ValueError(f"bad layer dims {dims}")
        self.layer_dims = dims
        size = n_params(dims)
        if theta is None:
            theta = np.zeros(size)
        elif theta.shape != (size,):
            raise ValueError(f"expected {size} parameters, got {theta.shape}")
        self.theta = np.ascontiguousarray(theta, dtype=np.float64)
        self.weights, self.biases = _views(self.theta, dims)

    @classmethod
    def init(cls, layer_dims: Sequence[int], rng: np.random.Generator) -> "Mlp":
        net = cls(layer_dims)
        for w in net.weights:
            limit = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
            w[...] = rng.uniform(-limit, limit, size=w.shape)
        return net

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"input has {x.shape[-1]} features, net expects {self.input_dim}")
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
        return h

    __call__ = forward

    def forward_cache(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Batch forward that also returns every layer's input activation."""
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
                acts.append(h)
        return h, acts

    def backward_from_output(self, acts: list[np.ndarray], d_out: np.ndarray) -> np.ndarray:
        """Flat gradient given dL/d(output) for a cached batch forward."""
        grad = np.empty_like(self.theta)
        gw, gb = _views(grad, self.layer_dims)
        delta = d_out
        for i in range(len(self.weights) - 1, -1, -1):
            a = acts[i]
            np.matmul(a.T, delta, out=gw[i])
            np.sum(delta, axis=0, out=gb[i])
            if i > 0:
                delta = (delta @ self.weights[i].T) * (1.0 - a * a)
        return grad

    def copy(self) -> "Mlp":
        return Mlp(self.layer_dims, self.theta.copy())


def _views(flat: np.ndarray, dims: Sequence[int]) -> tuple[list[np.ndarray], list[np.ndarray]]:
    ws, bs = [], []
    for offset, fan_in, fan_out in _layout(dims):
        end = offset + fan_in * fan_out
        ws.append(flat[offset:end].reshape(fan_in, fan_out))
        bs.append(flat[end : end + fan_out])
    return ws, bs


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    return net.forward(x)


def td_loss(net: Mlp, x: np.ndarray, actions: np.ndarray, targets: np.ndarray) -> float:
    """Mean over the batch of (Q(x)[a] - target)^2."""
    x, actions, targets = _as_batch(x, actions, targets)
    q = net.forward(x)[np.arange(len(actions)), actions]
    return float(np.mean((q - targets) ** 2))


def backward(
    net: Mlp, x: np.ndarray, actions, targets
) -> tuple[np.ndarray, float]:
    """Gradient of ``td_loss`` w.r.t. the flat parameter vector, and the loss.

    Accepts a single input vector with scalar action/target or a batch.
    """
    x, actions, targets = _as_batch(x, actions, targets)
    n = len(actions)
    q, acts = net.forward_cache(x)
    rows = np.arange(n)
    resid = q[rows, actions] - targets
    d_out = np.zeros_like(q)
    d_out[rows, actions] = (2.0 / n) * resid
    return net.backward_from_output(acts, d_out), float(np.mean(resid * resid))


def _as_batch(x, actions, targets):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    actions = np.atleast_1d(np.asarray(actions, dtype=np.intp))
    targets = np.atleast_1d(np.asarray(targets, dtype=np.float64))
    return x, actions, targets


@dataclass
class Adam:
    """Adam state for one flat parameter vector."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")

    def step(self, net: Mlp, grad: np.ndarray) -> None:
        if grad.shape != net.theta.shape:
            raise ValueError("gradient shape does not match parameters")
        if not np.all(np.isfinite(grad)):
            raise TrainingError("non-finite gradient")
        if self.m is None:
            self.m = np.zeros_like(net.theta)
            self.v = np.zeros_like(net.theta)
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grad * grad
        step = self.lr * np.sqrt(1.0 - self.beta2**self.t) / (1.0 - self.beta1**self.t)
        # zero gradient with zero history leaves m == 0, so theta is untouched
        net.theta -= step * self.m / (np.sqrt(self.v) + self.eps)


def apply_gradients(net: Mlp, opt: Adam, grad: np.ndarray) -> Mlp:
    opt.step(net, grad)
    return net


def clone_parameters(src: Mlp) -> Mlp:
    return src.copy()


def parameters_equal(a: Mlp, b: Mlp) -> bool:
    if a.layer_dims != b.layer_dims:
        raise ValueError(f"architecture mismatch: {a.layer_dims} vs {b.layer_dims}")
    return bool(np.array_equal(a.theta, b.theta))


def save_checkpoint(net: Mlp, path: str | Path) -> None:
    dims = net.layer_dims
    header = CHECKPOINT_MAGIC + struct.pack(f"<I{len(dims)}I", len(dims), *dims)
    Path(path).write_bytes(header + net.theta.astype("<f8").tobytes())


def load_checkpoint(path: str | Path) -> Mlp:
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError("not a network checkpoint")
    pos = len(CHECKPOINT_MAGIC)
    (n,) = struct.unpack_from("<I", data, pos)
    pos += 4
    dims = struct.unpack_from(f"<{n}I", data, pos)
    pos += 4 * n
    theta = np.frombuffer(data, dtype="<f8", offset=pos)
    if theta.size != n_params(dims):
        raise ValueError("checkpoint truncated or corrupt")
    return Mlp(dims, theta.astype(np.float64))


def numerical_gradient(net: Mlp, x, actions, targets, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``td_loss``, one parameter at a time."""
    probe = net.copy()
    grad = np.empty_like(probe.theta)
    for i in range(probe.theta.size):
        orig = probe.theta[i]
        probe.theta[i] = orig + h
        up = td_loss(probe, x, actions, targets)
        probe.theta[i] = orig - h
        down = td_loss(probe, x, actions, targets)
        probe.theta[i] = orig
        grad[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def gradient_check(
    trials: int = 100, seed: int = 0, h: float = 1e-5
) -> list[float]:
    """Relative errors between backprop and finite differences on random nets."""
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(trials):
        n_hidden = int(rng.integers(1, 3))
        dims = [int(rng.integers(1, 6))]
        dims += [int(rng.integers(2, 9)) for _ in range(n_hidden)]
        dims.append(int(rng.integers(1, 9)))
        net = Mlp.init(dims, rng)
        net.biases[-1][...] = rng.normal(size=dims[-1])
        for b in net.biases[:-1]:
            b[...] = rng.normal(scale=0.5, size=b.shape)
        batch = int(rng.integers(1, 5))
        x = rng.normal(size=(batch, dims[0]))
        a = rng.integers(0, dims[-1], size=batch)
        y = rng.normal(size=batch)
        analytic, _ = backward(net, x, a, y)
        numeric = numerical_gradient(net, x, a, y, h)
        errors.append(relative_error(analytic, numeric))
    return errors
