"""Double DQN learner: replay memory, epsilon schedule, targets, target sync."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .approximator import Adam, Mlp, backward, parameters_equal
from .errors import TrainingError


class Transition(NamedTuple):
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool


class Batch(NamedTuple):
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition]) -> "Batch":
        return cls(
            np.array([t.s for t in transitions], dtype=np.float64),
            np.array([t.a for t in transitions], dtype=np.intp),
            np.array([t.r for t in transitions], dtype=np.float64),
            np.array([t.s_next for t in transitions], dtype=np.float64),
            np.array([t.done for t in transitions], dtype=bool),
        )


class ReplayBuffer:
    """FIFO ring of transitions with uniform sampling (with replacement).

    Storage grows geometrically up to ``capacity`` so a large nominal capacity
    costs nothing until it is used.
    """

    def __init__(self, obs_dim: int, capacity: int = 1_000_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.obs_dim = obs_dim
        self.capacity = int(capacity)
        self.size = 0
        self._next = 0
        self._alloc(min(self.capacity, 1024))

    def _alloc(self, n: int):
        old = getattr(self, "_s", None)
        s = np.zeros((n, self.obs_dim))
        s_next = np.zeros((n, self.obs_dim))
        a = np.zeros(n, dtype=np.intp)
        r = np.zeros(n)
        done = np.zeros(n, dtype=bool)
        if old is not None:
            m = self.size
            s[:m] = self._s[:m]
            s_next[:m] = self._s_next[:m]
            a[:m] = self._a[:m]
            r[:m] = self._r[:m]
            done[:m] = self._done[:m]
        self._s, self._s_next, self._a, self._r, self._done = s, s_next, a, r, done

    def __len__(self) -> int:
        return self.size

    def add(self, s, a: int, r: float, s_next, done: bool) -> None:
        i = self._next
        if i >= len(self._a):
            self._alloc(min(self.capacity, 2 * len(self._a)))
        self._s[i] = s
        self._a[i] = a
        self._r[i] = r
        self._s_next[i] = s_next
        self._done[i] = done
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def push(self, t: Transition) -> None:
        self.add(t.s, t.a, t.r, t.s_next, t.done)

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.size, size=n)

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        idx = self.sample_indices(n, rng)
        return self.gather(idx)

    def gather(self, idx: np.ndarray) -> Batch:
        return Batch(self._s[idx], self._a[idx], self._r[idx], self._s_next[idx], self._done[idx])

    def transitions(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        if self.size < self.capacity:
            order = range(self.size)
        else:
            order = [(self._next + i) % self.capacity for i in range(self.capacity)]
        return [
            Transition(self._s[i].copy(), int(self._a[i]), float(self._r[i]), self._s_next[i].copy(), bool(self._done[i]))
            for i in order
        ]


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay from ``start`` to ``floor`` over ``decay_horizon`` episodes."""

    start: float = 1.0
    floor: float = 0.001
    decay_horizon: int = 1

    def __post_init__(self):
        if not (self.start >= self.floor >= 0.0) or self.start > 1.0:
            raise ValueError(f"need 1 >= start >= floor >= 0, got {self.start}, {self.floor}")
        if self.decay_horizon < 1:
            raise ValueError("decay horizon must be at least one episode")

    def value(self, episode: int) -> float:
        if episode >= self.decay_horizon:
            return self.floor
        return max(self.floor, self.start - (self.start - self.floor) * episode / self.decay_horizon)

    __call__ = value

    @classmethod
    def over(cls, episodes: int, fraction: float, floor: float, start: float = 1.0) -> "EpsilonSchedule":
        return cls(start, floor, max(1, round(episodes * fraction)))


def greedy_action(q: np.ndarray) -> int:
    """Argmax with ties going to the lowest index."""
    return int(np.argmax(q))


@dataclass
class DdqnLearner:
    online: Mlp
    target: Mlp
    optimizer: Adam
    replay: ReplayBuffer
    gamma: float = 0.99
    tau: int = 100
    batch_size: int = 32
    warmup: int = 500
    double: bool = True
    step_counter: int = 0
    last_loss: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.online.layer_dims != self.target.layer_dims:
            raise ValueError("online and target architectures differ")
        if self.tau < 1 or self.batch_size < 1:
            raise ValueError("tau and batch size must be positive")

    @classmethod
    def create(
        cls,
        layer_dims: Sequence[int],
        rng: np.random.Generator,
        *,
        lr: float = 1e-3,
        gamma: float = 0.99,
        tau: int = 100,
        batch_size: int = 32,
        warmup: int = 500,
        capacity: int = 1_000_000,
        double: bool = True,
    ) -> "DdqnLearner":
        online = Mlp.init(layer_dims, rng)
        return cls(
            online=online,
            target=online.copy(),
            optimizer=Adam(lr=lr),
            replay=ReplayBuffer(layer_dims[0], capacity),
            gamma=gamma,
            tau=tau,
            batch_size=batch_size,
            warmup=warmup,
            double=double,
        )

    @property
    def n_actions(self) -> int:
        return self.online.output_dim

    def act(self, obs: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
        if epsilon > 0.0 and rng.random() < epsilon:
            return int(rng.integers(self.n_actions))
        return greedy_action(self.online.forward(obs))

    def remember(self, s, a: int, r: float, s_next, done: bool) -> None:
        self.replay.add(s, a, r, s_next, done)

    def compute_targets(self, batch: Batch | Sequence[Transition]) -> np.ndarray:
        if not isinstance(batch, Batch):
            batch = Batch.from_transitions(batch)
        if len(batch.r) == 0:
            raise ValueError("empty batch")
        return compute_targets(self.online, self.target, batch, self.gamma, self.double)

    def ready(self) -> bool:
        return self.replay.size >= max(self.batch_size, self.warmup)

    def train_step(self, rng: np.random.Generator) -> float | None:
        """One gradient step on a uniform batch; ``None`` if replay is too small."""
        if not self.ready():
            return None
        batch = self.replay.sample(self.batch_size, rng)
        y = compute_targets(self.online, self.target, batch, self.gamma, self.double)
        grad, loss = backward(self.online, batch.s, batch.a, y)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at learner step {self.step_counter}")
        self.optimizer.step(self.online, grad)
        self.step_counter += 1
        if self.step_counter % self.tau == 0:
            self.sync_target()
        self.last_loss = loss
        return loss

    def sync_target(self) -> None:
        self.target.theta[...] = self.online.theta

    def synced(self) -> bool:
        return parameters_equal(self.online, self.target)


def compute_targets(online: Mlp, target: Mlp, batch: Batch, gamma: float, double: bool = True) -> np.ndarray:
    """Bootstrapped regression targets, masked at terminal transitions.

    ``double`` selects the successor action with the online net and evaluates
    it with the target net; otherwise the target net's max is used.
    """
    q_next_target = target.forward(batch.s_next)
    if double:
        chosen = np.argmax(online.forward(batch.s_next), axis=1)
        bootstrap = q_next_target[np.arange(len(chosen)), chosen]
    else:
        bootstrap = q_next_target.max(axis=1)
    return batch.r + gamma * np.where(batch.done, 0.0, bootstrap)
