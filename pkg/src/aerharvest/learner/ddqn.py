"""Double DQN with combined experience replay and soft target updates."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
import torch

from ..obsmap import Observation
from .network import QNetwork, NetworkSpec
from .replay import Batch, ReplayMemory


class NonFiniteLossError(FloatingPointError):
    """Raised when a training step produced a NaN or infinite loss."""


@dataclass(frozen=True)
class Hyperparams:
    capacity: int = 50_000
    batch_size: int = 128
    tau: float = 0.005
    discount: float = 0.95
    temperature: float = 0.1
    max_steps: int = 3_000_000
    learning_rate: float = 3e-4
    local_size: int = 17
    pool: int = 3


def greedy_action(q_values) -> int:
    """Index of the largest value; ties resolve to the lowest index."""
    q = np.asarray(q_values, dtype=float)
    if not np.isfinite(q).all():
        raise ValueError(f"non-finite action values: {q}")
    return int(np.argmax(q))


def softmax_probabilities(q_values, temperature: float) -> np.ndarray:
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    q = np.asarray(q_values, dtype=float)
    z = np.exp((q - q.max()) / temperature)
    return z / z.sum()


def softmax_action(q_values, temperature: float, rng: np.random.Generator) -> int:
    p = softmax_probabilities(q_values, temperature)
    k = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
    return min(k, len(p) - 1)


def soft_update(target: torch.nn.Module, online: torch.nn.Module, tau: float) -> None:
    with torch.no_grad():
        t_params = list(target.parameters())
        torch._foreach_mul_(t_params, 1.0 - tau)
        torch._foreach_add_(t_params, list(online.parameters()), alpha=tau)


def _as_tensor(array, dtype) -> torch.Tensor:
    return torch.as_tensor(np.asarray(array), dtype=dtype)


def obs_tensors(obs: list[Observation], dtype=torch.float32) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    local = _as_tensor(np.stack([o.local for o in obs]), dtype)
    glob = _as_tensor(np.stack([o.global_ for o in obs]), dtype)
    scalar = _as_tensor([o.scalar_b for o in obs], dtype)
    return local, glob, scalar


def ddqn_targets(batch: Batch, online: QNetwork, target: QNetwork, discount: float) -> torch.Tensor:
    """r + γ·Q_target(s', argmax_a' Q_online(s', a')), with no bootstrap at terminals."""
    dtype = online.spec.torch_dtype
    with torch.no_grad():
        nxt = (
            _as_tensor(batch.next_local, dtype),
            _as_tensor(batch.next_global, dtype),
            _as_tensor(batch.next_scalar, dtype),
        )
        best = online(*nxt).argmax(dim=1, keepdim=True)
        bootstrap = target(*nxt).gather(1, best).squeeze(1)
        reward = _as_tensor(batch.reward, dtype)
        alive = 1.0 - _as_tensor(batch.terminal, dtype)
        return reward + discount * alive * bootstrap


def ddqn_loss(batch: Batch, online: QNetwork, targets: torch.Tensor) -> torch.Tensor:
    dtype = online.spec.torch_dtype
    q = online(
        _as_tensor(batch.local, dtype),
        _as_tensor(batch.global_, dtype),
        _as_tensor(batch.scalar, dtype),
    )
    chosen = q.gather(1, torch.as_tensor(batch.action, dtype=torch.int64).unsqueeze(1)).squeeze(1)
    return torch.mean((chosen - targets) ** 2)


class DDQNLearner:
    """Online and target network shared by all agents, plus replay memory."""

    def __init__(self, spec: NetworkSpec, hyper: Hyperparams, seed: int = 0):
        self.spec = spec
        self.hyper = hyper
        self.online = QNetwork(spec, seed=seed)
        self.target = copy.deepcopy(self.online)
        self.optimizer = torch.optim.Adam(self.online.parameters(), lr=hyper.learning_rate, foreach=True)
        self.memory = ReplayMemory(hyper.capacity)
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
        self.train_steps = 0

    def q_values(self, obs: Observation) -> np.ndarray:
        with torch.no_grad():
            return self.online(*obs_tensors([obs], self.spec.torch_dtype))[0].numpy().astype(float)

    def ready(self) -> bool:
        return len(self.memory) >= self.hyper.batch_size

    def train_step(self) -> float:
        """One gradient step on a CER minibatch followed by a soft target update."""
        batch = self.memory.sample_cer(self.hyper.batch_size, self.rng)
        targets = ddqn_targets(batch, self.online, self.target, self.hyper.discount)
        loss = ddqn_loss(batch, self.online, targets)
        value = float(loss.item())
        if not np.isfinite(value):
            raise NonFiniteLossError(f"loss became {value} at training step {self.train_steps}")
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        soft_update(self.target, self.online, self.hyper.tau)
        self.train_steps += 1
        return value
