"""Actor-critic agent trained with deterministic policy gradients.

The actor maps a state to K scoring weight vectors; items are picked
greedily by dot product against the embedding table. The critic estimates
Q(state, action) on concatenated embeddings. Training follows DDPG with
experience replay, prioritized sampling, and soft target updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .embed import EmbeddingTable
from .net import DenseNet, soft_update
from .sim import ActionVec, Simulator, StateVec, make_action, make_state


@dataclass
class AgentConfig:
    n_state: int = 10
    k_list: int = 4
    gamma: float = 0.75
    tau: float = 0.001
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    hidden: tuple[int, ...] = (128, 64)
    replay_capacity: int = 100_000
    batch_size: int = 64
    priority_epsilon: float = 1e-3
    priority_beta: float = 0.6
    noise_start: float = 0.2
    noise_end: float = 0.01
    episodes: int = 300
    steps_per_episode: int = 20
    warmup_transitions: int = 200


class Actor:
    """Policy network: state vector -> K weight vectors of dimension d."""

    def __init__(self, params: DenseNet, k_list: int, d: int):
        if params.n_out != k_list * d:
            raise ValueError("actor output must be K*d wide")
        self.params = params
        self.target_params = params.copy()
        self.k_list = k_list
        self.d = d

    @classmethod
    def create(cls, n_state: int, k_list: int, d: int, hidden, rng) -> "Actor":
        sizes = [n_state * d, *hidden, k_list * d]
        acts = ["tanh"] * len(hidden) + ["identity"]
        return cls(DenseNet.create(sizes, acts, rng), k_list, d)

    def generate_weights(self, state: StateVec, target: bool = False) -> np.ndarray:
        net = self.target_params if target else self.params
        return net.forward(state.vec).reshape(self.k_list, self.d)


class Critic:
    """Value network: concatenated state+action embedding -> scalar Q."""

    def __init__(self, params: DenseNet):
        if params.n_out != 1:
            raise ValueError("critic output must be scalar")
        self.params = params
        self.target_params = params.copy()

    @classmethod
    def create(cls, n_state: int, k_list: int, d: int, hidden, rng) -> "Critic":
        sizes = [(n_state + k_list) * d, *hidden, 1]
        acts = ["tanh"] * len(hidden) + ["identity"]
        return cls(DenseNet.create(sizes, acts, rng))

    def q_value(self, state: StateVec, action_vec: np.ndarray,
                target: bool = False) -> float:
        net = self.target_params if target else self.params
        return float(net.forward(np.concatenate([state.vec, action_vec]))[0])


def score_items(weight: np.ndarray, table: EmbeddingTable, candidates) -> np.ndarray:
    """One dot product per candidate item."""
    candidates = np.asarray(candidates, dtype=np.int64)
    if candidates.size == 0:
        raise ValueError("candidate set is empty")
    return table.vectors[candidates] @ weight


def recommend_list(actor: Actor, state: StateVec, table: EmbeddingTable,
                   catalog_size: int, noise_std: float = 0.0, rng=None,
                   target: bool = False) -> ActionVec:
    """Greedy slot-by-slot list construction from the actor's weights."""
    if catalog_size < actor.k_list:
        raise ValueError("catalog smaller than the recommendation list")
    weights = actor.generate_weights(state, target=target)
    if noise_std > 0.0:
        weights = weights + rng.normal(0.0, noise_std, size=weights.shape)
    items = kernels.greedy_select(weights, table.vectors[:catalog_size])
    return make_action([int(i) for i in items], table)


@dataclass
class Transition:
    state: StateVec
    action: ActionVec
    reward: float
    next_state: StateVec
    priority: float = 1.0
    item_rewards: tuple[float, ...] | None = None


class ReplayBuffer:
    """Bounded FIFO ring with proportional prioritized sampling."""

    def __init__(self, capacity: int, beta: float = 0.6, epsilon: float = 1e-3):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.beta = beta
        self.epsilon = epsilon
        self._items: list[Transition] = []
        self._next = 0

    def __len__(self):
        return len(self._items)

    def add(self, transition: Transition) -> None:
        if transition.priority <= 0:
            raise ValueError("priority must be positive")
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._next] = transition
            self._next = (self._next + 1) % self.capacity

    def max_priority(self) -> float:
        return max((t.priority for t in self._items), default=1.0)

    def sample(self, batch_size: int, rng):
        """Indices and transitions drawn with probability ~ priority^beta."""
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        weights = np.array([t.priority for t in self._items]) ** self.beta
        probs = weights / weights.sum()
        replace = batch_size > len(self._items)
        idx = rng.choice(len(self._items), size=batch_size, replace=replace, p=probs)
        return idx, [self._items[i] for i in idx]

    def update_priorities(self, indices, td_errors) -> None:
        for i, err in zip(indices, td_errors):
            self._items[i].priority = abs(float(err)) + self.epsilon


def td_targets(critic: Critic, actor: Actor, minibatch: list[Transition],
               gamma: float, table: EmbeddingTable, catalog_size: int) -> np.ndarray:
    """y = r + gamma * Q'(s', a') with a' from the target actor's greedy list.

    Batched over the minibatch: one target-actor forward, per-row greedy
    selection, one target-critic forward.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0,1]")
    rewards = np.array([t.reward for t in minibatch])
    if gamma == 0.0:
        return rewards
    next_states = np.stack([t.next_state.vec for t in minibatch])
    weights = actor.target_params.forward(next_states)
    emb = table.vectors[:catalog_size]
    next_actions = np.empty((len(minibatch), actor.k_list * actor.d))
    for i, w in enumerate(weights):
        items = kernels.greedy_select(w.reshape(actor.k_list, actor.d), emb)
        next_actions[i] = table.vectors[items].ravel()
    q_next = critic.target_params.forward(
        np.concatenate([next_states, next_actions], axis=1)
    )[:, 0]
    return rewards + gamma * q_next


def td_target(critic: Critic, actor: Actor, transition: Transition,
              gamma: float, table: EmbeddingTable, catalog_size: int) -> float:
    return float(td_targets(critic, actor, [transition], gamma, table,
                            catalog_size)[0])


def critic_update(critic: Critic, minibatch: list[Transition], targets,
                  lr: float):
    """One SGD step on mean squared TD error; returns per-sample TD errors."""
    if not minibatch:
        raise ValueError("empty minibatch")
    x = np.stack([np.concatenate([t.state.vec, t.action.vec]) for t in minibatch])
    y = np.asarray(targets, dtype=float)
    q = critic.params.forward(x)[:, 0]
    td_errors = y - q
    loss = float(np.mean(td_errors**2))
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite critic loss")
    upstream = (-2.0 * td_errors / len(minibatch))[:, None]
    grads, _ = critic.params.backward(x, upstream)
    critic.params.apply_update(grads, lr)
    return td_errors, loss, float(q.mean())


def actor_update(actor: Actor, critic: Critic, minibatch: list[Transition],
                 lr: float) -> None:
    """Deterministic policy gradient ascent on Q(s, f(s)).

    The actor's weight output (K*d, same width as an action embedding) is fed
    directly into the critic's action block; the critic's input gradient on
    that block is chained back through the actor.
    """
    if not minibatch:
        raise ValueError("empty minibatch")
    states = np.stack([t.state.vec for t in minibatch])
    w = actor.params.forward(states)  # (B, K*d)
    x = np.concatenate([states, w], axis=1)
    grad_q = np.ones((len(minibatch), 1)) / len(minibatch)
    _, dx = critic.params.backward(x, grad_q)
    grad_action = dx[:, states.shape[1]:]  # dQ/da at a = f(s)
    # Ascent: step along +dQ/dtheta, i.e. SGD on -Q.
    grads, _ = actor.params.backward(states, -grad_action)
    actor.params.apply_update(grads, lr)


@dataclass
class EpisodeLog:
    episode: int
    cumulative_reward: float
    critic_loss: float
    mean_q: float

    def to_line(self) -> str:
        return (f"{self.episode}\t{self.cumulative_reward!r}"
                f"\t{self.critic_loss!r}\t{self.mean_q!r}")


def train(sessions, simulator: Simulator, config: AgentConfig, seed: int = 0,
          catalog_size: int | None = None):
    """DDPG training against the simulator.

    Each episode starts from the prior positives of a training session
    (cycled deterministically) and rolls T simulator steps: recommend,
    observe the simulated reward, advance the state, store the transition,
    then sample a prioritized minibatch and update critic, actor, and
    target networks.

    Returns (actor, critic, list of EpisodeLog).
    """
    if not sessions:
        raise ValueError("empty training set")
    table = simulator.table
    catalog_size = catalog_size or table.n_items
    rng = np.random.default_rng(seed)
    d = table.dim

    actor = Actor.create(config.n_state, config.k_list, d, config.hidden, rng)
    critic = Critic.create(config.n_state, config.k_list, d, config.hidden, rng)
    buffer = ReplayBuffer(config.replay_capacity, config.priority_beta,
                          config.priority_epsilon)

    logs = []
    for episode in range(config.episodes):
        session = sessions[episode % len(sessions)]
        state = make_state(session.prior_positives, table, config.n_state)
        if config.episodes > 1:
            frac = episode / (config.episodes - 1)
        else:
            frac = 0.0
        noise_std = config.noise_start + frac * (config.noise_end - config.noise_start)

        cumulative = 0.0
        losses, qs = [], []
        for _ in range(config.steps_per_episode):
            action = recommend_list(actor, state, table, catalog_size,
                                    noise_std=noise_std, rng=rng)
            _, reward, next_state = simulator.step(state, action, rng)
            cumulative += reward
            buffer.add(Transition(state, action, reward, next_state,
                                  priority=buffer.max_priority()))
            state = next_state

            if len(buffer) >= config.warmup_transitions:
                idx, batch = buffer.sample(config.batch_size, rng)
                targets = td_targets(critic, actor, batch, config.gamma,
                                     table, catalog_size)
                td_errors, loss, mean_q = critic_update(critic, batch, targets,
                                                        config.critic_lr)
                buffer.update_priorities(idx, td_errors)
                actor_update(actor, critic, batch, config.actor_lr)
                soft_update(critic.target_params, critic.params, config.tau)
                soft_update(actor.target_params, actor.params, config.tau)
                losses.append(loss)
                qs.append(mean_q)

        logs.append(EpisodeLog(
            episode, cumulative,
            float(np.mean(losses)) if losses else float("nan"),
            float(np.mean(qs)) if qs else float("nan"),
        ))
    return actor, critic, logs
