"""Offline user-agent interaction simulator.

Memory of historical (state, action) -> reward-list triples is grouped by
reward pattern; a query pair is mapped to a pattern by blended cosine
similarity against the per-group aggregates, the pattern is folded into a
positionally-discounted scalar reward, and positive items advance the state.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .data import Session
from .embed import EmbeddingTable

PAD_ITEM = -1  # reserved null item with an all-zero embedding


def embed_concat(table: EmbeddingTable, items) -> np.ndarray:
    """Concatenation of item embeddings in order; PAD_ITEM rows are zero."""
    d = table.dim
    vec = np.zeros(len(items) * d)
    for i, item in enumerate(items):
        if item != PAD_ITEM:
            vec[i * d : (i + 1) * d] = table.lookup(item)
    return vec


@dataclass(frozen=True)
class StateVec:
    """Exactly N item ids, chronological, left-padded with PAD_ITEM."""

    items: tuple[int, ...]
    vec: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ActionVec:
    """Ordered list of K recommended item ids."""

    items: tuple[int, ...]
    vec: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class MemoryTriple:
    state: StateVec
    action: ActionVec
    rewards: tuple[float, ...]


@dataclass(frozen=True)
class RewardGroup:
    pattern: tuple[float, ...]
    count: int
    mean_state: np.ndarray = field(repr=False)   # mean of s_i/||s_i||
    mean_action: np.ndarray = field(repr=False)  # mean of a_i/||a_i||


@dataclass
class SimConfig:
    alpha: float = 0.2
    gamma_pos: float = 0.9
    refresh_every: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0,1]")
        if not 0.0 < self.gamma_pos <= 1.0:
            raise ValueError("positional discount must lie in (0,1]")


def make_state(positives, table: EmbeddingTable, n_state: int) -> StateVec:
    """State from the most recent positives, left-padded to length N."""
    recent = list(positives)[-n_state:]
    items = tuple([PAD_ITEM] * (n_state - len(recent)) + recent)
    return StateVec(items, embed_concat(table, items))


def make_action(items, table: EmbeddingTable) -> ActionVec:
    return ActionVec(tuple(items), embed_concat(table, items))


def advance_state(state: StateVec, action: ActionVec, rewards,
                  table: EmbeddingTable) -> StateVec:
    """Append positively-rewarded action items, evicting the oldest."""
    items = list(state.items)
    changed = False
    for item, r in zip(action.items, rewards):
        if r > 0:
            items.pop(0)
            items.append(item)
            changed = True
    if not changed:
        return state
    return StateVec(tuple(items), embed_concat(table, items))


def build_memory(sessions: list[Session], table: EmbeddingTable,
                 n_state: int, k_list: int,
                 reward_map: dict | None = None) -> list[MemoryTriple]:
    """Replay each session in windows of K, logging (state, action, rewards).

    Positive items advance the state between windows; trailing partial
    windows are dropped.
    """
    from .data import DEFAULT_REWARDS

    rmap = reward_map or DEFAULT_REWARDS
    if k_list < 1:
        raise ValueError("need K >= 1")
    memory = []
    for session in sessions:
        state = make_state(session.prior_positives, table, n_state)
        events = session.events
        for start in range(0, len(events) - k_list + 1, k_list):
            window = events[start : start + k_list]
            action = make_action([item for item, _ in window], table)
            rewards = tuple(float(rmap[fb.value]) for _, fb in window)
            memory.append(MemoryTriple(state, action, rewards))
            state = advance_state(state, action, rewards, table)
    return memory


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("zero-norm vector: cosine similarity undefined")
    return v / norm


def pair_similarity(p, m: MemoryTriple, alpha: float) -> float:
    """alpha * cos(states) + (1 - alpha) * cos(actions)."""
    state, action = p
    s_cos = _unit(state.vec) @ _unit(m.state.vec)
    a_cos = _unit(action.vec) @ _unit(m.action.vec)
    return float(alpha * s_cos + (1.0 - alpha) * a_cos)


class Groups:
    """Reward-pattern groups with stacked aggregates for fast scoring."""

    def __init__(self, groups: list[RewardGroup]):
        if not groups:
            raise ValueError("cannot build groups from empty memory")
        self.groups = groups
        self.patterns = [g.pattern for g in groups]
        self.counts = np.array([g.count for g in groups], dtype=float)
        self.mean_states = np.stack([g.mean_state for g in groups])
        self.mean_actions = np.stack([g.mean_action for g in groups])

    def __len__(self):
        return len(self.groups)


def build_groups(memory: list[MemoryTriple]) -> Groups:
    if not memory:
        raise ValueError("cannot build groups from empty memory")
    sums: dict[tuple, list] = {}
    for m in memory:
        entry = sums.setdefault(
            m.rewards, [0, np.zeros_like(m.state.vec), np.zeros_like(m.action.vec)]
        )
        entry[0] += 1
        entry[1] += _unit(m.state.vec)
        entry[2] += _unit(m.action.vec)
    groups = [
        RewardGroup(pattern, n, s_sum / n, a_sum / n)
        for pattern, (n, s_sum, a_sum) in sorted(sums.items())
    ]
    return Groups(groups)


def group_probabilities(p, groups: Groups, alpha: float) -> np.ndarray:
    """Per-group mapping probabilities via the grouped closed form.

    Unnormalized score: N_x * (alpha * s.s_bar/||s|| + (1-alpha) * a.a_bar/||a||).
    Negative scores are clamped to 0; if every score clamps, the distribution
    falls back to uniform.
    """
    state, action = p
    s_hat = _unit(state.vec)
    a_hat = _unit(action.vec)
    scores = groups.counts * (
        alpha * (groups.mean_states @ s_hat)
        + (1.0 - alpha) * (groups.mean_actions @ a_hat)
    )
    scores = np.maximum(scores, 0.0)
    total = scores.sum()
    if total <= 0.0:
        return np.full(len(groups), 1.0 / len(groups))
    return scores / total


def sample_pattern(patterns, probabilities, rng) -> tuple[float, ...]:
    probabilities = np.asarray(probabilities, dtype=float)
    if len(patterns) == 0:
        raise ValueError("empty pattern distribution")
    if abs(probabilities.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must sum to 1")
    idx = rng.choice(len(patterns), p=probabilities)
    return patterns[idx]


def overall_reward(pattern, gamma_pos: float) -> float:
    """Positional fold: sum_k Gamma^(k-1) * pattern[k]."""
    weights = gamma_pos ** np.arange(len(pattern))
    return float(weights @ np.asarray(pattern, dtype=float))


class Simulator:
    """Bundles embeddings, groups, and config behind a step() interface."""

    def __init__(self, table: EmbeddingTable, groups: Groups, config: SimConfig):
        self.table = table
        self.groups = groups
        self.config = config

    @classmethod
    def from_memory(cls, table, memory, config):
        return cls(table, build_groups(memory), config)

    def step(self, state: StateVec, action: ActionVec, rng):
        """Returns (per-item rewards, overall reward, next_state)."""
        if len(set(action.items)) != len(action.items):
            raise ValueError("action must contain distinct items")
        probs = group_probabilities((state, action), self.groups, self.config.alpha)
        pattern = sample_pattern(self.groups.patterns, probs, rng)
        reward = overall_reward(pattern, self.config.gamma_pos)
        next_state = advance_state(state, action, pattern, self.table)
        return pattern, reward, next_state


def save_memory(path, memory: list[MemoryTriple], table: EmbeddingTable) -> None:
    """Cache memory triples; tagged with the embedding-table checksum."""
    if not memory:
        raise ValueError("refusing to cache empty memory")
    n = len(memory[0].state.items)
    k = len(memory[0].action.items)
    states = np.array([m.state.items for m in memory], dtype=np.int64)
    actions = np.array([m.action.items for m in memory], dtype=np.int64)
    rewards = np.array([m.rewards for m in memory], dtype=float)
    meta = {"n": n, "k": k, "embedding_checksum": table.checksum()}
    np.savez(
        path,
        states=states,
        actions=actions,
        rewards=rewards,
        meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
    )


def load_memory(path, table: EmbeddingTable) -> list[MemoryTriple]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["embedding_checksum"] != table.checksum():
            raise ValueError("memory cache is stale: embedding table changed")
        memory = []
        for s_items, a_items, rew in zip(data["states"], data["actions"], data["rewards"]):
            state = StateVec(tuple(int(i) for i in s_items), embed_concat(table, s_items))
            action = make_action([int(i) for i in a_items], table)
            memory.append(MemoryTriple(state, action, tuple(float(r) for r in rew)))
    return memory
