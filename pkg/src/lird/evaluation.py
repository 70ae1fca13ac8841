"""Ranking metrics, the offline testing protocol, baselines, and sweeps.

Testing rolls a policy against the simulator. Parameters are reset to the
trained snapshot before every session (verified by checksum), but keep
updating within a session; session length is controlled by the short/long
budget of recommended items.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import agent as agent_mod
from .agent import Actor, AgentConfig, Critic, ReplayBuffer, Transition
from .embed import EmbeddingTable
from .net import DenseNet, soft_update
from .sim import ActionVec, Simulator, StateVec, make_action, make_state

SHORT_ITEM_BUDGET = 40
LONG_ITEM_BUDGET = 80


def ndcg(rewards) -> float:
    """Graded-relevance NDCG with gain = reward value; 0 when all zero."""
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size == 0:
        raise ValueError("empty feedback sequence")
    discounts = 1.0 / np.log2(np.arange(2, rewards.size + 2))
    dcg = float(rewards @ discounts)
    ideal = np.sort(rewards)[::-1]
    idcg = float(ideal @ discounts)
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def average_precision(rewards) -> float:
    """Binary-relevance AP with relevant = reward > 0; 0 when none relevant."""
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size == 0:
        raise ValueError("empty feedback sequence")
    relevant = rewards > 0
    if not relevant.any():
        return 0.0
    hits = np.cumsum(relevant)
    ranks = np.arange(1, rewards.size + 1)
    return float(np.mean(hits[relevant] / ranks[relevant]))


@dataclass
class EvalReport:
    policy: str
    length_class: str
    map_score: float
    ndcg_score: float
    mean_cumulative_reward: float
    sessions: int
    seconds_per_action: float

    def to_row(self) -> str:
        return (f"{self.policy},{self.length_class},{self.map_score:.6f},"
                f"{self.ndcg_score:.6f},{self.mean_cumulative_reward:.6f},"
                f"{self.sessions},{self.seconds_per_action:.6g}")

    CSV_HEADER = ("policy,length_class,map,ndcg,mean_cumulative_reward,"
                  "sessions,seconds_per_action")


class Policy:
    """A recommendation policy evaluated by run_test_protocol.

    Learning policies snapshot their trained parameters, restore them at
    session start, and keep updating within a session; static policies
    leave the hooks as no-ops.
    """

    name = "policy"
    k_list: int

    def act(self, state: StateVec, rng) -> ActionVec:
        raise NotImplementedError

    def begin_session(self) -> None:
        pass

    def observe(self, transition: Transition, rng) -> None:
        pass

    def params_checksum(self) -> int:
        return 0


class RandomPolicy(Policy):
    name = "random"

    def __init__(self, catalog_size: int, k_list: int, table: EmbeddingTable):
        self.catalog_size = catalog_size
        self.k_list = k_list
        self.table = table

    def act(self, state, rng):
        items = baseline_random(self.catalog_size, self.k_list, rng)
        return make_action(items, self.table)


def baseline_random(catalog_size: int, k_list: int, rng) -> list[int]:
    """K distinct items, uniform over the catalog."""
    if catalog_size < k_list:
        raise ValueError("catalog smaller than the recommendation list")
    return [int(i) for i in rng.choice(catalog_size, size=k_list, replace=False)]


class PopularityPolicy(Policy):
    """Globally most-positive items, excluding ones already in the state."""

    name = "popularity"

    def __init__(self, train_sessions, catalog_size: int, k_list: int,
                 table: EmbeddingTable):
        counts = np.zeros(catalog_size, dtype=np.int64)
        for s in train_sessions:
            for item in s.positive_items():
                counts[item] += 1
        # Stable sort on -count keeps lowest id first on ties.
        self.ranking = np.argsort(-counts, kind="stable")
        self.k_list = k_list
        self.table = table

    def act(self, state, rng):
        exclude = set(state.items)
        items = []
        for item in self.ranking:
            if int(item) not in exclude:
                items.append(int(item))
                if len(items) == self.k_list:
                    break
        return make_action(items, self.table)


class LirdPolicy(Policy):
    """Trained actor-critic with within-session DDPG updates during testing."""

    name = "lird"

    def __init__(self, actor: Actor, critic: Critic, table: EmbeddingTable,
                 config: AgentConfig, catalog_size: int):
        self.table = table
        self.config = config
        self.catalog_size = catalog_size
        self.k_list = config.k_list
        self._snapshot = {
            "actor": actor.params.flat_params(),
            "actor_target": actor.target_params.flat_params(),
            "critic": critic.params.flat_params(),
            "critic_target": critic.target_params.flat_params(),
        }
        self.actor = actor
        self.critic = critic
        self.buffer = None

    def begin_session(self):
        self.actor.params.set_flat_params(self._snapshot["actor"])
        self.actor.target_params.set_flat_params(self._snapshot["actor_target"])
        self.critic.params.set_flat_params(self._snapshot["critic"])
        self.critic.target_params.set_flat_params(self._snapshot["critic_target"])
        self.buffer = ReplayBuffer(self.config.replay_capacity,
                                   self.config.priority_beta,
                                   self.config.priority_epsilon)

    def act(self, state, rng):
        return agent_mod.recommend_list(self.actor, state, self.table,
                                        self.catalog_size)

    def observe(self, transition, rng):
        self.buffer.add(Transition(transition.state, transition.action,
                                   transition.reward, transition.next_state,
                                   priority=self.buffer.max_priority()))
        idx, batch = self.buffer.sample(min(self.config.batch_size,
                                            len(self.buffer)), rng)
        targets = agent_mod.td_targets(self.critic, self.actor, batch,
                                       self.config.gamma, self.table,
                                       self.catalog_size)
        td_errors, _, _ = agent_mod.critic_update(self.critic, batch, targets,
                                                  self.config.critic_lr)
        self.buffer.update_priorities(idx, td_errors)
        agent_mod.actor_update(self.actor, self.critic, batch,
                               self.config.actor_lr)
        soft_update(self.critic.target_params, self.critic.params, self.config.tau)
        soft_update(self.actor.target_params, self.actor.params, self.config.tau)

    def params_checksum(self):
        return (self.actor.params.checksum()
                ^ (self.critic.params.checksum() << 1)
                ^ (self.actor.target_params.checksum() << 2)
                ^ (self.critic.target_params.checksum() << 3))


class ItemwiseDqnPolicy(Policy):
    """Item-wise Q-network: scores (state, item) pairs and takes the top K.

    Action selection needs one full network forward per catalog item, which
    is the measured cost compared against the actor's dot products.
    """

    name = "itemwise_dqn"

    def __init__(self, net: DenseNet, table: EmbeddingTable, k_list: int,
                 catalog_size: int, gamma: float, lr: float,
                 n_candidates: int = 32):
        self.net = net
        self.target_net = net.copy()
        self.table = table
        self.k_list = k_list
        self.catalog_size = catalog_size
        self.gamma = gamma
        self.lr = lr
        self.n_candidates = n_candidates
        self._snapshot = net.flat_params()
        self._target_snapshot = self.target_net.flat_params()

    def begin_session(self):
        self.net.set_flat_params(self._snapshot)
        self.target_net.set_flat_params(self._target_snapshot)

    def snapshot(self):
        self._snapshot = self.net.flat_params()
        self._target_snapshot = self.target_net.flat_params()

    def q_all_items(self, state: StateVec, net: DenseNet | None = None) -> np.ndarray:
        net = net or self.net
        emb = self.table.vectors[:self.catalog_size]
        x = np.concatenate(
            [np.tile(state.vec, (self.catalog_size, 1)), emb], axis=1
        )
        return net.forward(x)[:, 0]

    def top_k(self, state: StateVec, epsilon: float = 0.0, rng=None) -> list[int]:
        if epsilon > 0.0 and rng is not None and rng.random() < epsilon:
            return baseline_random(self.catalog_size, self.k_list, rng)
        q = self.q_all_items(state)
        # Stable top-K, lowest id on ties.
        return [int(i) for i in np.argsort(-q, kind="stable")[: self.k_list]]

    def act(self, state, rng):
        return make_action(self.top_k(state), self.table)

    def update(self, transitions, rng):
        """One SGD step on the max-target Bellman loss.

        Each transition carries a single item and its per-position reward;
        the max over next actions is approximated on a sampled candidate set.
        """
        states = np.stack([t.state.vec for t in transitions])
        item_embs = np.stack([self.table.lookup(t.action.items[0])
                              for t in transitions])
        rewards = np.array([t.reward for t in transitions])
        if self.gamma > 0.0:
            cands = rng.choice(self.catalog_size, size=self.n_candidates,
                               replace=False)
            cand_emb = self.table.vectors[cands]
            q_next = np.empty(len(transitions))
            for i, t in enumerate(transitions):
                x = np.concatenate(
                    [np.tile(t.next_state.vec, (len(cands), 1)), cand_emb], axis=1
                )
                q_next[i] = self.target_net.forward(x)[:, 0].max()
            y = rewards + self.gamma * q_next
        else:
            y = rewards
        x = np.concatenate([states, item_embs], axis=1)
        q = self.net.forward(x)[:, 0]
        upstream = (-2.0 * (y - q) / len(transitions))[:, None]
        grads, _ = self.net.backward(x, upstream)
        self.net.apply_update(grads, self.lr)

    def observe(self, transition, rng):
        if transition.item_rewards is None:
            return
        per_item = [
            Transition(transition.state,
                       make_action([item], self.table),
                       float(r), transition.next_state)
            for item, r in zip(transition.action.items, transition.item_rewards)
        ]
        self.update(per_item, rng)
        soft_update(self.target_net, self.net, 0.01)

    def params_checksum(self):
        return self.net.checksum() ^ (self.target_net.checksum() << 1)


def train_itemwise_dqn(train_sessions, simulator: Simulator,
                       config: AgentConfig, seed: int = 0,
                       catalog_size: int | None = None,
                       episodes: int | None = None) -> ItemwiseDqnPolicy:
    """Train the item-wise Q-network baseline against the simulator.

    Selection during training is epsilon-greedy top-K over all items;
    per-item transitions are replayed with a sampled-candidate max target.
    """
    table = simulator.table
    catalog_size = catalog_size or table.n_items
    rng = np.random.default_rng(seed)
    d = table.dim
    sizes = [(config.n_state + 1) * d, *config.hidden, 1]
    acts = ["tanh"] * len(config.hidden) + ["identity"]
    net = DenseNet.create(sizes, acts, rng)
    policy = ItemwiseDqnPolicy(net, table, config.k_list, catalog_size,
                               config.gamma, config.critic_lr)
    buffer: list[Transition] = []
    episodes = episodes if episodes is not None else config.episodes
    for episode in range(episodes):
        session = train_sessions[episode % len(train_sessions)]
        state = make_state(session.prior_positives, table, config.n_state)
        epsilon = max(0.05, 1.0 - episode / max(episodes * 0.5, 1))
        for _ in range(config.steps_per_episode):
            items = policy.top_k(state, epsilon=epsilon, rng=rng)
            action = make_action(items, table)
            pattern, _, next_state = simulator.step(state, action, rng)
            for item, r in zip(items, pattern):
                buffer.append(Transition(state, make_action([item], table),
                                         float(r), next_state))
            if len(buffer) > config.replay_capacity:
                buffer = buffer[-config.replay_capacity:]
            state = next_state
            if len(buffer) >= config.warmup_transitions:
                idx = rng.choice(len(buffer), size=min(config.batch_size,
                                                       len(buffer)),
                                 replace=False)
                policy.update([buffer[i] for i in idx], rng)
                soft_update(policy.target_net, policy.net, 0.01)
    policy.snapshot()
    return policy


def lists_per_session(length_class: str, k_list: int) -> int:
    budget = SHORT_ITEM_BUDGET if length_class == "short" else LONG_ITEM_BUDGET
    return max(1, budget // k_list)


def run_test_protocol(policy: Policy, test_sessions, simulator: Simulator,
                      length_class: str, n_state: int, seed: int = 0,
                      max_sessions: int | None = None):
    """Evaluate a policy session by session against the simulator.

    Returns (EvalReport, protocol_trace) where the trace records the
    parameter checksums at the start and end of each session.
    """
    if length_class not in ("short", "long"):
        raise ValueError("length_class must be 'short' or 'long'")
    sessions = test_sessions[:max_sessions] if max_sessions else test_sessions
    table = simulator.table
    if not sessions:
        return (EvalReport(policy.name, length_class, 0.0, 0.0, 0.0, 0, 0.0), [])

    policy.begin_session()
    start_checksum = policy.params_checksum()

    session_maps, session_ndcgs, session_rewards = [], [], []
    trace = []
    n_actions = 0
    act_seconds = 0.0
    for i, session in enumerate(sessions):
        rng = np.random.default_rng([seed, i])
        policy.begin_session()
        checksum = policy.params_checksum()
        if checksum != start_checksum:
            raise RuntimeError("parameter snapshot was not restored at session start")
        state = make_state(session.prior_positives, table, n_state)
        n_lists = lists_per_session(length_class, policy.k_list)
        aps, ndcgs = [], []
        cumulative = 0.0
        for _ in range(n_lists):
            t0 = time.perf_counter()
            action = policy.act(state, rng)
            act_seconds += time.perf_counter() - t0
            n_actions += 1
            pattern, reward, next_state = simulator.step(state, action, rng)
            aps.append(average_precision(pattern))
            ndcgs.append(ndcg(pattern))
            cumulative += reward
            transition = Transition(state, action, reward, next_state,
                                    item_rewards=pattern)
            policy.observe(transition, rng)
            state = next_state
        session_maps.append(float(np.mean(aps)))
        session_ndcgs.append(float(np.mean(ndcgs)))
        session_rewards.append(cumulative)
        trace.append({"session": session.session_id,
                      "start_checksum": checksum,
                      "end_checksum": policy.params_checksum()})

    report = EvalReport(
        policy=policy.name,
        length_class=length_class,
        map_score=float(np.mean(session_maps)),
        ndcg_score=float(np.mean(session_ndcgs)),
        mean_cumulative_reward=float(np.mean(session_rewards)),
        sessions=len(sessions),
        seconds_per_action=act_seconds / max(n_actions, 1),
    )
    return report, trace


@dataclass
class ExperimentResult:
    config: object
    reports: list[EvalReport]
    traces: dict[str, list]
    actor: Actor
    critic: Critic
    training_log: list
    simulator: Simulator
    train_sessions: list
    test_sessions: list

    def report_for(self, policy: str, length_class: str) -> EvalReport:
        for r in self.reports:
            if r.policy == policy and r.length_class == length_class:
                return r
        raise KeyError(f"no report for {policy}/{length_class}")


def run_experiment(cfg, sessions=None,
                   policies=("lird", "random", "popularity"),
                   length_classes=("short", "long")) -> ExperimentResult:
    """Full pipeline: data -> embeddings -> simulator -> training -> reports."""
    from . import data, embed as embed_mod, sim as sim_mod

    if sessions is None:
        sessions = data.generate_synthetic(
            cfg.catalog_size, cfg.n_sessions, cfg.n_clusters,
            seed=cfg.stage_seed("gen"),
            events_per_session=cfg.events_per_session,
            prior_len=cfg.n_state,
        )
    train_sessions, test_sessions = data.split_sessions(sessions, cfg.train_fraction)

    table, _ = embed_mod.train_embeddings(
        train_sessions, cfg.catalog_size, d=cfg.d, window=cfg.window,
        n_negative=cfg.n_negative, epochs=cfg.embed_epochs, lr=cfg.embed_lr,
        seed=cfg.stage_seed("embed"),
    )
    memory = sim_mod.build_memory(train_sessions, table, cfg.n_state,
                                  cfg.k_list, cfg.reward_map)
    simulator = Simulator.from_memory(table, memory, cfg.sim_config())

    agent_cfg = cfg.agent_config()
    actor, critic, training_log = agent_mod.train(
        train_sessions, simulator, agent_cfg, seed=cfg.stage_seed("train"),
        catalog_size=cfg.catalog_size,
    )

    available: dict[str, Policy] = {}
    if "lird" in policies:
        available["lird"] = LirdPolicy(actor, critic, table, agent_cfg,
                                       cfg.catalog_size)
    if "random" in policies:
        available["random"] = RandomPolicy(cfg.catalog_size, cfg.k_list, table)
    if "popularity" in policies:
        available["popularity"] = PopularityPolicy(train_sessions,
                                                   cfg.catalog_size,
                                                   cfg.k_list, table)
    if "itemwise_dqn" in policies:
        available["itemwise_dqn"] = train_itemwise_dqn(
            train_sessions, simulator, agent_cfg,
            seed=cfg.stage_seed("dqn"), catalog_size=cfg.catalog_size,
            episodes=cfg.dqn_episodes,
        )

    reports, traces = [], {}
    eval_seed_base = cfg.stage_seed("eval")
    for name in policies:
        policy = available[name]
        for length_class in length_classes:
            report, trace = run_test_protocol(
                policy, test_sessions, simulator, length_class, cfg.n_state,
                seed=eval_seed_base[0] * 31 + eval_seed_base[1],
                max_sessions=cfg.eval_sessions,
            )
            reports.append(report)
            traces[f"{name}/{length_class}"] = trace

    return ExperimentResult(cfg, reports, traces, actor, critic,
                            training_log, simulator, train_sessions,
                            test_sessions)


SWEEP_CSV_HEADER = ("param,value,label,length_class,map,ndcg,"
                    "mean_cumulative_reward,sessions")


def sweep(param: str, values, cfg, sessions=None) -> list[dict]:
    """Train and test once per swept value with a shared base seed.

    Returns one row per value with long-session metrics for the trained
    policy; K=1 rows are labeled item-wise.
    """
    import dataclasses

    if param not in ("K", "alpha"):
        raise ValueError("sweep parameter must be 'K' or 'alpha'")
    if not values:
        raise ValueError("sweep needs at least one value")
    rows = []
    for value in values:
        if param == "K":
            run_cfg = dataclasses.replace(cfg, k_list=int(value))
        else:
            run_cfg = dataclasses.replace(cfg, alpha=float(value))
        result = run_experiment(run_cfg, sessions=sessions,
                                policies=("lird",), length_classes=("long",))
        report = result.report_for("lird", "long")
        label = f"{param}={value}"
        if param == "K" and int(value) == 1:
            label += " (item-wise)"
        rows.append({
            "param": param,
            "value": value,
            "label": label,
            "length_class": "long",
            "map": report.map_score,
            "ndcg": report.ndcg_score,
            "mean_cumulative_reward": report.mean_cumulative_reward,
            "sessions": report.sessions,
        })
    return rows


def sweep_rows_to_csv(rows) -> str:
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        lines.append(f"{r['param']},{r['value']},\"{r['label']}\","
                     f"{r['length_class']},{r['map']:.6f},{r['ndcg']:.6f},"
                     f"{r['mean_cumulative_reward']:.6f},{r['sessions']}")
    return "\n".join(lines) + "\n"
