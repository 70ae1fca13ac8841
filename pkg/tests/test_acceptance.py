"""End-to-end acceptance gates.

Each test asserts one release criterion at its stated tolerance: simulator
exactness, gradient correctness, greedy-selection equivalence, training
lift over the baselines, the discounting ablation, selection cost,
protocol fidelity, metric oracles, and sweep reproduction.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from lird import agent as agent_mod
from lird import data, kernels, sim
from lird.agent import Actor, Critic, actor_update
from lird.config import Config
from lird.embed import EmbeddingTable, sgns_loss_and_grad
from lird.evaluation import (
    ItemwiseDqnPolicy,
    average_precision,
    ndcg,
    run_experiment,
    sweep,
)
from lird.net import DenseNet
from lird.sim import MemoryTriple, make_action, make_state


def random_memory(rng):
    """A small synthetic memory with random embeddings and triples."""
    n_items = int(rng.integers(8, 30))
    d = int(rng.integers(2, 9))
    k = int(rng.integers(1, 4))
    n_state = int(rng.integers(2, 6))
    n_triples = int(rng.integers(5, 201))
    table = EmbeddingTable(rng.normal(size=(n_items, d)))
    reward_values = [0.0, 1.0, 5.0]
    memory = []
    for _ in range(n_triples):
        s_items = rng.choice(n_items, size=n_state, replace=False)
        a_items = rng.choice(n_items, size=k, replace=False)
        rewards = tuple(float(rng.choice(reward_values)) for _ in range(k))
        memory.append(MemoryTriple(
            make_state(list(s_items), table, n_state),
            make_action(list(a_items), table),
            rewards,
        ))
    return table, memory, n_items, n_state, k


def brute_force_probs(pair, memory, alpha):
    """Per-triple aggregation of pairwise similarities into pattern groups."""
    sums = {}
    for m in memory:
        sums[m.rewards] = sums.get(m.rewards, 0.0) + sim.pair_similarity(
            pair, m, alpha)
    patterns = sorted(sums)
    scores = np.array([max(sums[p], 0.0) for p in patterns])
    total = scores.sum()
    if total <= 0.0:
        return patterns, np.full(len(patterns), 1.0 / len(patterns))
    return patterns, scores / total


class TestCriterion1SimulatorExactness:
    def test_grouped_probabilities_match_brute_force(self):
        rng = np.random.default_rng(101)
        t0 = time.perf_counter()
        worst = 0.0
        for _ in range(100):
            table, memory, n_items, n_state, k = random_memory(rng)
            alpha = float(rng.uniform(0.0, 1.0))
            groups = sim.build_groups(memory)
            s_items = rng.choice(n_items, size=n_state, replace=False)
            a_items = rng.choice(n_items, size=k, replace=False)
            pair = (make_state(list(s_items), table, n_state),
                    make_action(list(a_items), table))
            got = sim.group_probabilities(pair, groups, alpha)
            patterns, want = brute_force_probs(pair, memory, alpha)
            assert groups.patterns == patterns
            worst = max(worst, float(np.abs(got - want).max()))
        elapsed = time.perf_counter() - t0
        assert worst < 1e-9, f"max abs probability error {worst:.3e}"
        assert elapsed < 5.0, f"simulator exactness check took {elapsed:.1f}s"


def fd_gradient(loss, theta, h=1e-5):
    num = np.empty_like(theta)
    for i in range(len(theta)):
        tp = theta.copy(); tp[i] += h
        tm = theta.copy(); tm[i] -= h
        num[i] = (loss(tp) - loss(tm)) / (2 * h)
    return num


def rel_error(analytic, numeric):
    return float(np.abs(analytic - numeric).max()
                 / max(np.abs(numeric).max(), 1e-10))


class TestCriterion2GradientCorrectness:
    def test_all_gradient_paths_match_finite_differences(self):
        rng = np.random.default_rng(202)
        t0 = time.perf_counter()
        worst = {"actor": 0.0, "critic": 0.0, "sgns": 0.0, "composed": 0.0}
        for _ in range(20):
            d = int(rng.integers(2, 4))
            k = int(rng.integers(1, 3))
            n_state = int(rng.integers(2, 4))
            hidden = (int(rng.integers(3, 6)),)
            actor = Actor.create(n_state, k, d, hidden, rng)
            critic = Critic.create(n_state, k, d, hidden, rng)

            # actor and critic nets: gradient of sum(upstream * forward(x))
            for tag, net in (("actor", actor.params), ("critic", critic.params)):
                x = rng.normal(size=net.n_in)
                upstream = rng.normal(size=net.n_out)
                grads, _ = net.backward(x, upstream)
                analytic = np.concatenate(
                    [np.concatenate([dw.ravel(), db.ravel()]) for dw, db in grads])

                def net_loss(theta, net=net, x=x, upstream=upstream):
                    probe = net.copy()
                    probe.set_flat_params(theta)
                    return float(upstream @ probe.forward(x))

                numeric = fd_gradient(net_loss, net.flat_params())
                worst[tag] = max(worst[tag], rel_error(analytic, numeric))

            # skip-gram objective
            n, dim, b, m = 5, 3, 6, 2
            w_in = rng.normal(scale=0.5, size=(n, dim))
            w_out = rng.normal(scale=0.5, size=(n, dim))
            centers = rng.integers(n, size=b)
            contexts = rng.integers(n, size=b)
            negs = rng.integers(n, size=(b, m))
            _, g_in, g_out = sgns_loss_and_grad(w_in, w_out, centers,
                                                contexts, negs)

            def sgns_loss(theta):
                wi = theta[: n * dim].reshape(n, dim)
                wo = theta[n * dim:].reshape(n, dim)
                return sgns_loss_and_grad(wi, wo, centers, contexts, negs)[0]

            numeric = fd_gradient(sgns_loss,
                                  np.concatenate([w_in.ravel(), w_out.ravel()]))
            analytic = np.concatenate([g_in.ravel(), g_out.ravel()])
            worst["sgns"] = max(worst["sgns"], rel_error(analytic, numeric))

            # composed actor-through-critic policy-gradient path
            table = EmbeddingTable(rng.normal(size=(10, d)))
            states = np.stack([
                make_state(list(rng.choice(10, n_state, replace=False)),
                           table, n_state).vec
                for _ in range(3)
            ])
            batch = [agent_mod.Transition(
                make_state(list(rng.choice(10, n_state, replace=False)),
                           table, n_state),
                make_action(list(rng.choice(10, k, replace=False)), table),
                0.0, make_state(list(rng.choice(10, n_state, replace=False)),
                                table, n_state))
                for _ in range(3)]
            states = np.stack([t.state.vec for t in batch])
            flat0 = actor.params.flat_params()

            def mean_q(theta):
                probe = actor.params.copy()
                probe.set_flat_params(theta)
                w = probe.forward(states)
                x = np.concatenate([states, w], axis=1)
                return float(critic.params.forward(x).mean())

            lr = 1e-7
            actor_update(actor, critic, batch, lr)
            analytic = (actor.params.flat_params() - flat0) / lr
            numeric = fd_gradient(mean_q, flat0)
            worst["composed"] = max(worst["composed"],
                                    rel_error(analytic, numeric))

        elapsed = time.perf_counter() - t0
        for tag in ("actor", "critic", "sgns"):
            assert worst[tag] < 1e-4, f"{tag} gradient rel error {worst[tag]:.3e}"
        assert worst["composed"] < 1e-3, \
            f"composed-path gradient rel error {worst['composed']:.3e}"
        assert elapsed < 30.0, f"gradient checks took {elapsed:.1f}s"


def exhaustive_greedy(weights, emb):
    taken = set()
    out = []
    for w in weights:
        best, best_score = None, None
        for i in range(emb.shape[0]):
            if i in taken:
                continue
            score = float(np.dot(w, emb[i]))
            if best is None or score > best_score:
                best, best_score = i, score
        out.append(best)
        taken.add(best)
    return out


class TestCriterion3GreedyOracleEquivalence:
    def test_200_fixtures_exact(self):
        rng = np.random.default_rng(303)
        for _ in range(200):
            n = int(rng.integers(5, 51))
            d = int(rng.integers(1, 9))
            k = int(rng.integers(1, min(n, 6)))
            weights = rng.normal(size=(k, d))
            emb = rng.normal(size=(n, d))
            got = list(kernels.greedy_select(weights, emb))
            assert got == exhaustive_greedy(weights, emb)


@pytest.fixture(scope="module")
def desk_scale_run():
    """One full pipeline at the default desk scale, shared across criteria."""
    cfg = Config(seed=0)
    t0 = time.perf_counter()
    result = run_experiment(cfg, policies=("lird", "random", "popularity"),
                            length_classes=("long",))
    elapsed = time.perf_counter() - t0
    return cfg, result, elapsed


class TestCriterion4TrainingLift:
    def test_lift_over_baselines_within_time_budget(self, desk_scale_run):
        cfg, result, elapsed = desk_scale_run
        assert cfg.n_sessions >= 2000 and cfg.catalog_size == 500
        assert cfg.n_clusters == 5
        lird = result.report_for("lird", "long").mean_cumulative_reward
        rand = result.report_for("random", "long").mean_cumulative_reward
        pop = result.report_for("popularity", "long").mean_cumulative_reward
        assert lird >= 1.5 * rand, \
            f"lift over random {lird / rand:.2f}x < 1.5x"
        assert lird >= 1.1 * pop, \
            f"lift over popularity {lird / pop:.2f}x < 1.1x"
        assert elapsed <= 15 * 60, f"pipeline took {elapsed:.0f}s"


class TestCriterion5DiscountingAblation:
    def test_discounted_agent_not_worse_than_myopic(self, desk_scale_run):
        cfg, result, _ = desk_scale_run
        sessions = result.train_sessions + result.test_sessions
        myopic_cfg = dataclasses.replace(cfg, gamma=0.0)
        myopic = run_experiment(myopic_cfg, sessions=sessions,
                                policies=("lird",), length_classes=("long",))
        discounted = result.report_for("lird", "long").mean_cumulative_reward
        baseline = myopic.report_for("lird", "long").mean_cumulative_reward
        # soft gate: no regression beyond 5 percent
        assert discounted >= 0.95 * baseline, \
            f"gamma=0.75 reward {discounted:.2f} < 95% of gamma=0 {baseline:.2f}"


class TestCriterion6SelectionCost:
    def test_list_selection_at_least_2x_faster_than_itemwise(self):
        cfg = Config()
        n_items = 10_000
        rng = np.random.default_rng(606)
        table = EmbeddingTable(rng.normal(size=(n_items, cfg.d)))
        actor = Actor.create(cfg.n_state, cfg.k_list, cfg.d, cfg.hidden, rng)
        sizes = [(cfg.n_state + 1) * cfg.d, *cfg.hidden, 1]
        net = DenseNet.create(sizes, ["tanh", "tanh", "identity"], rng)
        dqn = ItemwiseDqnPolicy(net, table, cfg.k_list, n_items,
                                cfg.gamma, cfg.critic_lr)
        state = make_state(list(range(cfg.n_state)), table, cfg.n_state)

        def time_best(fn, reps=5):
            best = math.inf
            for _ in range(reps):
                t0 = time.perf_counter()
                fn()
                best = min(best, time.perf_counter() - t0)
            return best

        lird_time = time_best(
            lambda: agent_mod.recommend_list(actor, state, table, n_items))
        dqn_time = time_best(lambda: dqn.top_k(state))
        assert dqn_time >= 2.0 * lird_time, \
            f"item-wise {dqn_time * 1e3:.2f}ms vs list-wise {lird_time * 1e3:.2f}ms"


class TestCriterion7ProtocolFidelity:
    def test_checksums_restored_at_start_and_drift_within_sessions(
            self, desk_scale_run):
        _, result, _ = desk_scale_run
        trace = result.traces["lird/long"]
        assert len(trace) >= 100
        starts = {t["start_checksum"] for t in trace}
        assert len(starts) == 1, "trained snapshot not restored at session start"
        for t in trace:
            assert t["end_checksum"] != t["start_checksum"], \
                "learning policy parameters did not change within a session"


class TestCriterion8MetricOracles:
    def test_unit_values_to_1e12(self):
        assert abs(ndcg([0.0, 5.0])
                   - math.log(2, 2) / math.log(3, 2)) < 1e-12
        assert abs(ndcg([5.0, 1.0, 0.0]) - 1.0) < 1e-12
        assert ndcg([0.0, 0.0, 0.0]) == 0.0
        assert abs(average_precision([1.0, 0.0, 5.0]) - 5.0 / 6.0) < 1e-12
        assert abs(average_precision([5.0, 1.0, 0.0]) - 1.0) < 1e-12
        assert average_precision([0.0, 0.0]) == 0.0


SWEEP_CONFIG = Config(
    catalog_size=100, n_sessions=300, n_clusters=5, events_per_session=16,
    d=16, embed_epochs=2, hidden=(32, 16), episodes=30, steps_per_episode=10,
    warmup_transitions=100, batch_size=32, eval_sessions=15, seed=1,
)


class TestCriterion9SweepReproduction:
    def check_rows(self, rows, values):
        assert [r["value"] for r in rows] == list(values)
        for r in rows:
            assert np.isfinite(r["map"]) and 0.0 <= r["map"] <= 1.0
            assert np.isfinite(r["ndcg"]) and 0.0 <= r["ndcg"] <= 1.0
            assert np.isfinite(r["mean_cumulative_reward"])
            assert r["mean_cumulative_reward"] >= 0.0

    def test_k_sweep(self):
        rows = sweep("K", [1, 2, 4, 8], SWEEP_CONFIG)
        self.check_rows(rows, [1, 2, 4, 8])
        assert rows[0]["label"] == "K=1 (item-wise)"

    def test_alpha_sweep_deterministic(self):
        values = [0.0, 0.2, 0.5, 0.8, 1.0]
        rows = sweep("alpha", values, SWEEP_CONFIG)
        self.check_rows(rows, values)
        again = sweep("alpha", values, SWEEP_CONFIG)
        assert rows == again
