"""Benchmark the item-selection hot path.

Compares the compiled greedy-selection kernel against the pure-numpy
fallback, and list-wise selection (one actor forward + K * |catalog| dot
products) against the item-wise baseline (one value-network forward per
catalog item).

Run:  python benchmarks/bench_selection.py [--items 10000] [--reps 20]
"""

import argparse
import time

import numpy as np

from lird import agent as agent_mod
from lird import kernels
from lird.agent import Actor
from lird.config import Config
from lird.embed import EmbeddingTable
from lird.evaluation import ItemwiseDqnPolicy
from lird.net import DenseNet
from lird.sim import make_state


def time_best(fn, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--items", type=int, default=10_000)
    parser.add_argument("--reps", type=int, default=20)
    args = parser.parse_args()

    cfg = Config()
    rng = np.random.default_rng(0)
    table = EmbeddingTable(rng.normal(size=(args.items, cfg.d)))
    actor = Actor.create(cfg.n_state, cfg.k_list, cfg.d, cfg.hidden, rng)
    state = make_state(list(range(cfg.n_state)), table, cfg.n_state)
    weights = actor.generate_weights(state)

    print(f"catalog={args.items} items, d={cfg.d}, K={cfg.k_list}, "
          f"reps={args.reps} (best-of)")
    print(f"active kernel backend: {kernels.BACKEND}")
    print()

    # greedy kernel: compiled vs fallback
    t_compiled = time_best(
        lambda: kernels.greedy_select(weights, table.vectors), args.reps)
    t_fallback = time_best(
        lambda: kernels.greedy_select_fallback(weights, table.vectors),
        args.reps)
    print(f"greedy kernel  compiled: {t_compiled * 1e3:8.3f} ms")
    print(f"greedy kernel  fallback: {t_fallback * 1e3:8.3f} ms   "
          f"({t_fallback / t_compiled:.1f}x slower)")
    print()

    # full per-list selection: list-wise vs item-wise
    sizes = [(cfg.n_state + 1) * cfg.d, *cfg.hidden, 1]
    acts = ["tanh"] * len(cfg.hidden) + ["identity"]
    dqn = ItemwiseDqnPolicy(DenseNet.create(sizes, acts, rng), table,
                            cfg.k_list, args.items, cfg.gamma, cfg.critic_lr)
    t_lird = time_best(
        lambda: agent_mod.recommend_list(actor, state, table, args.items),
        args.reps)
    t_dqn = time_best(lambda: dqn.top_k(state), args.reps)
    print(f"list selection  list-wise: {t_lird * 1e3:8.3f} ms "
          "(1 actor forward + K*|catalog| dot products)")
    print(f"list selection  item-wise: {t_dqn * 1e3:8.3f} ms "
          "(|catalog| value-net forwards)")
    print(f"speedup: {t_dqn / t_lird:.1f}x")


if __name__ == "__main__":
    main()
