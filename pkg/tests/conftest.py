import numpy as np
import pytest

from lird import data, embed, sim


@pytest.fixture(scope="session")
def tiny_world():
    """Small end-to-end fixture: sessions, embeddings, simulator."""
    sessions = data.generate_synthetic(60, 200, 4, seed=7, events_per_session=16)
    train, test = data.split_sessions(sessions, 0.7)
    table, _ = embed.train_embeddings(train, 60, d=8, epochs=3, seed=11)
    memory = sim.build_memory(train, table, n_state=5, k_list=4)
    simulator = sim.Simulator.from_memory(table, memory, sim.SimConfig())
    return {
        "sessions": sessions,
        "train": train,
        "test": test,
        "table": table,
        "memory": memory,
        "simulator": simulator,
        "catalog_size": 60,
        "n_state": 5,
        "k_list": 4,
    }


def random_table(rng, n_items, d):
    return embed.EmbeddingTable(rng.normal(size=(n_items, d)))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
