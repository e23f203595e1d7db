import random

import numpy as np
import pytest
from hypothesis import strategies as st

from stablerank.data import CapacityConfig, InteractionDataset, PreferenceProfile


def random_instance(rng: random.Random, max_users=8, max_items=8, max_k=2, max_cap=3):
    """Random strict full preferences with total capacity >= users * k."""
    while True:
        n = rng.randint(1, max_users)
        m = rng.randint(1, max_items)
        k = rng.randint(1, min(max_k, m))
        caps = [rng.randint(1, max_cap) for _ in range(m)]
        if sum(caps) >= n * k:
            break
    user_prefs = [rng.sample(range(m), m) for _ in range(n)]
    item_prefs = [rng.sample(range(n), n) for _ in range(m)]
    return PreferenceProfile.from_lists(user_prefs, item_prefs), CapacityConfig.per_item(k, caps)


@st.composite
def instances(draw, max_users=6, max_items=6, max_k=2, max_cap=3):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_instance(random.Random(seed), max_users, max_items, max_k, max_cap)


def dataset_from_triples(triples):
    users, items = {}, {}
    for u, i, _ in triples:
        users.setdefault(u, len(users))
        items.setdefault(i, len(items))
    return InteractionDataset(
        tuple(users), tuple(items),
        np.array([users[u] for u, _, _ in triples]),
        np.array([items[i] for _, i, _ in triples]),
        np.array([float(r) for _, _, r in triples]),
    )


def random_dataset(rng: np.random.Generator, n_users, n_items, density=0.4):
    triples = []
    for u in range(n_users):
        rated = rng.random(n_items) < density
        rated[rng.integers(n_items)] = True
        for i in np.flatnonzero(rated):
            triples.append((f"u{u}", f"i{i}", int(rng.integers(1, 6))))
    return dataset_from_triples(triples)


@pytest.fixture
def conflict_2x2():
    """Both users want i1 first; i1 prefers u2, i2 prefers u1 (0-based)."""
    prefs = PreferenceProfile.from_lists([[0, 1], [0, 1]], [[1, 0], [0, 1]])
    return prefs, CapacityConfig.uniform(1, 1, 2)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
