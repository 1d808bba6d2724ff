import numpy as np
import pytest

from pvrec.core import Periodicity, Recording, Timing


def make_recording(rid="r1", user="u1", channel="ch1", periodicity=Periodicity.WEEKLY,
                   title="News", start=1200, end=1260, created_at=100):
    p = periodicity if isinstance(periodicity, Periodicity) else Periodicity.parse(periodicity)
    return Recording(rid, user, channel, p, title, Timing(start, end, p.frame), created_at)


def random_matrix_pairs(rng: np.random.Generator, n_users: int, n_items: int, density: float):
    """Random binary interaction pairs plus the id universes."""
    users = [f"u{i:03d}" for i in range(n_users)]
    items = [f"e{i:03d}" for i in range(n_items)]
    mask = rng.random((n_users, n_items)) < density
    pairs = [(users[u], items[i]) for u, i in zip(*np.nonzero(mask))]
    return users, items, pairs


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
