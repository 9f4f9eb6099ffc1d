"""Shared builders for small test instances, plus the acceptance banner."""

import numpy as np
import pytest

from ansrec.dataset import InteractionSet
from ansrec.model import ParamStore, init_params

# filled by tests/test_acceptance.py, printed once at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion_log():
    """Record one 'criterion N: PASS/FAIL ...' line for the final summary."""
    return ACCEPTANCE_LINES.append


def make_params(n_users: int = 6, n_items: int = 9, d: int = 4,
                seed: int = 0) -> ParamStore:
    return init_params(n_users, n_items, d, seed=seed)


def identity_gate_params(d: int = 2, n_users: int = 1, n_items: int = 1) -> ParamStore:
    """Gate transforms pinned to the identity, embeddings zeroed.

    Lets a test drive compute_gate and friends with hand-picked vectors.
    """
    return ParamStore(
        user_emb=np.zeros((n_users, d)),
        item_emb=np.zeros((n_items, d)),
        w_item=np.eye(d),
        w_user=np.eye(d),
        w_mag=np.ones(d),
    )


def make_train_set(n_users: int = 6, n_items: int = 9, per_user: int = 3,
                   seed: int = 0) -> InteractionSet:
    """Random dense-ish training set; every user gets per_user distinct items."""
    rng = np.random.default_rng(seed)
    rows = []
    ts = 0
    for u in range(n_users):
        for i in rng.choice(n_items, size=per_user, replace=False):
            rows.append((u, int(i), ts))
            ts += 1
    return InteractionSet(n_users=n_users, n_items=n_items,
                          interactions=np.array(rows, dtype=np.int64))
