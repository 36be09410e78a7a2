import numpy as np
import pytest

from futuregraph.simulator import pretrain
from futuregraph.training import fit_normalization, prepare, prepare_global
from futuregraph.world import WorldConfig, make_dataset

DEFAULT_MINUTES = 9000
DEFAULT_SPLIT = (0.66, 0.17, 0.17)


class Bundle:
    """Datasets, normalisation and prepared arrays for one generated world."""

    def __init__(self, splits, m_nodes=16, sim_epochs=80):
        self.splits = splits
        self.stats = fit_normalization(splits.train)
        self.glob = prepare_global(self.stats, splits.global_graph)
        self.train, self.val, self.test = (prepare(d, self.stats, m_nodes) for d in splits)
        self.pretrained = pretrain(self.train, self.val, self.glob.x, epochs=sim_epochs)
        self.sim = self.pretrained.params


@pytest.fixture(scope="session")
def small_world():
    return make_dataset(WorldConfig(), 600, (0.6, 0.2, 0.2))


@pytest.fixture(scope="session")
def small_bundle(small_world):
    return Bundle(small_world, sim_epochs=8)


@pytest.fixture(scope="session")
def default_bundle():
    return Bundle(make_dataset(WorldConfig(), DEFAULT_MINUTES, DEFAULT_SPLIT))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_full_run(default_bundle):
    """The full model trained with default settings on the default world."""
    from futuregraph.config import TrainConfig
    from futuregraph.training import train
    cfg = TrainConfig()
    return cfg, train(cfg, default_bundle.train, default_bundle.val, default_bundle.glob, default_bundle.sim)


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record one acceptance line, then assert it."""

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        ACCEPTANCE[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
        print(ACCEPTANCE[number])
        assert ok, ACCEPTANCE[number]

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
