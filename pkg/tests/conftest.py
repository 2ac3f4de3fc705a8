import os
from importlib import resources

import numpy as np
import pytest

from flexdro.case_io import Bus, CaseDocument, Generator, load_case
from flexdro.dispatch import DispatchConfig, build_matrices, startup_state
from flexdro.network import Hyperbox, build_network
from flexdro.synthetic import random_case

FIXTURES = resources.files("flexdro") / "fixtures"


def fixture_path(name: str) -> str:
    return str(FIXTURES / name)


def toy_case(cap: float = 10.0, load: float = 5.0, cost: float = 0.0) -> CaseDocument:
    """One bus, one unit on [0, cap], nothing else binding."""
    return CaseDocument(100.0, 1, (Bus(1, load),), (Generator("g1", 1, 0.0, cap, 100.0, 100.0, cost),))


def toy_instance(cap: float = 10.0, delta: float = 10.0):
    net = build_network(toy_case(cap))
    m = build_matrices(net, startup_state(net), tau=1e6)
    return m, Hyperbox(net.load, np.array([delta]))


def random_instance(seed: int, n_bus: int, storage=None, delta_scale: float = 0.5):
    """A random case assembled at its startup state with a random box."""
    rng = np.random.default_rng(seed)
    doc = random_case(rng, n_bus, storage=bool(rng.random() < 0.5) if storage is None else storage)
    net = build_network(doc)
    m = build_matrices(net, startup_state(net))
    box = Hyperbox(net.load, delta_scale * net.load + rng.uniform(0.0, 5.0, n_bus))
    return net, m, box


@pytest.fixture(scope="session")
def toy():
    return toy_instance()


@pytest.fixture(scope="session")
def case6():
    return build_network(load_case(fixture_path("case6.json")))


@pytest.fixture(scope="session")
def case14():
    return build_network(load_case(fixture_path("case14.m"), fixture_path("case14_storage.json")))


def pytest_report_header(config):
    from flexdro.lp import CORE_NAME
    return f"simplex core: {CORE_NAME}" + (" (forced)" if os.environ.get("FLEXDRO_PURE_PYTHON") else "")


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call":
        item.rep_call = rep
    return rep


def pytest_terminal_summary(terminalreporter, config):
    from test_acceptance import ACCEPTANCE_KEY
    results = config.stash.get(ACCEPTANCE_KEY, None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for (number, _), (title, ok, detail) in sorted(results.items()):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {title}: {detail}")
