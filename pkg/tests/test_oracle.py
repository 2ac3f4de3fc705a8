import numpy as np
import pytest

from flexdro.case_io import Bus, CaseDocument, Generator, Line
from flexdro.dispatch import build_matrices, evaluate_phi, startup_state
from flexdro.network import Hyperbox, build_network
from flexdro.oracle import (
    det_lambda_oracle,
    enumerate_vertex_phis,
    max_vertex_phi,
    sto_lambda_oracle,
    worst_expectation_oracle,
)

from conftest import random_instance, toy_instance


def test_vertex_values_at_zero():
    _, m, box = random_instance(1, 4)
    vals = [v for _, v in enumerate_vertex_phis(m, box, 0.0)]
    assert len(vals) == 16
    assert vals == pytest.approx([evaluate_phi(m, box.d_bar)] * 16)


def test_toy_vertices(toy):
    m, box = toy
    vals = {tuple(s): v for s, v in enumerate_vertex_phis(m, box, 0.6)}
    assert vals == {(1.0,): pytest.approx(1.0), (-1.0,): pytest.approx(1.0)}


def test_uncongested_buses_pool():
    # an uncapped line makes two buses one pool served by 14 MW
    case = CaseDocument(100.0, 1, (Bus(1, 5.0), Bus(2, 3.0)),
                        (Generator("a", 1, 0, 10, 100, 100, 0), Generator("b", 2, 0, 4, 100, 100, 0)),
                        (), (Line("l", 1, 2, 0.1, 1e4),))
    net = build_network(case)
    m = build_matrices(net, startup_state(net), tau=1e6)
    box = Hyperbox(net.load, [10.0, 2.0])
    for s, v in enumerate_vertex_phis(m, box, 0.8):
        total = float(box.vertex(0.8, s).sum())
        assert v == pytest.approx(max(0.0, total - 14.0) + max(0.0, -total))


def test_toy_lambdas(toy):
    m, box = toy
    assert det_lambda_oracle(m, box) == pytest.approx(0.5, abs=1e-5)
    assert sto_lambda_oracle(m, box, 0.05) == pytest.approx(0.505, abs=1e-5)
    assert sto_lambda_oracle(m, box, 0.0) == pytest.approx(0.5, abs=1e-5)


def test_zero_deviation():
    m, box = toy_instance(delta=0.0)
    assert det_lambda_oracle(m, box) == 1.0


def test_lower_vertex_binds_with_big_unit():
    m, box = toy_instance(cap=15.0)
    assert det_lambda_oracle(m, box) == pytest.approx(0.5, abs=1e-5)


def test_worst_expectation_toy(toy):
    m, box = toy
    assert worst_expectation_oracle(m, box, 0.55) == pytest.approx(0.5)
    assert worst_expectation_oracle(m, box, 0.505) == pytest.approx(0.05)
    assert worst_expectation_oracle(m, box, 0.3) == pytest.approx(0.0)


def test_large_budget_gives_full_box(toy):
    m, box = toy
    assert sto_lambda_oracle(m, box, max_vertex_phi(m, box, 1.0)) == 1.0


@pytest.mark.parametrize("seed", range(8))
def test_expectation_bounds(seed):
    _, m, box = random_instance(seed, 3)
    for lam in (0.3, 0.8):
        vals = enumerate_vertex_phis(m, box, lam)
        we = worst_expectation_oracle(m, box, lam)
        assert we <= max(v for _, v in vals) + 1e-9
        lookup = {tuple(s): v for s, v in vals}
        for s, v in vals:
            assert we >= 0.5 * (v + lookup[tuple(-s)]) - 1e-9


@pytest.mark.parametrize("seed", range(6))
def test_bisection_certified(seed):
    _, m, box = random_instance(seed, 3)
    tol = 1e-6
    lam = det_lambda_oracle(m, box, tol)
    assert max_vertex_phi(m, box, lam) <= tol
    if lam < 1:
        assert max_vertex_phi(m, box, min(1.0, lam + 2 * tol)) > tol
    lam = sto_lambda_oracle(m, box, 0.05, tol)
    assert worst_expectation_oracle(m, box, lam) <= 0.05 + tol
    if lam < 1:
        assert worst_expectation_oracle(m, box, min(1.0, lam + 2 * tol)) > 0.05 + tol


def test_size_limits():
    lines = tuple(Line(f"l{i}", i, i + 1, 0.1, 1e3) for i in range(1, 13))
    net = build_network(CaseDocument(100.0, 1, tuple(Bus(i, 1.0) for i in range(1, 14)),
                                     (Generator("g", 1, 0, 100, 100, 100, 0),), (), lines))
    m = build_matrices(net, startup_state(net), tau=1e6)
    box = Hyperbox(net.load, np.ones(13))
    with pytest.raises(ValueError, match="limit"):
        sto_lambda_oracle(m, box, 0.05)
