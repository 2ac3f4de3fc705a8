import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from flexdro.case_io import Bus, CaseDocument, Generator, Line, Storage
from flexdro.dispatch import (
    DispatchConfig,
    DispatchInfeasible,
    IntervalState,
    build_matrices,
    evaluate_phi,
    evaluate_phi_dual,
    format_matrices,
    phi_duals,
    solve_nominal_dispatch,
    startup_state,
)
from flexdro.network import build_network

from conftest import random_instance, toy_case


def phi_unshifted(net, state, tau, xi, dt=1.0):
    """Violation LP assembled directly from the network data.

    Storage output is a free variable with both power limits as slackable
    rows; no offsets anywhere. Solved by HiGHS.
    """
    G, E = net.n_gen, net.n_storage
    V = G + E
    rows, rhs = [], []

    def row(idx, coef, bound):
        a = np.zeros(V)
        a[idx] = coef
        rows.append(a)
        rhs.append(bound)

    for g in range(G):
        row(g, 1.0, net.gen_max[g])
        row(g, -1.0, -net.gen_min[g])
        row(g, 1.0, state.p_prev[g] + net.ramp_up[g])
        row(g, -1.0, net.ramp_down[g] - state.p_prev[g])
    for k in range(E):
        row(G + k, -dt, net.e_max[k] - state.e_prev[k])
        row(G + k, dt, state.e_prev[k] - net.e_min[k])
        row(G + k, 1.0, net.p_discharge_max[k])
        row(G + k, -1.0, net.p_charge_max[k])
    at = np.concatenate([net.gen_bus, net.ess_bus]).astype(int)
    for ln in range(net.n_line):
        col = net.sf[:, ln]
        flow_load = col @ xi
        rows += [col[at], -col[at]]
        rhs += [net.flow_limit[ln] + flow_load, net.flow_limit[ln] - flow_load]
    rows.append(np.concatenate([net.gen_cost, net.ess_cost]))
    rhs.append(tau)
    A, b = np.array(rows), np.array(rhs)
    M = A.shape[0]
    c = np.concatenate([np.zeros(V), np.ones(M + 2)])
    A_ub = np.hstack([A, -np.eye(M), np.zeros((M, 2))])
    A_eq = np.concatenate([np.ones(V), np.zeros(M), [-1.0, 1.0]])[None, :]
    bounds = [(0, None)] * G + [(None, None)] * E + [(0, None)] * (M + 2)
    res = linprog(c, A_ub, b, A_eq, [xi.sum()], bounds=bounds, method="highs")
    assert res.status == 0
    return res.fun


@pytest.fixture(scope="module")
def toy_m():
    net = build_network(toy_case())
    return build_matrices(net, startup_state(net), tau=1e6)


def test_toy_rows(toy_m):
    assert toy_m.row_labels == ("gen_max[g1]", "gen_min[g1]", "ramp_up[g1]", "ramp_down[g1]",
                                "cost_budget", "balance")
    np.testing.assert_array_equal(toy_m.A1[:, 0], [1, -1, 1, -1, 0])
    np.testing.assert_array_equal(toy_m.h1[:2], [10, 0])
    np.testing.assert_array_equal(toy_m.H2, [[1.0]])
    assert toy_m.n_eq == 1


@pytest.mark.parametrize("xi, expected", [(5.0, 0.0), (12.0, 2.0), (-1.0, 1.0)])
def test_toy_phi(toy_m, xi, expected):
    assert evaluate_phi(toy_m, [xi]) == pytest.approx(expected, abs=1e-9)
    assert evaluate_phi_dual(toy_m, [xi]) == pytest.approx(expected, abs=1e-9)


def test_two_bus_line_rows():
    case = CaseDocument(100.0, 1, (Bus(1, 0.0), Bus(2, 3.0)), (Generator("g", 1, 0, 10, 10, 10, 1),),
                        (), (Line("l1", 1, 2, 0.1, 4.0),))
    net = build_network(case)
    m = build_matrices(net, startup_state(net), tau=1e6)
    i = m.row_labels.index("line_pos[l1]")
    j = m.row_labels.index("line_neg[l1]")
    np.testing.assert_allclose(m.H1[i], net.sf[:, 0])
    np.testing.assert_allclose(m.H1[j], -net.sf[:, 0])
    np.testing.assert_allclose(m.h1[[i, j]], [4.0, 4.0])
    # 6 MW at bus 2 pushes 6 MW through a 4 MW line
    assert evaluate_phi(m, [0.0, 6.0]) == pytest.approx(2.0)


def storage_case(ess_cost=0.0, e_initial=30.0):
    return CaseDocument(100.0, 1, (Bus(1, 40.0),),
                        (Generator("g", 1, 0.0, 100.0, 100.0, 100.0, 10.0),),
                        (Storage("s", 1, 0.0, 50.0, e_initial, 20.0, 15.0, ess_cost),))


def test_storage_flag():
    net = build_network(storage_case())
    with_ess = build_matrices(net, startup_state(net))
    without = build_matrices(net, startup_state(net), DispatchConfig(include_storage=False))
    assert with_ess.n_vars == 2 and without.n_vars == 1
    assert not any("ess" in label for label in without.row_labels)


def test_nominal_toy():
    net = build_network(toy_case(cost=1.0))
    nd = solve_nominal_dispatch(net, startup_state(net), net.load)
    np.testing.assert_allclose(nd.dispatch, [5.0])
    assert nd.cost == pytest.approx(5.0)
    np.testing.assert_allclose(nd.next_state.p_prev, [5.0])


def test_nominal_zero_load():
    case = CaseDocument(100.0, 1, (Bus(1, 0.0), Bus(2, 0.0)),
                        (Generator("a", 1, 0, 5, 5, 5, 3), Generator("b", 2, 0, 5, 5, 5, 1)),
                        (), (Line("l", 1, 2, 0.1, 10.0),))
    net = build_network(case)
    nd = solve_nominal_dispatch(net, startup_state(net), net.load)
    np.testing.assert_allclose(nd.dispatch, 0.0, atol=1e-12)
    assert nd.cost == pytest.approx(0.0)


def test_cheap_storage_discharges_first():
    net = build_network(storage_case())
    nd = solve_nominal_dispatch(net, IntervalState([40.0], [30.0]), net.load)
    np.testing.assert_allclose(nd.dispatch, [25.0, 15.0], atol=1e-9)
    np.testing.assert_allclose(nd.next_state.e_prev, [15.0], atol=1e-9)


def test_energy_limits_discharge():
    net = build_network(storage_case(e_initial=6.0))
    nd = solve_nominal_dispatch(net, IntervalState([40.0], [6.0]), net.load, DispatchConfig(ess_energy_step_hours=0.5))
    # 6 MWh over half an hour allows 12 MW
    np.testing.assert_allclose(nd.dispatch, [28.0, 12.0], atol=1e-9)
    np.testing.assert_allclose(nd.next_state.e_prev, [0.0], atol=1e-9)


@pytest.mark.parametrize("seed", range(15))
def test_state_propagation(seed):
    net, _, _ = random_instance(seed, 2 + seed % 5, storage=True)
    cfg = DispatchConfig(ess_energy_step_hours=0.25)
    state = startup_state(net, cfg=cfg)
    for t in range(4):
        nd = solve_nominal_dispatch(net, state, net.load, cfg)
        G = net.n_gen
        np.testing.assert_array_equal(nd.next_state.p_prev, nd.dispatch[:G])
        np.testing.assert_allclose(nd.next_state.e_prev, state.e_prev - nd.dispatch[G:] * 0.25, atol=1e-9)
        state = nd.next_state


def test_infeasible_nominal_names_rows():
    case = CaseDocument(100.0, 1, (Bus(1, 50.0),), (Generator("g1", 1, 0, 10, 100, 100, 1),))
    net = build_network(case)
    with pytest.raises(DispatchInfeasible) as exc:
        solve_nominal_dispatch(net, IntervalState([5.0], []), net.load)
    assert "gen_max[g1]" in exc.value.rows


def test_slack_weights():
    net = build_network(toy_case())
    st0 = startup_state(net)
    with pytest.raises(ValueError, match="slack_weights"):
        build_matrices(net, st0, DispatchConfig(slack_weights=(1.0, 2.0)))
    # capacity slack costs 5, so the balance slack (3 per MW) takes the excess
    m = build_matrices(net, st0, DispatchConfig(slack_weights=(5, 1, 1, 1, 1, 3, 3)), tau=1e6)
    assert evaluate_phi(m, [12.0]) == pytest.approx(6.0)
    assert evaluate_phi_dual(m, [12.0]) == pytest.approx(6.0)


def test_budget_binds():
    net = build_network(toy_case(cost=2.0))
    m = build_matrices(net, startup_state(net), DispatchConfig(tau_margin=0.1))
    assert m.tau == pytest.approx(11.0)
    # 5.5 MW exhausts the budget, the last 0.5 MW goes to the balance slack
    assert evaluate_phi(m, [6.0]) == pytest.approx(0.5)


def test_format_matrices_lists_rows(toy_m):
    text = format_matrices(toy_m)
    assert text.count("\n") == toy_m.n_ineq + toy_m.n_eq + 2
    assert "cost_budget (<=)" in text and "balance (=)" in text


@pytest.mark.parametrize("seed", range(40))
def test_primal_dual_agreement(seed):
    net, m, box = random_instance(seed, 2 + seed % 7)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        xi = box.vertex(rng.uniform(0, 1.5), rng.choice([-1.0, 1.0], box.size))
        a, b = evaluate_phi(m, xi), evaluate_phi_dual(m, xi)
        assert abs(a - b) <= 1e-6 * (1 + a)
        phi, mu, nu = phi_duals(m, xi)
        b1, b2 = m.rhs(xi)
        assert phi == pytest.approx(b1 @ mu + b2 @ nu, abs=1e-9)
        assert np.all(mu <= 1e-12) and np.all(mu >= -m.w1 - 1e-12)


@pytest.mark.parametrize("seed", range(30))
def test_shift_neutral(seed):
    net, m, box = random_instance(100 + seed, 2 + seed % 6, storage=True)
    state = startup_state(net)
    rng = np.random.default_rng(seed)
    for _ in range(4):
        xi = net.load * rng.uniform(0.0, 2.0, net.n_bus)
        assert evaluate_phi(m, xi) == pytest.approx(phi_unshifted(net, state, m.tau, xi), abs=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_nominal_point_is_served(seed):
    _, m, box = random_instance(200 + seed, 2 + seed % 7)
    assert evaluate_phi(m, box.d_bar) <= 1e-9


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 1))
def test_phi_convex(seed, alpha):
    rng = np.random.default_rng(seed)
    _, m, box = random_instance(seed, int(rng.integers(2, 6)))
    x1 = box.vertex(1.5, rng.choice([-1.0, 1.0], box.size))
    x2 = box.vertex(1.5, rng.choice([-1.0, 1.0], box.size))
    mid = evaluate_phi(m, alpha * x1 + (1 - alpha) * x2)
    assert mid <= alpha * evaluate_phi(m, x1) + (1 - alpha) * evaluate_phi(m, x2) + 1e-6


def test_backend_agreement():
    _, m, box = random_instance(3, 5)
    xi = box.vertex(1.0, np.ones(5))
    assert evaluate_phi(m, xi, backend="highs") == pytest.approx(evaluate_phi(m, xi), abs=1e-7)
    assert evaluate_phi_dual(m, xi, backend="highs") == pytest.approx(evaluate_phi(m, xi), abs=1e-7)
