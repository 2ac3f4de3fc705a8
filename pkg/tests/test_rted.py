import json
from dataclasses import replace

import numpy as np
import pytest

from flexdro.case_io import Bus, CaseDocument, Generator, Line, Storage, load_case
from flexdro.network import build_network
from flexdro.rted import (
    OUTLIER_MULTIPLIER,
    RunConfig,
    RunHalted,
    ScenarioSet,
    generate_scenarios,
    run_config_from_dict,
    run_ess_sensitivity,
    run_sequence,
    write_paired_csv,
    write_scenario_csv,
)

from conftest import fixture_path, toy_case


def config_file(name):
    with open(fixture_path(name), encoding="utf-8") as fh:
        return run_config_from_dict(json.load(fh))


# ----------------------------------------------------------------------------
# scenarios

def test_single_scenario_in_range():
    s = generate_scenarios(5, 1, seed=3)
    assert s.multipliers.shape == (1, 5)
    assert np.all((s.multipliers >= 0.99) & (s.multipliers <= 1.01))


def test_outlier_count_and_position():
    s = generate_scenarios(24, 100, seed=1, outlier=True)
    assert s.count == 100
    flat = np.all(s.multipliers == OUTLIER_MULTIPLIER, axis=1)
    assert flat.sum() == 1 and flat[-1]
    assert OUTLIER_MULTIPLIER == 1.09
    regular = s.multipliers[:-1]
    assert np.all((regular >= 0.99) & (regular <= 1.01))


def test_seeded_draws_repeat():
    a = generate_scenarios(12, 30, seed=42, outlier=True)
    b = generate_scenarios(12, 30, seed=42, outlier=True)
    np.testing.assert_array_equal(a.multipliers, b.multipliers)
    assert not np.array_equal(a.multipliers, generate_scenarios(12, 30, seed=43, outlier=True).multipliers)


def test_scenario_errors():
    with pytest.raises(ValueError):
        generate_scenarios(3, 0)
    with pytest.raises(ValueError):
        generate_scenarios(0, 3)
    with pytest.raises(ValueError):
        generate_scenarios(3, 1, outlier=True)
    with pytest.raises(ValueError):
        ScenarioSet(np.array([[1.0, -1.0]]))


def test_without_drops_row():
    s = generate_scenarios(4, 5, seed=0, outlier=True)
    t = s.without(4)
    assert t.count == 4 and not t.outlier_included
    np.testing.assert_array_equal(t.multipliers, s.multipliers[:4])


# ----------------------------------------------------------------------------
# runs

def test_single_interval_toy():
    net = build_network(load_case(fixture_path("toy1.json")))
    [r] = run_sequence(net, RunConfig(intervals=1))
    assert r.lambda_det == pytest.approx(0.5, abs=1e-6)
    assert r.lambda_sto == pytest.approx(0.505, abs=1e-6)
    assert r.converged_det and r.converged_sto


def test_constant_loads_are_stationary(case6):
    res = run_sequence(case6, RunConfig(intervals=4, include_storage=False, delta_d_fraction=0.3))
    for key in ("lambda_det", "lambda_sto"):
        vals = [getattr(r, key) for r in res]
        assert max(vals) - min(vals) <= 1e-6


def test_zero_storage_changes_nothing():
    case = CaseDocument(100.0, 1, (Bus(1, 30.0), Bus(2, 50.0)),
                        (Generator("a", 1, 0, 60, 20, 20, 10), Generator("b", 2, 0, 40, 10, 10, 30)),
                        (Storage("s", 2, 0, 0, 0, 0, 0, 0),), (Line("l", 1, 2, 0.1, 45.0),))
    net = build_network(case)
    cfg = RunConfig(intervals=3, delta_d_fraction=0.4, load_profile=(1.0, 1.05, 0.95))
    a, b = run_ess_sensitivity(net, cfg)
    for x, y in zip(a, b):
        assert x.lambda_det == pytest.approx(y.lambda_det, abs=1e-9)
        assert x.lambda_sto == pytest.approx(y.lambda_sto, abs=1e-9)


def test_mode_selects_assessments(case6):
    [r] = run_sequence(case6, RunConfig(intervals=1, mode="det"))
    assert r.lambda_det is not None and r.lambda_sto is None and r.converged
    [r] = run_sequence(case6, RunConfig(intervals=1, mode="sto"))
    assert r.lambda_det is None and r.lambda_sto is not None


def test_progress_callback(case6):
    seen = []
    run_sequence(case6, RunConfig(intervals=3, mode="det"), progress=seen.append)
    assert [r.interval for r in seen] == [1, 2, 3]


def test_halt_keeps_finished_intervals():
    case = CaseDocument(100.0, 1, (Bus(1, 5.0),), (Generator("g", 1, 0, 10, 1, 1, 1),))
    net = build_network(case)
    with pytest.raises(RunHalted) as exc:
        run_sequence(net, RunConfig(intervals=3, load_profile=(0.5, 1.0, 1.0), mode="det"))
    assert exc.value.interval == 2 and len(exc.value.results) == 1


def test_scenario_set_too_short(case6):
    with pytest.raises(ValueError, match="intervals"):
        run_sequence(case6, RunConfig(intervals=3), generate_scenarios(2, 2, seed=0))


@pytest.fixture(scope="module")
def outlier_run():
    net = build_network(load_case(fixture_path("outlier2.json")))
    cfg, _ = config_file("run_outlier.json")
    scen = generate_scenarios(cfg.intervals, 12, seed=cfg.seed, outlier=True)
    return net, cfg, scen, run_sequence(net, cfg, scen)


def test_min_over_scenarios(outlier_run):
    *_, res = outlier_run
    for r in res:
        assert len(r.scenarios) == 12
        assert r.lambda_det == min(o.lambda_det for o in r.scenarios)
        assert r.lambda_sto == min(o.lambda_sto for o in r.scenarios)
        assert r.iterations_sto == max(o.iterations_sto for o in r.scenarios)


def test_outlier_interval(outlier_run):
    *_, res = outlier_run
    last = res[-1]
    assert last.lambda_det == 0.0 and last.lambda_sto > 0.0
    assert last.scenarios[-1].lambda_det == 0.0


def test_more_scenarios_never_raise_lambda(outlier_run):
    net, cfg, scen, full = outlier_run
    fewer = run_sequence(net, cfg, ScenarioSet(scen.multipliers[:5]))
    for a, b in zip(full, fewer):
        assert a.lambda_det <= b.lambda_det + 1e-12
        assert a.lambda_sto <= b.lambda_sto + 1e-12


def test_dropping_outlier_never_lowers_lambda(outlier_run):
    net, cfg, scen, full = outlier_run
    clean = run_sequence(net, cfg, scen.without(scen.count - 1))
    for a, b in zip(full, clean):
        assert b.lambda_det >= a.lambda_det - 1e-12
        assert b.lambda_sto >= a.lambda_sto - 1e-12
    assert clean[-1].lambda_det > 0.0


def test_scenarios_do_not_move_the_trajectory(outlier_run):
    net, cfg, scen, full = outlier_run
    nominal = run_sequence(net, cfg)
    assert [r.dispatch_cost for r in nominal] == [r.dispatch_cost for r in full]


def test_scenario_csv(outlier_run):
    *_, res = outlier_run
    lines = write_scenario_csv(res).splitlines()
    assert lines[0] == ("interval,scenario,lambda_det,lambda_sto,iterations_det,iterations_sto,"
                        "converged_det,converged_sto")
    assert len(lines) == 1 + 3 * 12
    assert lines[-1].startswith("3,12,0.000000,")


def test_ess_crossover():
    net = build_network(load_case(fixture_path("ess_small.json")))
    cfg, extras = config_file("run_ess.json")
    assert extras == {"ess_sensitivity": True}
    with_ess, without = run_ess_sensitivity(net, cfg)
    assert with_ess[0].lambda_sto >= without[0].lambda_sto
    assert any(a.lambda_sto <= b.lambda_sto - 1e-6 for a, b in zip(with_ess[1:], without[1:]))
    text = write_paired_csv(with_ess, without)
    assert text.splitlines()[0] == "interval,lambda_det_ess,lambda_sto_ess,lambda_det_no_ess,lambda_sto_no_ess"
    assert len(text.splitlines()) == cfg.intervals + 1


def test_sensitivity_needs_storage():
    with pytest.raises(ValueError, match="storage"):
        run_ess_sensitivity(build_network(toy_case()), RunConfig(intervals=1))


# ----------------------------------------------------------------------------
# configuration

def test_bundled_configs_parse():
    cfg, extras = config_file("run24.json")
    assert cfg.intervals == 24 and len(cfg.load_profile) == 24 and cfg.seed == 7
    assert cfg.window_minutes == 120
    cfg, _ = config_file("run_outlier.json")
    assert cfg.scenarios().count == 100 and cfg.scenarios().outlier_included


def test_nested_sections():
    cfg, extras = run_config_from_dict({"beta": 0.1, "dro": {"K": 50, "max_iter": 40},
                                        "dispatch": {"tau_margin": 0.3}, "det": {"tolerance": 1e-7},
                                        "backend": "highs"})
    assert cfg.dro_options().beta == 0.1 and cfg.dro_options().K == 50
    assert cfg.dispatch.tau_margin == 0.3 and cfg.det.tolerance == 1e-7
    assert extras == {"backend": "highs"}


@pytest.mark.parametrize("obj, fragment", [
    ({"colour": 1}, "colour"),
    ({"dro": {"beta": 0.1}}, "beta"),
    ({"dispatch": {"include_storage": False}}, "include_storage"),
    ({"dro": {"gamma": 1}}, "gamma"),
    ({"dro": 3}, "object"),
    ({"mode": "fast"}, "mode"),
    ({"intervals": 2, "load_profile": [1.0]}, "load_profile"),
    ([], "object"),
])
def test_config_errors(obj, fragment):
    with pytest.raises(ValueError, match=fragment):
        run_config_from_dict(obj)


def test_config_replace_keeps_validation():
    with pytest.raises(ValueError):
        replace(RunConfig(), beta=-0.1)
