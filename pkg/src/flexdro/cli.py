"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 an assessment did not
converge (results are still written).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .case_io import CaseError, MatpowerOptions, load_case, write_results_csv
from .deterministic import assess_deterministic
from .dispatch import DispatchInfeasible, IntervalState, build_matrices, startup_state
from .lp import get_backend
from .network import Hyperbox, NetworkError, build_network, deviation_for
from .rted import (MODES, IntervalResult, RunConfig, RunHalted, ScenarioOutcome, record_assessment,
                   run_config_from_dict,
                   run_ess_sensitivity, run_sequence, write_paired_csv, write_scenario_csv)
from .stochastic import assess_stochastic

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NOT_CONVERGED = 0, 1, 2, 3
FIXTURES = Path(__file__).resolve().parent / "fixtures"

log = logging.getLogger("flexdro")


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def resolve(path: str) -> str:
    """``path`` if it exists, else the bundled fixture of the same name."""
    if os.path.exists(path):
        return path
    bundled = FIXTURES / Path(path).name
    if bundled.exists():
        return str(bundled)
    raise DataError(f"no such file: {path}")


def _read_json(path: str, what: str):
    try:
        with open(resolve(path), encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{what} {path}: JSON syntax error at line {exc.lineno}: {exc.msg}") from None


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _load_config(path: Optional[str]) -> tuple[RunConfig, dict]:
    if path is None:
        return RunConfig(), {}
    try:
        return run_config_from_dict(_read_json(path, "config"))
    except ValueError as exc:
        raise DataError(f"config {path}: {exc}") from None


def _matpower_options(extras: dict, cfg: RunConfig) -> MatpowerOptions:
    opts = extras.get("matpower", {})
    if not isinstance(opts, dict) or set(opts) - {"ramp_fraction", "unlimited_cap_factor"}:
        raise DataError("'matpower' accepts only ramp_fraction and unlimited_cap_factor")
    return MatpowerOptions(interval_minutes=cfg.interval_minutes, **opts)


def _network(args, cfg: RunConfig, extras: dict):
    doc = load_case(resolve(args.case), resolve(args.storage) if args.storage else None,
                    _matpower_options(extras, cfg))
    return build_network(doc)


def _backend(args, extras: dict):
    name = args.backend or extras.get("backend")
    try:
        return None if name in (None, "bundled") else get_backend(name)
    except (ValueError, ImportError) as exc:
        raise DataError(str(exc)) from None


def _overrides(args, cfg: RunConfig) -> RunConfig:
    changes = {}
    for flag, fieldname in (("beta", "beta"), ("mode", "mode"), ("delta_d_fraction", "delta_d_fraction"),
                            ("intervals", "intervals"), ("seed", "seed"), ("scenarios", "scenario_count")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[fieldname] = value
    if getattr(args, "outlier", False):
        changes["scenario_outlier"] = True
    if getattr(args, "no_storage", False):
        changes["include_storage"] = False
    if "intervals" in changes and cfg.load_profile is not None and len(cfg.load_profile) != changes["intervals"]:
        changes["load_profile"] = None
        log.warning("load_profile dropped: it does not cover %d intervals", changes["intervals"])
    try:
        return replace(cfg, **changes)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def _interval_state(path: Optional[str], net) -> tuple[Optional[IntervalState], Optional[np.ndarray]]:
    """State and optional forecast from an interval-state file."""
    if path is None:
        return None, None
    obj = _read_json(path, "interval state")
    if not isinstance(obj, dict) or set(obj) - {"p_prev", "e_prev", "load"}:
        raise DataError("interval state must be an object with p_prev, e_prev and optional load")
    load = None
    if "load" in obj:
        load = np.asarray(obj["load"], dtype=float)
        if load.shape != (net.n_bus,):
            raise DataError(f"interval state load needs {net.n_bus} entries")
    if "p_prev" not in obj:
        raise DataError("interval state needs p_prev")
    e_prev = obj.get("e_prev", net.e_initial.tolist())
    state = IntervalState(np.asarray(obj["p_prev"], dtype=float), np.asarray(e_prev, dtype=float))
    try:
        state.check(net)
    except ValueError as exc:
        raise DataError(f"interval state: {exc}") from None
    return state, load


# ----------------------------------------------------------------------------
# subcommands

def cmd_validate(args) -> int:
    cfg, extras = _load_config(args.config)
    net = _network(args, cfg, extras)
    doc = net.case
    print(f"ok: {net.n_bus} buses, {net.n_gen} generators, {net.n_storage} storage, "
          f"{net.n_line} lines, slack bus {net.bus_ids[net.slack_index]}, "
          f"total load {doc.total_load:.6g} MW")
    return EXIT_OK


def cmd_ptdf(args) -> int:
    cfg, extras = _load_config(args.config)
    net = _network(args, cfg, extras)
    lines = ["bus" + "".join("," + ln.id for ln in net.case.lines)]
    for b, bid in enumerate(net.bus_ids):
        lines.append(",".join([str(bid)] + [f"{v:.10g}" for v in net.sf[b]]))
    _write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_assess(args) -> int:
    cfg, extras = _load_config(args.config)
    cfg = _overrides(args, cfg)
    net = _network(args, cfg, extras)
    backend = _backend(args, extras)
    dcfg = replace(cfg.dispatch, include_storage=cfg.include_storage)
    state, load = _interval_state(args.interval_state, net)
    d_bar = net.load if load is None else load
    if state is None:
        state = startup_state(net, d_bar, dcfg)
    m = build_matrices(net, state, dcfg, d_bar=d_bar)
    box = Hyperbox(d_bar, deviation_for(net, d_bar, cfg.delta_d_fraction))

    row = ScenarioOutcome(1)
    traces = []
    parts = []
    if cfg.wants_det:
        res = assess_deterministic(m, box, cfg.det, backend)
        record_assessment(row, "det", res)
        traces.append(("det", res))
        parts.append(f"lambda_det={res.lambda_star:.6f}")
    if cfg.wants_sto:
        res = assess_stochastic(m, box, cfg.dro_options(), backend)
        record_assessment(row, "sto", res)
        traces.append(("sto", res))
        parts.append(f"lambda_sto={res.lambda_star:.6f}")
    print(" ".join(parts))
    for d in row.diagnostics:
        print(d, file=sys.stderr)

    result = IntervalResult(1, **{k: getattr(row, k) for k in (
        "lambda_det", "lambda_sto", "iterations_det", "iterations_sto", "converged_det",
        "converged_sto", "time_ms_det", "time_ms_sto")})
    if args.out:
        _write(args.out, write_results_csv([result], include_timings=args.timings))
    if args.trace:
        text = "mode," + traces[0][1].trace_csv().split("\n", 1)[0] + "\n"
        for mode, res in traces:
            body = res.trace_csv().split("\n", 1)[1]
            text += "".join(f"{mode},{line}\n" for line in body.splitlines())
        _write(args.trace, text)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_run(args) -> int:
    cfg, extras = _load_config(args.config)
    cfg = _overrides(args, cfg)
    net = _network(args, cfg, extras)
    backend = _backend(args, extras)
    scenarios = cfg.scenarios()
    sensitivity = args.ess_sensitivity or bool(extras.get("ess_sensitivity", False))

    def progress(r):
        log.info("interval %d done", r.interval)

    code = EXIT_OK
    without = None
    try:
        if sensitivity:
            results, without = run_ess_sensitivity(net, cfg, scenarios, backend)
        else:
            results = run_sequence(net, cfg, scenarios, backend, progress=progress)
    except RunHalted as halt:
        print(f"run halted at {halt}", file=sys.stderr)
        results = halt.results
        code = EXIT_DATA
    _write(args.out, write_results_csv(results, include_timings=args.timings))
    if args.scenario_out:
        _write(args.scenario_out, write_scenario_csv(results))
    if without is not None:
        if args.paired_out:
            _write(args.paired_out, write_paired_csv(results, without))
        results = list(results) + list(without)
    for r in results:
        for d in r.diagnostics:
            print(f"interval {r.interval}: {d}", file=sys.stderr)
    if code == EXIT_OK and not all(r.converged for r in results):
        code = EXIT_NOT_CONVERGED
    return code


def cmd_oracle(args) -> int:
    from .oracle import (MAX_STO_BUSES, det_lambda_oracle, max_vertex_phi, sto_lambda_oracle,
                         worst_expectation_oracle)

    cfg, extras = _load_config(args.config)
    cfg = _overrides(args, cfg)
    net = _network(args, cfg, extras)
    dcfg = replace(cfg.dispatch, include_storage=cfg.include_storage)
    state, load = _interval_state(args.interval_state, net)
    d_bar = net.load if load is None else load
    if state is None:
        state = startup_state(net, d_bar, dcfg)
    m = build_matrices(net, state, dcfg, d_bar=d_bar)
    box = Hyperbox(d_bar, deviation_for(net, d_bar, cfg.delta_d_fraction))
    if not (0.0 <= args.lam <= 1.0):
        raise DataError("--lambda must lie in [0, 1]")
    active = int(np.count_nonzero(box.delta_d))
    if active > MAX_STO_BUSES:
        raise DataError(f"{active} uncertain buses exceeds the brute-force limit of {MAX_STO_BUSES}")
    print(f"max_vertex_phi={max_vertex_phi(m, box, args.lam):.6f}")
    print(f"worst_expectation={worst_expectation_oracle(m, box, args.lam):.6f}")
    print(f"lambda_det={det_lambda_oracle(m, box):.6f}")
    print(f"lambda_sto={sto_lambda_oracle(m, box, cfg.beta):.6f}")
    return EXIT_OK


# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flexdro", description="Hyperbox flexibility assessment for real-time dispatch.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0,
                   help="log progress to stderr (-vv for per-iteration detail)")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def common(sp, config_help="JSON run configuration (RunConfig field names)"):
        sp.add_argument("case", help="case file: native .json or MATPOWER .m")
        sp.add_argument("--storage", metavar="JSON", help="storage sidecar merged into the case")
        sp.add_argument("--config", metavar="JSON", help=config_help)

    def assessment_flags(sp):
        sp.add_argument("--beta", type=float, help="expected-violation budget (default 0.05)")
        sp.add_argument("--delta-d-fraction", dest="delta_d_fraction", type=float, metavar="F",
                        help="peak deviation as a fraction of each bus load (default: case delta_d, else 0.5)")
        sp.add_argument("--no-storage", dest="no_storage", action="store_true",
                        help="leave storage units out of the dispatch")
        sp.add_argument("--backend", choices=("bundled", "highs"),
                        help="LP/MILP solver (default bundled)")

    sp = sub.add_parser("validate", help="parse a case and check the network",
                        description="Parse a case, run the network checks and print a summary line.")
    common(sp, "JSON run configuration (only its matpower options are used)")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("ptdf", help="write the shift-factor matrix as CSV",
                        description="Write the bus-by-line shift-factor matrix as CSV.")
    common(sp, "JSON run configuration (only its matpower options are used)")
    sp.add_argument("--out", metavar="CSV", help="output file (default stdout)")
    sp.set_defaults(func=cmd_ptdf)

    sp = sub.add_parser("assess", help="assess one interval",
                        description="Deterministic and/or distributionally robust flexibility of one interval.")
    common(sp)
    sp.add_argument("--interval-state", dest="interval_state", metavar="JSON",
                    help="object with p_prev, e_prev and an optional load forecast; "
                         "default: a startup dispatch at the case loads")
    sp.add_argument("--mode", choices=MODES, help="which assessment to run (default both)")
    assessment_flags(sp)
    sp.add_argument("--out", metavar="CSV", help="write the result row as CSV")
    sp.add_argument("--trace", metavar="CSV", help="write the per-iteration trace as CSV")
    sp.add_argument("--timings", action="store_true", help="fill the wall-time columns of --out")
    sp.set_defaults(func=cmd_assess)

    sp = sub.add_parser("run", help="sequential multi-interval run",
                        description="Roll the intervals of a run configuration and assess each one.")
    common(sp)
    sp.add_argument("--out", metavar="CSV", help="per-interval results (default stdout)")
    sp.add_argument("--mode", choices=MODES, help="which assessments to run (default both)")
    assessment_flags(sp)
    sp.add_argument("--intervals", type=int, help="number of intervals")
    sp.add_argument("--seed", type=int, help="scenario seed")
    sp.add_argument("--scenarios", type=int, metavar="S", help="scenario count (0: forecast only)")
    sp.add_argument("--outlier", action="store_true", help="make the last scenario a flat 1.09x outlier")
    sp.add_argument("--scenario-out", dest="scenario_out", metavar="CSV",
                    help="per-scenario detail CSV")
    sp.add_argument("--ess-sensitivity", dest="ess_sensitivity", action="store_true",
                    help="repeat the run without storage; --out gets the run with storage")
    sp.add_argument("--paired-out", dest="paired_out", metavar="CSV",
                    help="with --ess-sensitivity: side-by-side lambdas of both runs")
    sp.add_argument("--timings", action="store_true",
                    help="fill the wall-time columns (output is then no longer reproducible)")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("oracle", help="brute-force reference values (small cases)",
                        description="Vertex-enumeration reference values for small cases.")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=float, required=True, metavar="L",
                    help="box scale for the vertex values")
    sp.add_argument("--interval-state", dest="interval_state", metavar="JSON",
                    help="same format as for assess")
    assessment_flags(sp)
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (DataError, CaseError, NetworkError, DispatchInfeasible, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
