"""Random small systems for property tests and benchmarks."""
from __future__ import annotations

import numpy as np

from .case_io import Bus, CaseDocument, Generator, Line, Storage, validate_case
from .dispatch import DispatchConfig, startup_state, solve_nominal_dispatch
from .network import build_network


def random_case(rng: np.random.Generator, n_bus: int, *, n_gen: int | None = None,
                storage: bool = False, extra_lines: int | None = None,
                line_slack: tuple[float, float] = (1.05, 2.0)) -> CaseDocument:
    """Connected random network whose nominal dispatch is feasible.

    Line limits are set from the flows of a nominal dispatch scaled by a
    random factor in ``line_slack``, so some lines bind once loads move.
    """
    ids = list(range(1, n_bus + 1))
    loads = rng.uniform(5.0, 60.0, n_bus)
    loads[rng.random(n_bus) < 0.2] = 0.0
    if not loads.any():
        loads[int(rng.integers(n_bus))] = 20.0      # p_min needs something to serve
    buses = tuple(Bus(i, float(round(v, 3))) for i, v in zip(ids, loads))
    total = float(loads.sum())

    n_gen = n_gen if n_gen is not None else int(rng.integers(1, max(2, n_bus) + 1))
    pmax = rng.uniform(0.4, 1.0, n_gen)
    pmax *= max(total, 10.0) * rng.uniform(1.3, 2.0) / pmax.sum()
    gens = []
    for k in range(n_gen):
        pm = float(round(pmax[k], 3))
        gens.append(Generator(f"g{k + 1}", int(rng.choice(ids)), float(round(rng.uniform(0, 0.1) * pm, 3)),
                              pm, float(round(rng.uniform(0.15, 0.6) * pm, 3)),
                              float(round(rng.uniform(0.15, 0.6) * pm, 3)),
                              float(round(rng.uniform(10.0, 40.0), 2))))
    stor = ()
    if storage:
        cap = float(round(rng.uniform(0.05, 0.2) * max(total, 10.0), 3))
        stor = (Storage("s1", int(rng.choice(ids)), 0.0, 4 * cap, 2 * cap, cap, cap,
                        float(round(rng.uniform(0.0, 10.0), 2))),)

    pairs = [(int(rng.integers(0, i)), i) for i in range(1, n_bus)]
    n_extra = extra_lines if extra_lines is not None else int(rng.integers(0, n_bus))
    have = {tuple(sorted(p)) for p in pairs}
    for _ in range(n_extra):
        a, b = sorted(rng.choice(n_bus, 2, replace=False).tolist())
        if (a, b) not in have:
            have.add((a, b))
            pairs.append((a, b))
    x = rng.uniform(0.05, 0.5, len(pairs))
    big = 10.0 * max(total, 10.0)
    lines = tuple(Line(f"l{k + 1}", ids[a], ids[b], float(round(x[k], 4)), big)
                  for k, (a, b) in enumerate(pairs))
    doc = CaseDocument(100.0, 1, buses, tuple(gens), stor, lines)
    if lines:
        net = build_network(doc)
        cfg = DispatchConfig(include_storage=False)
        state = startup_state(net, cfg=cfg)
        p = solve_nominal_dispatch(net, state, net.load, cfg).dispatch
        inj = -net.load.copy()
        np.add.at(inj, net.gen_bus, p[: net.n_gen])
        flows = inj @ net.sf
        scale = rng.uniform(*line_slack, len(lines))
        lines = tuple(Line(ln.id, ln.from_bus, ln.to_bus, ln.reactance,
                           float(round(max(abs(f) * s, 5.0), 3)))
                      for ln, f, s in zip(lines, flows, scale))
        doc = CaseDocument(100.0, 1, buses, tuple(gens), stor, lines)
    return validate_case(doc)
