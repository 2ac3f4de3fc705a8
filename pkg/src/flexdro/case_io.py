"""Case files in, result tables out.

Native cases are JSON; MATPOWER scripts can be imported (no export). Storage
units are not representable in MATPOWER and come from a JSON sidecar holding
only a ``storage`` array.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

BusId = Union[int, str]


class CaseError(ValueError):
    """Malformed or inconsistent case data.

    ``line``/``column`` are set for syntax errors, ``field`` for schema
    errors and ``entity`` for invariant violations.
    """

    def __init__(self, message: str, *, line: int | None = None, column: int | None = None,
                 field: str | None = None, entity: str | None = None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.column = column
        self.field = field
        self.entity = entity


@dataclass(frozen=True)
class Bus:
    id: BusId
    load_mw: float
    delta_d: Optional[float] = None     # peak deviation in MW; None defers to a load fraction


@dataclass(frozen=True)
class Generator:
    id: str
    bus: BusId
    p_min: float
    p_max: float
    ramp_up: float
    ramp_down: float
    cost: float


@dataclass(frozen=True)
class Storage:
    id: str
    bus: BusId
    e_min: float
    e_max: float
    e_initial: float
    p_charge_max: float
    p_discharge_max: float
    cost: float


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: BusId
    to_bus: BusId
    reactance: float
    flow_limit: float


@dataclass(frozen=True)
class CaseDocument:
    base_mva: float
    slack_bus: Optional[BusId]
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    storage: tuple[Storage, ...] = ()
    lines: tuple[Line, ...] = ()

    @property
    def total_load(self) -> float:
        return sum(b.load_mw for b in self.buses)


# ----------------------------------------------------------------------------
# validation

def validate_case(doc: CaseDocument) -> CaseDocument:
    """Check the cross-entity invariants; returns ``doc`` unchanged."""
    if not doc.buses:
        raise CaseError("case has no buses", field="buses")
    if not (doc.base_mva > 0):
        raise CaseError("base_mva must be positive", field="base_mva")
    seen = set()
    for b in doc.buses:
        bid = b.id
        if bid in seen:
            raise CaseError(f"duplicate bus id {bid!r}", entity=str(bid))
        seen.add(bid)
        if b.delta_d is not None and b.delta_d < 0:
            raise CaseError(f"negative delta_d at bus {bid!r}", entity=str(bid))
    if doc.slack_bus is not None and doc.slack_bus not in seen:
        raise CaseError(f"slack bus {doc.slack_bus!r} is not a bus", field="slack_bus")

    def unique(items, kind):
        names = set()
        for it in items:
            if it.id in names:
                raise CaseError(f"duplicate {kind} id {it.id!r}", entity=str(it.id))
            names.add(it.id)

    unique(doc.generators, "generator")
    unique(doc.storage, "storage")
    unique(doc.lines, "line")
    for g in doc.generators:
        if g.bus not in seen:
            raise CaseError(f"generator {g.id} references unknown bus {g.bus!r}", entity=g.id)
        if g.p_min > g.p_max:
            raise CaseError(f"p_min > p_max for generator {g.id}", entity=g.id)
        if g.ramp_up < 0 or g.ramp_down < 0:
            raise CaseError(f"negative ramp limit for generator {g.id}", entity=g.id)
    for s in doc.storage:
        if s.bus not in seen:
            raise CaseError(f"storage {s.id} references unknown bus {s.bus!r}", entity=s.id)
        if not (s.e_min <= s.e_initial <= s.e_max):
            raise CaseError(f"e_min <= e_initial <= e_max violated for storage {s.id}", entity=s.id)
        if s.p_charge_max < 0 or s.p_discharge_max < 0:
            raise CaseError(f"negative power limit for storage {s.id}", entity=s.id)
    for ln in doc.lines:
        for end in (ln.from_bus, ln.to_bus):
            if end not in seen:
                raise CaseError(f"line {ln.id} references unknown bus {end!r}", entity=ln.id)
        if ln.from_bus == ln.to_bus:
            raise CaseError(f"line {ln.id} has identical endpoints", entity=ln.id)
        if not (ln.reactance > 0):
            raise CaseError(f"reactance must be positive for line {ln.id}", entity=ln.id)
        if not (ln.flow_limit > 0):
            raise CaseError(f"flow_limit must be positive for line {ln.id}", entity=ln.id)
    return doc


# ----------------------------------------------------------------------------
# JSON

_SCHEMA = {
    "buses": ("id", "load_mw"),
    "generators": ("id", "bus", "p_min", "p_max", "ramp_up", "ramp_down", "cost"),
    "storage": ("id", "bus", "e_min", "e_max", "e_initial", "p_charge_max", "p_discharge_max", "cost"),
    "lines": ("id", "from", "to", "reactance", "flow_limit"),
}
_OPTIONAL = {"buses": ("delta_d",)}
_TOP = ("base_mva", "slack_bus", "buses", "generators", "storage", "lines")
_REQUIRED_TOP = ("base_mva", "buses", "generators")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CaseError(f"{where} must be a number", field=where)
    v = float(value)
    if not math.isfinite(v):
        raise CaseError(f"{where} must be finite", field=where)
    return v


def _ident(value, where: str) -> BusId:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise CaseError(f"{where} must be an integer or string id", field=where)
    return value


def _records(obj: dict, key: str) -> list[dict]:
    items = obj.get(key, [])
    if not isinstance(items, list):
        raise CaseError(f"{key} must be an array", field=key)
    fields = _SCHEMA[key]
    out = []
    for i, rec in enumerate(items):
        where = f"{key}[{i}]"
        if not isinstance(rec, dict):
            raise CaseError(f"{where} must be an object", field=where)
        extra = sorted(set(rec) - set(fields) - set(_OPTIONAL.get(key, ())))
        if extra:
            raise CaseError(f"unknown key {extra[0]!r} in {where}", field=f"{where}.{extra[0]}")
        missing = [f for f in fields if f not in rec]
        if missing:
            raise CaseError(f"missing key {missing[0]!r} in {where}", field=f"{where}.{missing[0]}")
        out.append(rec)
    return out


def case_from_dict(obj) -> CaseDocument:
    if not isinstance(obj, dict):
        raise CaseError("case document must be a JSON object", field="$")
    extra = sorted(set(obj) - set(_TOP))
    if extra:
        raise CaseError(f"unknown top-level key {extra[0]!r}", field=extra[0])
    for key in _REQUIRED_TOP:
        if key not in obj:
            raise CaseError(f"missing top-level key {key!r}", field=key)
    base = _number(obj["base_mva"], "base_mva")
    slack = obj.get("slack_bus")
    slack = None if slack is None else _ident(slack, "slack_bus")

    buses = tuple(
        Bus(_ident(r["id"], f"buses[{i}].id"), _number(r["load_mw"], f"buses[{i}].load_mw"),
            None if r.get("delta_d") is None else _number(r["delta_d"], f"buses[{i}].delta_d"))
        for i, r in enumerate(_records(obj, "buses"))
    )
    gens = []
    for i, r in enumerate(_records(obj, "generators")):
        w = f"generators[{i}]"
        gens.append(Generator(
            str(_ident(r["id"], f"{w}.id")), _ident(r["bus"], f"{w}.bus"),
            _number(r["p_min"], f"{w}.p_min"), _number(r["p_max"], f"{w}.p_max"),
            _number(r["ramp_up"], f"{w}.ramp_up"), _number(r["ramp_down"], f"{w}.ramp_down"),
            _number(r["cost"], f"{w}.cost"),
        ))
    stor = []
    for i, r in enumerate(_records(obj, "storage")):
        w = f"storage[{i}]"
        stor.append(Storage(
            str(_ident(r["id"], f"{w}.id")), _ident(r["bus"], f"{w}.bus"),
            _number(r["e_min"], f"{w}.e_min"), _number(r["e_max"], f"{w}.e_max"),
            _number(r["e_initial"], f"{w}.e_initial"),
            _number(r["p_charge_max"], f"{w}.p_charge_max"),
            _number(r["p_discharge_max"], f"{w}.p_discharge_max"),
            _number(r["cost"], f"{w}.cost"),
        ))
    lines = []
    for i, r in enumerate(_records(obj, "lines")):
        w = f"lines[{i}]"
        lines.append(Line(
            str(_ident(r["id"], f"{w}.id")), _ident(r["from"], f"{w}.from"),
            _ident(r["to"], f"{w}.to"), _number(r["reactance"], f"{w}.reactance"),
            _number(r["flow_limit"], f"{w}.flow_limit"),
        ))
    return validate_case(CaseDocument(base, slack, buses, tuple(gens), tuple(stor), tuple(lines)))


def parse_case_json(text: str) -> CaseDocument:
    """Parse and validate a native JSON case."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError(f"JSON syntax error: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    return case_from_dict(obj)


def case_to_dict(doc: CaseDocument) -> dict:
    out = {"base_mva": doc.base_mva, "slack_bus": doc.slack_bus}
    out["buses"] = [
        {"id": b.id, "load_mw": b.load_mw} | ({} if b.delta_d is None else {"delta_d": b.delta_d})
        for b in doc.buses
    ]
    out["generators"] = [asdict(g) for g in doc.generators]
    out["storage"] = [asdict(s) for s in doc.storage]
    out["lines"] = [
        {"id": ln.id, "from": ln.from_bus, "to": ln.to_bus, "reactance": ln.reactance,
         "flow_limit": ln.flow_limit}
        for ln in doc.lines
    ]
    return out


def case_to_json(doc: CaseDocument) -> str:
    return json.dumps(case_to_dict(doc), indent=2) + "\n"


def merge_storage(doc: CaseDocument, sidecar_text: str) -> CaseDocument:
    """Attach storage units from a sidecar ``{"storage": [...]}`` document."""
    try:
        obj = json.loads(sidecar_text)
    except json.JSONDecodeError as exc:
        raise CaseError(f"JSON syntax error: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    if not isinstance(obj, dict) or set(obj) - {"storage"}:
        raise CaseError("storage sidecar must be an object with only a 'storage' key", field="$")
    merged = case_to_dict(doc)
    merged["storage"] = list(merged["storage"]) + list(obj.get("storage", []))
    return case_from_dict(merged)


# ----------------------------------------------------------------------------
# MATPOWER subset

@dataclass(frozen=True)
class MatpowerOptions:
    ramp_fraction: float = 0.25
    unlimited_cap_factor: float = 10.0
    interval_minutes: float = 5.0


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>%[^\n]*)
  | (?P<newline>\n)
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[+-]?Inf\b|[+-]?inf\b)
  | (?P<name>[A-Za-z_]\w*)
  | (?P<string>'[^'\n]*')
  | (?P<punct>[.=;\[\],{}])
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    pos = 0
    line = 1
    line_start = 0
    toks = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise CaseError(f"unexpected character {text[pos]!r}", line=line, column=pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "newline":
            toks.append(("newline", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append((kind, m.group(), line, col))
        pos = m.end()
    toks.append(("eof", "", line, pos - line_start + 1))
    return toks


def _parse_matpower_fields(text: str) -> dict[str, object]:
    toks = _tokenize(text)
    i = 0
    fields: dict[str, object] = {}

    def err(msg, tok):
        raise CaseError(msg, line=tok[2], column=tok[3])

    def skip_newlines():
        nonlocal i
        while toks[i][0] == "newline" or (toks[i][0] == "punct" and toks[i][1] == ";"):
            i += 1

    while True:
        skip_newlines()
        tok = toks[i]
        if tok[0] == "eof":
            break
        if tok[0] == "name" and tok[1] == "function":
            # `function mpc = caseN` header
            while toks[i][0] not in ("newline", "eof"):
                i += 1
            continue
        if tok[0] != "name":
            err(f"expected a field assignment, found {tok[1]!r}", tok)
        i += 1
        if not (toks[i][0] == "punct" and toks[i][1] == "."):
            err("expected '.' after structure name", toks[i])
        i += 1
        if toks[i][0] != "name":
            err("expected field name", toks[i])
        fname = toks[i][1]
        i += 1
        if not (toks[i][0] == "punct" and toks[i][1] == "="):
            err("expected '='", toks[i])
        i += 1
        tok = toks[i]
        if tok[0] == "number":
            fields[fname] = float(tok[1].replace("Inf", "inf"))
            i += 1
        elif tok[0] == "string":
            i += 1  # e.g. mpc.version = '2'; ignored
        elif tok[0] == "punct" and tok[1] in "[{":
            closing = "]" if tok[1] == "[" else "}"
            start = tok
            i += 1
            rows: list[list[float]] = [[]]
            while True:
                t = toks[i]
                if t[0] == "eof":
                    err(f"unterminated matrix for field {fname}", start)
                if t[0] == "punct" and t[1] == closing:
                    i += 1
                    break
                if t[0] == "newline" or (t[0] == "punct" and t[1] == ";"):
                    if rows[-1]:
                        rows.append([])
                elif t[0] == "number":
                    rows[-1].append(float(t[1].replace("Inf", "inf")))
                elif t[0] == "punct" and t[1] == ",":
                    pass
                elif closing == "}":
                    pass  # cell arrays (bus names etc.) are read past
                else:
                    err(f"unexpected token {t[1]!r} in matrix {fname}", t)
                i += 1
            rows = [r for r in rows if r]
            if closing == "}":
                continue
            widths = {len(r) for r in rows}
            if len(widths) > 1:
                err(f"non-rectangular matrix for field {fname}", start)
            fields[fname] = rows
        else:
            err(f"expected a number or matrix for field {fname}", tok)
        if toks[i][0] == "punct" and toks[i][1] == ";":
            i += 1
        elif toks[i][0] not in ("newline", "eof"):
            err("expected ';' or end of line", toks[i])
    return fields


def parse_matpower_case(text: str, options: MatpowerOptions = MatpowerOptions()) -> CaseDocument:
    """Import a MATPOWER case script (DC-relevant columns only)."""
    fields = _parse_matpower_fields(text)
    for req in ("baseMVA", "bus", "gen", "branch"):
        if req not in fields:
            raise CaseError(f"missing required field {req}", field=req)
    base = fields["baseMVA"]
    if not isinstance(base, float):
        raise CaseError("baseMVA must be a scalar", field="baseMVA")

    def matrix(name, min_cols):
        rows = fields[name]
        if not isinstance(rows, list):
            raise CaseError(f"{name} must be a matrix", field=name)
        if rows and len(rows[0]) < min_cols:
            raise CaseError(f"{name} needs at least {min_cols} columns", field=name)
        return rows

    bus_rows = matrix("bus", 3)
    gen_rows = matrix("gen", 10)
    br_rows = matrix("branch", 6)
    cost_rows = matrix("gencost", 4) if "gencost" in fields else None

    buses = []
    slack = None
    for r in bus_rows:
        bid = int(r[0])
        buses.append(Bus(bid, float(r[2])))
        if int(r[1]) == 3 and slack is None:
            slack = bid
    total_load = sum(b.load_mw for b in buses)

    gens = []
    for k, r in enumerate(gen_rows):
        if len(r) > 7 and r[7] <= 0:
            continue
        pmax, pmin = float(r[8]), float(r[9])
        ramp = None
        if len(r) > 16 and r[16] > 0:
            ramp = float(r[16]) * options.interval_minutes  # RAMP_AGC is MW/min
        if ramp is None:
            ramp = options.ramp_fraction * pmax
        cost = 0.0
        if cost_rows is not None and k < len(cost_rows):
            cost = _linear_cost(cost_rows[k])
        gens.append(Generator(f"g{k + 1}", int(r[0]), pmin, pmax, ramp, ramp, cost))

    cap_basis = total_load if total_load > 0 else sum(g.p_max for g in gens)
    lines = []
    for k, r in enumerate(br_rows):
        if len(r) > 10 and r[10] <= 0:
            continue
        rate = float(r[5])
        limit = rate if rate > 0 else options.unlimited_cap_factor * cap_basis
        lines.append(Line(f"l{k + 1}", int(r[0]), int(r[1]), float(r[3]), limit))

    return validate_case(CaseDocument(float(base), slack, tuple(buses), tuple(gens), (), tuple(lines)))


def _linear_cost(row: Sequence[float]) -> float:
    model = int(row[0])
    ncoef = int(row[3])
    coefs = list(row[4:4 + (2 * ncoef if model == 1 else ncoef)])
    if model == 2:
        return float(coefs[-2]) if ncoef >= 2 else 0.0
    if model == 1 and ncoef >= 2:
        xs, ys = coefs[0::2], coefs[1::2]
        return float((ys[-1] - ys[0]) / (xs[-1] - xs[0])) if xs[-1] != xs[0] else 0.0
    return 0.0


def load_case(path: str, storage_path: str | None = None,
              options: MatpowerOptions = MatpowerOptions()) -> CaseDocument:
    """Read a ``.json`` or ``.m`` case file, optionally merging a storage sidecar."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    doc = parse_matpower_case(text, options) if path.endswith(".m") else parse_case_json(text)
    if storage_path:
        with open(storage_path, encoding="utf-8") as fh:
            doc = merge_storage(doc, fh.read())
    return doc


# ----------------------------------------------------------------------------
# results

RESULT_HEADER = ("interval,lambda_det,lambda_sto,iterations_det,iterations_sto,"
                 "converged_det,converged_sto,time_ms_det,time_ms_sto")


def _opt(value, fmt: str) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return format(value, fmt)


def write_results_csv(results: Iterable, include_timings: bool = True) -> str:
    """Serialize interval results (objects with the ``IntervalResult`` fields).

    With ``include_timings=False`` the wall-clock columns are left empty so
    that repeated runs are byte-identical.
    """
    lines = [RESULT_HEADER]
    for r in results:
        lines.append(",".join([
            str(r.interval),
            _opt(r.lambda_det, ".6f"),
            _opt(r.lambda_sto, ".6f"),
            _opt(r.iterations_det, "d"),
            _opt(r.iterations_sto, "d"),
            _opt(r.converged_det, ""),
            _opt(r.converged_sto, ""),
            _opt(r.time_ms_det if include_timings else None, ".3f"),
            _opt(r.time_ms_sto if include_timings else None, ".3f"),
        ]))
    return "\n".join(lines) + "\n"
