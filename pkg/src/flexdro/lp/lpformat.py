"""Plain-text dump of a problem, for audit and for feeding external solvers.

The grammar is a subset of the CPLEX LP format::

    \\ comment
    Maximize | Minimize
     obj: <term> <term> ...
    Subject To
     <row>: <terms> <= | >= | = <number>
    Bounds
     <lo> <= <var> <= <hi>        (lo/hi may be -inf / +inf)
     <var> free
    Binaries
     <var> <var> ...
    End

A term is ``+ <coef> <var>`` or ``- <coef> <var>``; coefficients are printed
with 17 significant digits so a dump read back reproduces the problem
exactly. Variable names default to ``x<j>`` and row names to ``r<i>``
(inequalities) and ``e<i>`` (equalities). Every ``<=`` row of the problem is
written as ``<=``; ``>=`` is accepted on input and negated.
"""
from __future__ import annotations

import re

import numpy as np

from .model import LinearProgram, MixedBinaryProgram


def _fmt(v: float) -> str:
    if v == np.inf:
        return "+inf"
    if v == -np.inf:
        return "-inf"
    return repr(float(v))


def _terms(coefs, names) -> str:
    parts = []
    for a, name in zip(coefs, names):
        if a == 0.0:
            continue
        parts.append(("- " if a < 0 else "+ ") + _fmt(abs(a)) + " " + name)
    return " ".join(parts) if parts else "+ 0 " + names[0] if len(names) else "0"


def dump_lp(problem: LinearProgram | MixedBinaryProgram) -> str:
    if isinstance(problem, MixedBinaryProgram):
        lp, binaries = problem.lp, problem.binaries
    else:
        lp, binaries = problem, np.zeros(0, dtype=np.int64)
    n = lp.num_vars
    names = lp.col_names or [f"x{j}" for j in range(n)]
    out = ["\\ flexdro problem dump", "Maximize" if lp.maximize else "Minimize"]
    out.append(" obj: " + _terms(lp.c, names))
    out.append("Subject To")
    ub_names = (lp.row_names or [])[: lp.num_ub] or [f"r{i}" for i in range(lp.num_ub)]
    eq_names = (lp.row_names or [])[lp.num_ub:] or [f"e{i}" for i in range(lp.num_eq)]
    for i in range(lp.num_ub):
        out.append(f" {ub_names[i]}: {_terms(lp.A_ub[i], names)} <= {_fmt(lp.b_ub[i])}")
    for i in range(lp.num_eq):
        out.append(f" {eq_names[i]}: {_terms(lp.A_eq[i], names)} = {_fmt(lp.b_eq[i])}")
    out.append("Bounds")
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if lo == -np.inf and hi == np.inf:
            out.append(f" {names[j]} free")
        else:
            out.append(f" {_fmt(lo)} <= {names[j]} <= {_fmt(hi)}")
    if binaries.size:
        out.append("Binaries")
        out.append(" " + " ".join(names[j] for j in binaries))
    out.append("End")
    return "\n".join(out) + "\n"


_TERM = re.compile(r"([+-])\s*([0-9.eE+\-]+|inf)\s+([A-Za-z_][\w.\[\]]*)")


def _parse_terms(text: str, index: dict, n: int) -> np.ndarray:
    row = np.zeros(n)
    for sign, coef, name in _TERM.findall(text):
        if name not in index:
            raise ValueError(f"unknown variable {name!r}")
        row[index[name]] += (-1.0 if sign == "-" else 1.0) * float(coef)
    return row


def _num(tok: str) -> float:
    return {"+inf": np.inf, "inf": np.inf, "-inf": -np.inf}.get(tok, None) or float(tok)


def read_lp(text: str) -> LinearProgram | MixedBinaryProgram:
    """Inverse of :func:`dump_lp` for files written by it."""
    lines = [ln.split("\\", 1)[0].rstrip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln.strip()]
    section = None
    sense = None
    obj_text = ""
    rows: list[tuple[str, str, str, float]] = []
    bounds: list[str] = []
    binaries: list[str] = []
    for ln in lines:
        key = ln.strip().lower()
        if key in ("maximize", "minimize"):
            sense = key
            section = "obj"
            continue
        if key == "subject to":
            section = "rows"
            continue
        if key in ("bounds", "binaries", "end"):
            section = key
            continue
        if section == "obj":
            obj_text += " " + ln.split(":", 1)[-1]
        elif section == "rows":
            name, body = ln.split(":", 1)
            m = re.match(r"(.*?)(<=|>=|=)\s*(\S+)\s*$", body)
            if not m:
                raise ValueError(f"cannot parse row {ln!r}")
            rows.append((name.strip(), m.group(1), m.group(2), _num(m.group(3))))
        elif section == "bounds":
            bounds.append(ln.strip())
        elif section == "binaries":
            binaries.extend(ln.split())
    if sense is None:
        raise ValueError("missing objective sense")
    names: list[str] = []
    for b in bounds:
        parts = b.split()
        names.append(parts[0] if parts[-1] == "free" else parts[2])
    index = {nm: j for j, nm in enumerate(names)}
    n = len(names)
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    for j, b in enumerate(bounds):
        parts = b.split()
        if parts[-1] == "free":
            lower[j], upper[j] = -np.inf, np.inf
        else:
            lower[j], upper[j] = _num(parts[0]), _num(parts[4])
    c = _parse_terms(obj_text, index, n)
    A_ub, b_ub, A_eq, b_eq, ub_names, eq_names = [], [], [], [], [], []
    for name, body, op, rhs in rows:
        row = _parse_terms(body, index, n)
        if op == "=":
            A_eq.append(row)
            b_eq.append(rhs)
            eq_names.append(name)
        else:
            sgn = 1.0 if op == "<=" else -1.0
            A_ub.append(sgn * row)
            b_ub.append(sgn * rhs)
            ub_names.append(name)
    lp = LinearProgram(
        c, np.array(A_ub).reshape(-1, n), b_ub, np.array(A_eq).reshape(-1, n), b_eq,
        lower, upper, maximize=(sense == "maximize"), row_names=ub_names + eq_names,
        col_names=names,
    )
    if binaries:
        return MixedBinaryProgram(lp, [index[b] for b in binaries])
    return lp
