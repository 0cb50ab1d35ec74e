"""CPLEX-LP-style text export and the matching parser.

The exporter writes a canonical layout (every variable gets a Bounds line,
every term is written as `sign magnitude name`), so export -> parse ->
export reproduces the file byte for byte.  The parser is slightly more
lenient than the exporter (free-form spacing, `free` bound lines,
continuation lines) to accept hand-edited files.
"""

from __future__ import annotations

import math
import re

from ..errors import LpParseError
from .model import MilpModel

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_SECTIONS = {
    "minimize": "objective",
    "maximize": "objective",
    "subject to": "constraints",
    "st": "constraints",
    "s.t.": "constraints",
    "bounds": "bounds",
    "binaries": "binaries",
    "binary": "binaries",
    "end": "end",
}


def _num(v):
    if math.isinf(v):
        return "+infinity" if v > 0 else "-infinity"
    return repr(float(v))


def _terms(coeffs):
    parts = []
    for name, coeff in coeffs.items():
        if coeff == 0.0:
            continue
        sign = "+" if coeff >= 0 else "-"
        parts.append(f"{sign} {_num(abs(coeff))} {name}")
    return " ".join(parts)


def export_lp(model):
    """Serialise the model in CPLEX-LP style."""
    lines = [f"\\ Problem: {model.name}"]
    lines.append("Minimize" if model.objective_sense == "min" else "Maximize")
    lines.append(f" obj: {_terms(model.objective)}".rstrip())
    lines.append("Subject To")
    for con in model.constraints:
        lhs = _terms(con.coeffs)
        lines.append(f" {con.name}: {lhs} {con.sense} {_num(con.rhs)}")
    lines.append("Bounds")
    for name in model.var_order:
        var = model.variables[name]
        lines.append(f" {_num(var.lb)} <= {name} <= {_num(var.ub)}")
    binaries = model.binary_names
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(binaries))
    lines.append("End")
    return "\n".join(lines) + "\n"


def _parse_number(token):
    low = token.lower()
    if low in ("+infinity", "infinity", "+inf", "inf"):
        return math.inf
    if low in ("-infinity", "-inf"):
        return -math.inf
    try:
        return float(token)
    except ValueError:
        return None


def _parse_terms(tokens, where):
    """tokens -> (coeff dict in order of appearance)."""
    coeffs = {}
    sign = 1.0
    pending = None
    for tok in tokens:
        if tok == "+":
            if pending is not None:
                raise LpParseError(f"dangling coefficient in {where}")
            sign = 1.0
        elif tok == "-":
            if pending is not None:
                raise LpParseError(f"dangling coefficient in {where}")
            sign = -1.0
        else:
            num = _parse_number(tok)
            if num is not None:
                if pending is not None:
                    raise LpParseError(f"two coefficients in a row in {where}")
                pending = num
            elif _IDENT.match(tok):
                coeff = sign * (1.0 if pending is None else pending)
                coeffs[tok] = coeffs.get(tok, 0.0) + coeff
                sign, pending = 1.0, None
            else:
                raise LpParseError(f"unexpected token {tok!r} in {where}")
    if pending is not None:
        raise LpParseError(f"dangling coefficient at end of {where}")
    return coeffs


def _split_statements(lines, where):
    """Group raw lines into statements; a ':' opens a new one."""
    statements = []
    for line in lines:
        if ":" in line:
            label, rest = line.split(":", 1)
            statements.append((label.strip(), rest.strip()))
        else:
            if not statements:
                statements.append((None, line.strip()))
            else:
                label, rest = statements[-1]
                statements[-1] = (label, f"{rest} {line.strip()}")
    if not statements:
        raise LpParseError(f"empty {where} section")
    return statements


def parse_lp(text):
    """Parse LP text produced by export_lp (or close to it) into a MilpModel."""
    name = "model"
    section = None
    sense = "min"
    raw = {"objective": [], "constraints": [], "bounds": [], "binaries": []}
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("\\"):
            comment = stripped[1:].strip()
            if comment.lower().startswith("problem:"):
                name = comment[len("problem:"):].strip() or "model"
            continue
        key = stripped.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if key == "minimize":
                sense = "min"
            elif key == "maximize":
                sense = "max"
            if section == "end":
                break
            continue
        if section is None or section == "end":
            raise LpParseError(f"statement outside any section: {stripped!r}")
        raw[section].append(stripped)

    model = MilpModel(name=name)

    binary_names = set()
    for line in raw["binaries"]:
        for tok in line.split():
            if not _IDENT.match(tok):
                raise LpParseError(f"invalid binary name {tok!r}")
            binary_names.add(tok)

    if not raw["bounds"]:
        raise LpParseError("missing Bounds section: variables cannot be declared")
    for line in raw["bounds"]:
        tokens = line.split()
        if len(tokens) == 2 and tokens[1].lower() == "free":
            model.add_var(tokens[0], lb=-math.inf, ub=math.inf,
                          binary=tokens[0] in binary_names)
            continue
        if len(tokens) == 5 and tokens[1] == "<=" and tokens[3] == "<=":
            lo = _parse_number(tokens[0])
            hi = _parse_number(tokens[4])
            if lo is None or hi is None or not _IDENT.match(tokens[2]):
                raise LpParseError(f"bad bounds line: {line!r}")
            model.add_var(tokens[2], lb=lo, ub=hi, binary=tokens[2] in binary_names)
            continue
        raise LpParseError(f"bad bounds line: {line!r}")
    missing = binary_names - set(model.var_order)
    if missing:
        raise LpParseError(f"binaries without bounds lines: {sorted(missing)}")

    statements = (
        _split_statements(raw["constraints"], "constraints")
        if raw["constraints"]
        else []
    )
    for label, body in statements:
        m = re.search(r"(<=|>=|=)", body)
        if not m:
            raise LpParseError(f"constraint without comparator: {body!r}")
        lhs, op, rhs_text = body[: m.start()], m.group(1), body[m.end():]
        rhs = _parse_number(rhs_text.strip())
        if rhs is None or math.isinf(rhs):
            raise LpParseError(f"bad right-hand side in {body!r}")
        coeffs = _parse_terms(lhs.split(), f"constraint {label!r}")
        unknown = [v for v in coeffs if v not in model.variables]
        if unknown:
            raise LpParseError(f"constraint {label!r} uses undeclared {unknown}")
        model.add_constraint(coeffs, op, rhs, name=label)

    if raw["objective"]:
        obj_statements = _split_statements(raw["objective"], "objective")
        if len(obj_statements) != 1:
            raise LpParseError("objective must be a single statement")
        _, body = obj_statements[0]
        coeffs = _parse_terms(body.split(), "objective")
        unknown = [v for v in coeffs if v not in model.variables]
        if unknown:
            raise LpParseError(f"objective uses undeclared {unknown}")
        model.set_objective(coeffs, sense)
    return model
