"""Free-format MPS writer and reader.

Only the subset this package produces is read back: one objective row,
``'MARKER'`` integer blocks holding binaries, a single RHS set and a single
bound set. General integers and RANGES are rejected.
"""

import logging
import math

from django.core.exceptions import ValidationError

from ..validators import validate_mps_name
from .exceptions import MpsFormatError, MpsNameError
from .model import LinConstraint, MilpModel, Sense, VarDef, VarKind

logger = logging.getLogger(__name__)

SECTIONS = ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA")
UNSUPPORTED_SECTIONS = ("RANGES", "OBJSENSE", "OBJSENSE MAX", "SOS", "QUADOBJ")
BOUND_SET = "BND"
RHS_SET = "RHS"


def _num(value):
    return format(float(value), ".17g")


def _check_names(model):
    for kind, names in (("variable", [v.name for v in model.vars]), ("constraint", [c.name for c in model.constraints])):
        seen = set()
        for name in names:
            try:
                validate_mps_name(name)
            except ValidationError as exc:
                raise MpsNameError(f"Invalid {kind} name {name!r}: {exc.messages[0]}") from exc
            if name in seen:
                raise MpsNameError(f"Duplicate {kind} name {name!r}")
            seen.add(name)
    return {c.name for c in model.constraints}


def _objective_row_name(row_names):
    name, suffix = "obj", 0
    while name in row_names:
        suffix += 1
        name = f"obj_{suffix}"
    return name


def _bound_lines(var):
    lo, up = var.lower, var.upper
    if var.is_binary and lo == 0.0 and up == 1.0:
        return [f" BV {BOUND_SET} {var.name}"]
    if lo == up:
        return [f" FX {BOUND_SET} {var.name} {_num(lo)}"]
    lines = []
    if lo == -math.inf:
        lines.append(f" {'FR' if up == math.inf else 'MI'} {BOUND_SET} {var.name}")
    elif lo != 0.0:
        lines.append(f" LO {BOUND_SET} {var.name} {_num(lo)}")
    # integer blocks default to an upper bound of 1
    if up != (1.0 if var.is_binary else math.inf):
        lines.append(f" UP {BOUND_SET} {var.name} {_num(up)}")
    return lines


def write_mps(model):
    """Render ``model`` as free-format MPS text in model order."""
    model.check()
    row_names = _check_names(model)
    objective_row = _objective_row_name(row_names)
    model_name = model.name if model.name and not any(ch.isspace() for ch in model.name) else "model"

    out = [f"NAME {model_name}", "ROWS", f" N {objective_row}"]
    out += [f" {row.sense} {row.name}" for row in model.constraints]

    out.append("COLUMNS")
    columns = model.matrix.tocsc()
    columns.sort_indices()
    cost = model.cost
    in_marker = False
    marker = 0
    for j, var in enumerate(model.vars):
        if var.is_binary and not in_marker:
            out.append(f" MARKER{marker} 'MARKER' 'INTORG'")
            in_marker = True
        elif not var.is_binary and in_marker:
            out.append(f" MARKER{marker} 'MARKER' 'INTEND'")
            in_marker = False
            marker += 1
        start, end = columns.indptr[j], columns.indptr[j + 1]
        entries = [(model.constraints[i].name, v) for i, v in zip(columns.indices[start:end], columns.data[start:end])]
        if cost[j] != 0.0 or not entries:
            entries.insert(0, (objective_row, cost[j]))
        out += [f" {var.name} {row} {_num(value)}" for row, value in entries]
    if in_marker:
        out.append(f" MARKER{marker} 'MARKER' 'INTEND'")

    out.append("RHS")
    out += [f" {RHS_SET} {row.name} {_num(row.rhs)}" for row in model.constraints if row.rhs != 0.0]

    out.append("BOUNDS")
    for var in model.vars:
        out += _bound_lines(var)
    out.append("ENDATA")
    logger.debug(f"Wrote MPS for {model.name}: {model.n_vars} columns, {model.n_rows} rows")
    return "\n".join(out) + "\n"


class _Reader:
    def __init__(self, text):
        self.lines = text.splitlines()
        self.section = None
        self.line_no = 0
        self.name = None
        self.objective_row = None
        self.row_sense = {}
        self.row_order = []
        self.free_rows = set()
        self.var_order = []
        self.bounds = {}
        self.binary = set()
        self.terms = {}
        self.objective = {}
        self.rhs = {}
        self.in_marker = False

    def error(self, message):
        return MpsFormatError(message, line=self.line_no or None, section=self.section)

    def number(self, token):
        try:
            value = float(token)
        except ValueError:
            raise self.error(f"Bad number {token!r}") from None
        if math.isnan(value):
            raise self.error(f"Bad number {token!r}")
        return value

    def parse(self):
        for self.line_no, raw in enumerate(self.lines, start=1):
            stripped = raw.strip()
            if not stripped or stripped.startswith("*"):
                continue
            tokens = stripped.split()
            if not raw[0].isspace():
                if self.section_header(tokens):
                    return self.build()
                continue
            if self.section is None:
                raise self.error("missing NAME")
            getattr(self, f"read_{self.section.lower()}")(tokens)
        self.line_no = len(self.lines)
        if self.section is None:
            raise MpsFormatError("missing NAME", line=None, section=None)
        raise self.error("missing ENDATA")

    def section_header(self, tokens):
        keyword = tokens[0].upper()
        if self.section is None and keyword != "NAME":
            raise self.error("missing NAME")
        if keyword in UNSUPPORTED_SECTIONS or " ".join(tokens).upper() in UNSUPPORTED_SECTIONS:
            raise self.error(f"Unsupported section {keyword}")
        if keyword not in SECTIONS:
            raise self.error(f"Unknown section {keyword}")
        current = SECTIONS.index(self.section) if self.section else -1
        if SECTIONS.index(keyword) <= current:
            raise self.error(f"Section {keyword} out of order")
        if self.section == "COLUMNS" and self.in_marker:
            raise self.error("Unterminated INTORG marker")
        self.section = keyword
        if keyword == "NAME":
            self.name = tokens[1] if len(tokens) > 1 else ""
        return keyword == "ENDATA"

    def read_name(self, tokens):
        raise self.error("Unexpected data after NAME")

    def read_rows(self, tokens):
        if len(tokens) != 2:
            raise self.error("Expected '<type> <row>'")
        kind, name = tokens[0].upper(), tokens[1]
        if name in self.row_sense or name == self.objective_row or name in self.free_rows:
            raise self.error(f"Duplicate row {name}")
        if kind == "N":
            if self.objective_row is None:
                self.objective_row = name
            else:
                self.free_rows.add(name)
        elif kind in Sense.values:
            self.row_sense[name] = kind
            self.row_order.append(name)
            self.terms[name] = {}
        else:
            raise self.error(f"Unknown row type {kind}")

    def read_columns(self, tokens):
        if len(tokens) == 3 and tokens[1] == "'MARKER'":
            if tokens[2] == "'INTORG'":
                self.in_marker = True
            elif tokens[2] == "'INTEND'":
                self.in_marker = False
            else:
                raise self.error(f"Unknown marker {tokens[2]}")
            return
        if len(tokens) not in (3, 5):
            raise self.error("Expected '<column> <row> <value> [<row> <value>]'")
        column = tokens[0]
        if column not in self.bounds:
            self.var_order.append(column)
            self.bounds[column] = [0.0, 1.0 if self.in_marker else math.inf]
            if self.in_marker:
                self.binary.add(column)
        for row, token in zip(tokens[1::2], tokens[2::2]):
            value = self.number(token)
            if row == self.objective_row:
                self.objective[column] = self.objective.get(column, 0.0) + value
            elif row in self.terms:
                self.terms[row][column] = self.terms[row].get(column, 0.0) + value
            elif row not in self.free_rows:
                raise self.error(f"Unknown row {row}")

    def read_rhs(self, tokens):
        pairs = tokens[1:] if len(tokens) % 2 else tokens
        if not pairs or len(pairs) % 2:
            raise self.error("Expected '[<set>] <row> <value> [<row> <value>]'")
        for row, token in zip(pairs[0::2], pairs[1::2]):
            value = self.number(token)
            if row == self.objective_row:
                raise self.error("Objective constants are not supported")
            if row not in self.row_sense:
                raise self.error(f"Unknown row {row}")
            self.rhs[row] = value

    def read_bounds(self, tokens):
        kind = tokens[0].upper()
        if kind in ("LI", "UI", "SC"):
            raise self.error(f"General integer bound {kind} is not supported")
        valued = kind in ("UP", "LO", "FX")
        if len(tokens) not in ((4,) if valued else (3, 4)):
            raise self.error(f"Expected '{kind} <set> <column>{' <value>' if valued else ''}'")
        column = tokens[2]
        if column not in self.bounds:
            raise self.error(f"Unknown column {column}")
        bound = self.bounds[column]
        value = self.number(tokens[3]) if len(tokens) == 4 else None
        if kind == "UP":
            bound[1] = value
        elif kind == "LO":
            bound[0] = value
        elif kind == "FX":
            bound[0] = bound[1] = value
        elif kind == "FR":
            bound[0], bound[1] = -math.inf, math.inf
        elif kind == "MI":
            bound[0] = -math.inf
        elif kind == "PL":
            bound[1] = math.inf
        elif kind == "BV":
            bound[0], bound[1] = 0.0, 1.0
            self.binary.add(column)
        else:
            raise self.error(f"Unknown bound type {kind}")

    def build(self):
        if self.objective_row is None and not self.row_order and not self.var_order:
            raise self.error("missing ROWS")
        index = {name: j for j, name in enumerate(self.var_order)}
        variables = tuple(
            VarDef(
                name=name,
                lower=self.bounds[name][0],
                upper=self.bounds[name][1],
                kind=VarKind.BINARY if name in self.binary else VarKind.CONTINUOUS,
            )
            for name in self.var_order
        )
        constraints = tuple(
            LinConstraint(
                name=row,
                terms=tuple((index[col], value) for col, value in self.terms[row].items()),
                sense=self.row_sense[row],
                rhs=self.rhs.get(row, 0.0),
            )
            for row in self.row_order
        )
        objective = tuple((index[col], value) for col, value in self.objective.items() if value != 0.0)
        return MilpModel(name=self.name or "model", vars=variables, constraints=constraints, objective=objective).check()


def read_mps(text):
    """Parse free-format MPS text into a ``MilpModel``."""
    return _Reader(text).parse()
