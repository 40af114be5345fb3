import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from django.conf import settings
from django.db import models
from django.utils.translation import gettext_lazy as _

from .exceptions import ModelError

logger = logging.getLogger(__name__)


class VarKind(models.TextChoices):
    CONTINUOUS = "continuous", _("Continuous")
    BINARY = "binary", _("Binary")


class Sense(models.TextChoices):
    LE = "L", _("<=")
    GE = "G", _(">=")
    EQ = "E", _("=")


class SolveStatus(models.TextChoices):
    OPTIMAL = "optimal", _("Optimal")
    INFEASIBLE = "infeasible", _("Infeasible")
    UNBOUNDED = "unbounded", _("Unbounded")
    GAP_LIMIT = "gap_limit", _("Limit reached")


@dataclass(frozen=True)
class VarDef:
    name: str
    lower: float = 0.0
    upper: float = math.inf
    kind: str = VarKind.CONTINUOUS

    @property
    def is_binary(self):
        return self.kind == VarKind.BINARY


@dataclass(frozen=True)
class LinConstraint:
    name: str
    terms: tuple[tuple[int, float], ...]
    sense: str
    rhs: float


@dataclass(frozen=True)
class MilpModel:
    """Sparse minimisation model. Term indices point into ``vars``."""

    name: str
    vars: tuple[VarDef, ...]
    constraints: tuple[LinConstraint, ...]
    objective: tuple[tuple[int, float], ...]

    def check(self):
        if not self.vars:
            raise ModelError("A model needs at least one variable")
        n = len(self.vars)
        for var in self.vars:
            if not var.lower <= var.upper:
                raise ModelError(f"Variable {var.name}: lower {var.lower} exceeds upper {var.upper}")
            if var.is_binary and (var.lower < 0 or var.upper > 1):
                raise ModelError(f"Binary {var.name} has bounds outside [0, 1]")
        for row in self.constraints:
            seen = set()
            for index, coef in row.terms:
                if not 0 <= index < n:
                    raise ModelError(f"Row {row.name} refers to variable {index} of {n}")
                if index in seen:
                    raise ModelError(f"Row {row.name} repeats variable {self.vars[index].name}")
                if not math.isfinite(coef):
                    raise ModelError(f"Row {row.name} has a non-finite coefficient")
                seen.add(index)
            if row.sense not in Sense.values:
                raise ModelError(f"Row {row.name} has unknown sense {row.sense!r}")
        for index, coef in self.objective:
            if not 0 <= index < n or not math.isfinite(coef):
                raise ModelError(f"Bad objective term ({index}, {coef})")
        return self

    @property
    def n_vars(self):
        return len(self.vars)

    @property
    def n_rows(self):
        return len(self.constraints)

    @cached_property
    def var_index(self):
        return {var.name: i for i, var in enumerate(self.vars)}

    @cached_property
    def matrix(self):
        rows, cols, data = [], [], []
        for i, row in enumerate(self.constraints):
            for j, coef in row.terms:
                rows.append(i)
                cols.append(j)
                data.append(coef)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_rows, self.n_vars), dtype=float)

    @cached_property
    def cost(self):
        c = np.zeros(self.n_vars)
        for j, coef in self.objective:
            c[j] += coef
        return c

    @cached_property
    def rhs(self):
        return np.array([row.rhs for row in self.constraints], dtype=float)

    @cached_property
    def senses(self):
        return np.array([row.sense for row in self.constraints], dtype="<U1")

    @cached_property
    def lower(self):
        return np.array([var.lower for var in self.vars], dtype=float)

    @cached_property
    def upper(self):
        return np.array([var.upper for var in self.vars], dtype=float)

    @cached_property
    def binaries(self):
        return np.array([j for j, var in enumerate(self.vars) if var.is_binary], dtype=int)

    def relaxed(self):
        return replace(self, vars=tuple(replace(var, kind=VarKind.CONTINUOUS) for var in self.vars))

    def scaled_objective(self, factor):
        return replace(self, objective=tuple((j, coef * factor) for j, coef in self.objective))

    def evaluate(self, values):
        return float(self.cost @ np.asarray(values, dtype=float))

    def row_activity(self, values):
        return self.matrix @ np.asarray(values, dtype=float)


def max_violation(model, values):
    """Largest row or bound violation of ``values``; reads only the model."""
    values = np.asarray(values, dtype=float)
    worst = 0.0
    for row in model.constraints:
        activity = sum(coef * values[j] for j, coef in row.terms)
        if row.sense == Sense.LE:
            gap = activity - row.rhs
        elif row.sense == Sense.GE:
            gap = row.rhs - activity
        else:
            gap = abs(activity - row.rhs)
        worst = max(worst, gap)
    for var, value in zip(model.vars, values):
        worst = max(worst, var.lower - value, value - var.upper)
    return worst


class ModelBuilder:
    """Incremental construction of a ``MilpModel`` with unique names."""

    def __init__(self, name):
        self.name = name
        self._vars = []
        self._rows = []
        self._objective = {}
        self._names = set()
        self._row_names = set()

    def add_var(self, name, lower=0.0, upper=math.inf, kind=VarKind.CONTINUOUS, cost=0.0):
        if name in self._names:
            raise ModelError(f"Duplicate variable name {name}")
        self._names.add(name)
        self._vars.append(VarDef(name=name, lower=float(lower), upper=float(upper), kind=kind))
        index = len(self._vars) - 1
        if cost:
            self._objective[index] = self._objective.get(index, 0.0) + float(cost)
        return index

    def add_cost(self, index, cost):
        if cost:
            self._objective[index] = self._objective.get(index, 0.0) + float(cost)

    def add_constraint(self, name, terms, sense, rhs=0.0):
        if name in self._row_names:
            raise ModelError(f"Duplicate constraint name {name}")
        self._row_names.add(name)
        merged = {}
        for index, coef in terms:
            merged[index] = merged.get(index, 0.0) + float(coef)
        cleaned = tuple((j, c) for j, c in merged.items() if c != 0.0)
        self._rows.append(LinConstraint(name=name, terms=cleaned, sense=sense, rhs=float(rhs)))
        return len(self._rows) - 1

    def build(self):
        objective = tuple((j, c) for j, c in sorted(self._objective.items()) if c != 0.0)
        model = MilpModel(name=self.name, vars=tuple(self._vars), constraints=tuple(self._rows), objective=objective)
        logger.debug(f"Built model {self.name}: {model.n_vars} variables, {model.n_rows} rows")
        return model.check()


@dataclass(frozen=True)
class Solution:
    status: str
    values: np.ndarray | None
    objective: float
    bound: float
    gap: float
    nodes: int = 0
    iterations: int = 0
    ray: np.ndarray | None = None
    farkas: np.ndarray | None = None

    @property
    def is_optimal(self):
        return self.status == SolveStatus.OPTIMAL

    def value_of(self, model, name):
        return float(self.values[model.var_index[name]])


def _solver_setting(key):
    return settings.MILP_SOLVER[key]


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-7
    integrality: float = 1e-6
    optimality: float = 1e-9
    pivot: float = 1e-9
    breakdown_pivot: float = 1e-11
    refactor_every: int = 64

    @classmethod
    def from_settings(cls):
        return cls(
            feasibility=_solver_setting("FEASIBILITY_TOL"),
            integrality=_solver_setting("INTEGRALITY_TOL"),
            optimality=_solver_setting("OPTIMALITY_TOL"),
            pivot=_solver_setting("PIVOT_TOL"),
            breakdown_pivot=_solver_setting("BREAKDOWN_PIVOT"),
            refactor_every=_solver_setting("REFACTOR_EVERY"),
        )


@dataclass(frozen=True)
class SolverLimits:
    max_nodes: int = 100_000
    rel_gap: float = 1e-6
    time_limit: float | None = None
    resort_every: int = 64
    tolerances: Tolerances = field(default_factory=Tolerances)

    @classmethod
    def from_settings(cls, **overrides):
        values = {
            "max_nodes": _solver_setting("MAX_NODES"),
            "rel_gap": _solver_setting("REL_GAP"),
            "time_limit": _solver_setting("TIME_LIMIT"),
            "resort_every": _solver_setting("RESORT_EVERY"),
            "tolerances": Tolerances.from_settings(),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)
