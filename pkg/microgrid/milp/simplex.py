"""Bounded-variable revised simplex.

Every row gets a slack column so the working matrix is ``[A | I]``:
``<=`` rows carry a slack in ``[0, inf)``, ``>=`` rows one in ``(-inf, 0]``
and equalities a slack fixed at zero. Feasibility is reached with a
composite phase 1 that minimises the sum of bound violations of the basic
variables, which works from any starting basis. Branch-and-bound relies on
that to warm start every node from its parent's basis.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .exceptions import NumericalBreakdown
from .model import Sense, Solution, SolveStatus, Tolerances

logger = logging.getLogger(__name__)

AT_LOWER, AT_UPPER, FREE_ZERO, BASIC = 0, 1, 2, 3


class BasisFactor:
    """LU factors of the basis matrix followed by a product-form eta file."""

    def __init__(self, matrix, basic, refactor_every):
        self.matrix = matrix
        self.refactor_every = refactor_every
        self.factorize(basic)

    def factorize(self, basic):
        try:
            self.lu = splu(self.matrix[:, basic].tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise NumericalBreakdown(f"Singular basis: {exc}") from exc
        self.etas = []

    def ftran(self, rhs):
        x = self.lu.solve(np.ascontiguousarray(rhs, dtype=float))
        for row, eta in self.etas:
            pivot = x[row]
            if pivot != 0.0:
                x += pivot * eta
        return x

    def btran(self, rhs):
        y = np.array(rhs, dtype=float)
        for row, eta in reversed(self.etas):
            y[row] += eta @ y
        return self.lu.solve(y, trans="T")

    def update(self, row, alpha):
        """Record a pivot on ``row``; True when a fresh factorization is due."""
        eta = -alpha / alpha[row]
        eta[row] = 1.0 / alpha[row] - 1.0
        self.etas.append((row, eta))
        return len(self.etas) >= self.refactor_every


@dataclass(frozen=True)
class BasisState:
    basic: np.ndarray
    status: np.ndarray


@dataclass(frozen=True)
class LpResult:
    status: str
    values: np.ndarray | None
    objective: float
    iterations: int
    basis: BasisState | None = None
    ray: np.ndarray | None = None
    farkas: np.ndarray | None = None

    def to_solution(self):
        return Solution(
            status=self.status,
            values=self.values,
            objective=self.objective,
            bound=self.objective,
            gap=0.0,
            nodes=0,
            iterations=self.iterations,
            ray=self.ray,
            farkas=self.farkas,
        )


class LpEngine:
    """Reusable LP solver over one model's rows; bounds may change per call."""

    def __init__(self, model, tolerances=None):
        self.model = model
        self.tol = tolerances or Tolerances.from_settings()
        self.n = model.n_vars

        counts = np.diff(model.matrix.indptr)
        self.rows = np.flatnonzero(counts > 0)
        self.empty_infeasible = None
        for i in np.flatnonzero(counts == 0):
            if not self._empty_row_holds(model.constraints[i]):
                self.empty_infeasible = int(i)
                break

        self.m = len(self.rows)
        senses = model.senses[self.rows]
        self.b = model.rhs[self.rows]
        self.slack_lower = np.where(senses == Sense.GE, -np.inf, 0.0)
        self.slack_upper = np.where(senses == Sense.LE, np.inf, 0.0)
        self.A = sp.hstack([model.matrix[self.rows], sp.identity(self.m, format="csr")]).tocsc()
        self.A_T = self.A.T.tocsr()
        self.cost = np.concatenate([model.cost, np.zeros(self.m)])
        self.iteration_limit = max(10_000, 50 * (self.n + 2 * self.m))

    def _empty_row_holds(self, row):
        tol = self.tol.feasibility
        if row.sense == Sense.LE:
            return row.rhs >= -tol
        if row.sense == Sense.GE:
            return row.rhs <= tol
        return abs(row.rhs) <= tol

    def _farkas_from(self, y):
        farkas = np.zeros(self.model.n_rows)
        farkas[self.rows] = y
        return farkas

    def solve(self, lower=None, upper=None, warm=None):
        lower = self.model.lower if lower is None else lower
        upper = self.model.upper if upper is None else upper
        if self.empty_infeasible is not None:
            farkas = np.zeros(self.model.n_rows)
            farkas[self.empty_infeasible] = 1.0
            return LpResult(SolveStatus.INFEASIBLE, None, np.inf, 0, farkas=farkas)
        if np.any(lower > upper + self.tol.feasibility):
            return LpResult(SolveStatus.INFEASIBLE, None, np.inf, 0, farkas=np.zeros(self.model.n_rows))
        if self.m == 0:
            return self._solve_box(lower, upper)
        full_lower = np.concatenate([lower, self.slack_lower])
        full_upper = np.concatenate([upper, self.slack_upper])
        return _SimplexRun(self, full_lower, full_upper, warm).execute()

    def _solve_box(self, lower, upper):
        c = self.model.cost
        x = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
        up = c < 0
        down = c > 0
        if np.any(up & ~np.isfinite(upper)) or np.any(down & ~np.isfinite(lower)):
            j = int(np.flatnonzero((up & ~np.isfinite(upper)) | (down & ~np.isfinite(lower)))[0])
            ray = np.zeros(self.n)
            ray[j] = 1.0 if c[j] < 0 else -1.0
            return LpResult(SolveStatus.UNBOUNDED, None, -np.inf, 0, ray=ray)
        x = np.where(up, upper, np.where(down, lower, x))
        return LpResult(SolveStatus.OPTIMAL, x, float(c @ x), 0)


class _SimplexRun:
    def __init__(self, engine, lower, upper, warm):
        self.engine = engine
        self.tol = engine.tol
        self.lower = lower
        self.upper = upper
        self.iterations = 0
        m, n_full = engine.m, engine.n + engine.m
        self.x = np.zeros(n_full)

        if warm is not None and len(warm.basic) == m and len(warm.status) == n_full:
            self.basic = warm.basic.copy()
            self.status = warm.status.copy()
            try:
                self._refresh()
                return
            except NumericalBreakdown:
                logger.debug("Warm basis rejected, starting from the slack basis")
        self.basic = np.arange(engine.n, n_full)
        self.status = np.full(n_full, AT_LOWER)
        self.status[self.basic] = BASIC
        self._refresh()

    def _refresh(self):
        self._place_nonbasic()
        self.factor = BasisFactor(self.engine.A, self.basic, self.tol.refactor_every)
        self._recompute_basics()

    def _place_nonbasic(self):
        s, lo, up = self.status, self.lower, self.upper
        nonbasic = s != BASIC
        to_upper = nonbasic & (s == AT_UPPER) & np.isfinite(up)
        to_lower = nonbasic & ~to_upper & np.isfinite(lo)
        to_upper |= nonbasic & ~to_lower & ~to_upper & np.isfinite(up)
        free = nonbasic & ~to_lower & ~to_upper
        s[to_lower] = AT_LOWER
        s[to_upper] = AT_UPPER
        s[free] = FREE_ZERO
        self.x[to_lower] = lo[to_lower]
        self.x[to_upper] = up[to_upper]
        self.x[free] = 0.0

    def _recompute_basics(self):
        self.x[self.basic] = 0.0
        residual = self.engine.b - self.engine.A @ self.x
        self.x[self.basic] = self.factor.ftran(residual)
        self.dirty = False

    def _refactor(self):
        self.factor.factorize(self.basic)
        self._recompute_basics()

    def _column(self, j):
        A = self.engine.A
        start, end = A.indptr[j], A.indptr[j + 1]
        col = np.zeros(self.engine.m)
        col[A.indices[start:end]] = A.data[start:end]
        return col

    def execute(self):
        engine, tol = self.engine, self.tol
        m = engine.m
        n_full = engine.n + m
        movable = self.lower < self.upper
        stall_limit = 2 * (m + n_full)
        bland = False
        stall = 0
        best = np.inf
        last_phase = None

        while True:
            if self.iterations > engine.iteration_limit:
                raise NumericalBreakdown(f"No convergence after {self.iterations} simplex iterations")

            basic = self.basic
            xb, lb, ub = self.x[basic], self.lower[basic], self.upper[basic]
            below = xb < lb - tol.feasibility
            above = xb > ub + tol.feasibility
            phase_one = bool(below.any() or above.any())

            if phase_one:
                cb = above.astype(float) - below.astype(float)
                objective = float(np.sum((lb - xb)[below]) + np.sum((xb - ub)[above]))
            else:
                cb = engine.cost[basic]
                objective = float(engine.cost @ self.x)

            if phase_one != last_phase:
                last_phase, best, stall, bland = phase_one, np.inf, 0, False
            if objective < best - 1e-12 * max(1.0, abs(objective)):
                best, stall, bland = objective, 0, False
            else:
                stall += 1
                if stall > stall_limit and not bland:
                    logger.debug(f"No progress for {stall} iterations, switching to Bland's rule")
                    bland = True

            y = self.factor.btran(cb)
            d = -(engine.A_T @ y)
            if not phase_one:
                d += engine.cost
            d[basic] = 0.0

            s = self.status
            free = s == FREE_ZERO
            can_rise = ((s == AT_LOWER) & movable) | free
            can_fall = ((s == AT_UPPER) & movable) | free
            eligible = (can_rise & (d < -tol.optimality)) | (can_fall & (d > tol.optimality))
            if not eligible.any():
                if self.dirty:
                    self._refactor()
                    continue
                if phase_one:
                    return LpResult(SolveStatus.INFEASIBLE, None, np.inf, self.iterations, farkas=engine._farkas_from(y))
                return self._optimal()

            candidates = np.flatnonzero(eligible)
            q = int(candidates[0] if bland else candidates[np.argmax(np.abs(d[candidates]))])
            sigma = 1.0 if d[q] < 0 else -1.0

            alpha = self.factor.ftran(self._column(q))
            delta = -sigma * alpha
            threshold = tol.breakdown_pivot if bland else tol.pivot
            ratios, to_upper = self._ratio_test(delta, xb, lb, ub, below, above, threshold)
            theta = ratios.min() if m else np.inf
            flip = self.upper[q] - self.lower[q]

            if np.isfinite(flip) and flip <= theta:
                self.x[basic] += flip * delta
                self.x[q] = self.upper[q] if sigma > 0 else self.lower[q]
                s[q] = AT_UPPER if sigma > 0 else AT_LOWER
                self.iterations += 1
                self.dirty = True
                continue

            if not np.isfinite(theta):
                if not bland and np.any(np.abs(delta) > tol.breakdown_pivot) and np.any(np.abs(delta) <= tol.pivot):
                    bland = True
                    self._refactor()
                    continue
                if phase_one:
                    raise NumericalBreakdown(f"Phase 1 step on column {q} has no blocking row")
                ray = np.zeros(n_full)
                ray[q] = sigma
                ray[basic] = delta
                return LpResult(SolveStatus.UNBOUNDED, None, -np.inf, self.iterations, ray=ray[: engine.n])

            ties = np.flatnonzero(ratios <= theta + 1e-12 * max(1.0, theta))
            if bland:
                r = int(ties[np.argmin(basic[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])

            leaving = basic[r]
            self.x[basic] += theta * delta
            self.x[q] += sigma * theta
            if to_upper[r]:
                self.x[leaving], s[leaving] = self.upper[leaving], AT_UPPER
            else:
                self.x[leaving], s[leaving] = self.lower[leaving], AT_LOWER
            basic[r] = q
            s[q] = BASIC
            self.iterations += 1
            self.dirty = True
            if self.factor.update(r, alpha):
                self._refactor()

    def _ratio_test(self, delta, xb, lb, ub, below, above, threshold):
        """Step lengths at which each basic variable reaches a bound.

        Feasible basics must stay feasible. An infeasible basic blocks only
        when it reaches its violated bound; moving further away is free.
        """
        falling = delta < -threshold
        rising = delta > threshold
        fall_target = np.where(above, ub, np.where(below, -np.inf, lb))
        rise_target = np.where(below, lb, np.where(above, np.inf, ub))
        ratios = np.full(len(delta), np.inf)
        with np.errstate(invalid="ignore", over="ignore"):
            ratios[falling] = (xb[falling] - fall_target[falling]) / -delta[falling]
            ratios[rising] = (rise_target[rising] - xb[rising]) / delta[rising]
        ratios = np.where(np.isnan(ratios), np.inf, np.maximum(ratios, 0.0))
        to_upper = np.where(falling, above, ~below)
        return ratios, to_upper

    def _optimal(self):
        values = self.x[: self.engine.n].copy()
        return LpResult(
            SolveStatus.OPTIMAL,
            values,
            float(self.engine.model.cost @ values),
            self.iterations,
            basis=BasisState(self.basic.copy(), self.status.copy()),
        )


def solve_lp(model, tolerances=None):
    """Solve the continuous relaxation of ``model``; binaries are treated as [0, 1]."""
    model.check()
    result = LpEngine(model, tolerances).solve()
    logger.debug(f"LP {model.name}: {result.status} after {result.iterations} iterations, objective {result.objective}")
    return result.to_solution()
