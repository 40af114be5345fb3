import logging
import time
from dataclasses import dataclass
from itertools import count

import numpy as np

from .model import Solution, SolveStatus, SolverLimits, max_violation
from .simplex import LpEngine

logger = logging.getLogger(__name__)


@dataclass
class _Node:
    bound: float
    lower: np.ndarray
    upper: np.ndarray
    basis: object
    seq: int


class _Search:
    def __init__(self, model, limits):
        self.model = model
        self.limits = limits
        self.tol = limits.tolerances
        self.engine = LpEngine(model, self.tol)
        self.binaries = model.binaries
        self.incumbent = None
        self.incumbent_objective = np.inf
        self.pruned_bound = np.inf
        self.nodes = 0
        self.iterations = 0
        self.open = []
        self.seq = count()

    def cutoff(self):
        if self.incumbent is None:
            return np.inf
        return self.incumbent_objective - self.limits.rel_gap * max(1.0, abs(self.incumbent_objective))

    def solve_node(self, lower, upper, warm):
        result = self.engine.solve(lower, upper, warm)
        self.nodes += 1
        self.iterations += result.iterations
        return result

    def process(self, result, lower, upper):
        if result.status != SolveStatus.OPTIMAL:
            return
        if result.objective >= self.cutoff():
            self.pruned_bound = min(self.pruned_bound, result.objective)
            return
        values = result.values
        fractional = np.abs(values[self.binaries] - np.round(values[self.binaries]))
        if fractional.max() <= self.tol.integrality:
            self.accept(result, lower, upper)
            return

        pick = int(np.argmax(fractional))
        j = int(self.binaries[pick])
        down_upper = upper.copy()
        down_upper[j] = 0.0
        up_lower = lower.copy()
        up_lower[j] = 1.0
        # pushed last so the up-branch is explored first
        self.open.append(_Node(result.objective, lower, down_upper, result.basis, next(self.seq)))
        self.open.append(_Node(result.objective, up_lower, upper, result.basis, next(self.seq)))

    def accept(self, result, lower, upper):
        values = result.values
        objective = result.objective
        rounded = np.round(values[self.binaries])
        if np.any(values[self.binaries] != rounded):
            fixed_lower, fixed_upper = lower.copy(), upper.copy()
            fixed_lower[self.binaries] = rounded
            fixed_upper[self.binaries] = rounded
            polished = self.engine.solve(fixed_lower, fixed_upper, result.basis)
            self.iterations += polished.iterations
            if polished.status == SolveStatus.OPTIMAL:
                values, objective = polished.values.copy(), polished.objective
                values[self.binaries] = rounded
            else:
                values = values.copy()
                values[self.binaries] = rounded
                if max_violation(self.model, values) > self.tol.feasibility:
                    logger.debug(f"Rounded candidate at node {self.nodes} rejected")
                    return
                objective = self.model.evaluate(values)
        if objective < self.incumbent_objective:
            self.incumbent, self.incumbent_objective = values, objective
            logger.debug(f"New incumbent {objective:.9g} at node {self.nodes}")

    def limit_reached(self, started):
        if self.nodes >= self.limits.max_nodes:
            return True
        return self.limits.time_limit is not None and time.monotonic() - started >= self.limits.time_limit

    def run(self):
        started = time.monotonic()
        lower, upper = self.model.lower.copy(), self.model.upper.copy()
        root = self.solve_node(lower, upper, None)
        if root.status == SolveStatus.INFEASIBLE:
            return self.finish(SolveStatus.INFEASIBLE, np.inf, farkas=root.farkas)
        if root.status == SolveStatus.UNBOUNDED:
            return self.finish(SolveStatus.UNBOUNDED, -np.inf, ray=root.ray)
        if self.binaries.size == 0:
            self.incumbent, self.incumbent_objective = root.values, root.objective
            return self.finish(SolveStatus.OPTIMAL, root.objective)

        self.process(root, lower, upper)
        limit_hit = False
        popped = 0
        while self.open:
            if self.limit_reached(started):
                limit_hit = True
                break
            if popped % self.limits.resort_every == 0 and popped:
                self.open.sort(key=lambda node: (-node.bound, node.seq))
                logger.debug(f"{self.nodes} nodes, {len(self.open)} open, incumbent {self.incumbent_objective:.9g}")
            node = self.open.pop()
            popped += 1
            if node.bound >= self.cutoff():
                self.pruned_bound = min(self.pruned_bound, node.bound)
                continue
            self.process(self.solve_node(node.lower, node.upper, node.basis), node.lower, node.upper)

        bound = min([self.incumbent_objective, self.pruned_bound] + [node.bound for node in self.open])
        if self.incumbent is None:
            if limit_hit:
                return self.finish(SolveStatus.GAP_LIMIT, bound)
            return self.finish(SolveStatus.INFEASIBLE, np.inf)
        gap = self.gap(bound)
        status = SolveStatus.OPTIMAL if gap <= self.limits.rel_gap else SolveStatus.GAP_LIMIT
        if status == SolveStatus.GAP_LIMIT:
            logger.warning(f"Model {self.model.name}: limit reached with gap {gap:.3g} after {self.nodes} nodes")
        return self.finish(status, bound)

    def gap(self, bound):
        if self.incumbent is None:
            return np.inf
        return max(0.0, (self.incumbent_objective - bound) / max(1.0, abs(self.incumbent_objective)))

    def finish(self, status, bound, ray=None, farkas=None):
        return Solution(
            status=status,
            values=self.incumbent,
            objective=self.incumbent_objective if self.incumbent is not None else (bound if status == SolveStatus.UNBOUNDED else np.inf),
            bound=bound,
            gap=self.gap(bound),
            nodes=self.nodes,
            iterations=self.iterations,
            ray=ray,
            farkas=farkas,
        )


def solve_milp(model, limits=None):
    """Depth-first branch-and-bound over the binaries of ``model``.

    Branches on the most fractional binary (lowest index on ties) and
    re-sorts the open list by bound every ``limits.resort_every`` nodes.
    A run stopped by ``max_nodes`` or ``time_limit`` returns
    ``GAP_LIMIT`` with the incumbent, if any, and the best bound.
    """
    model.check()
    limits = limits or SolverLimits.from_settings()
    solution = _Search(model, limits).run()
    logger.info(f"Solved {model.name}: {solution.status}, objective {solution.objective:.9g}, {solution.nodes} nodes")
    return solution
