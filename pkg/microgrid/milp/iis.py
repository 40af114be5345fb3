import logging
from dataclasses import replace

import numpy as np

from .branch_and_bound import solve_milp
from .model import SolveStatus
from .simplex import LpEngine

logger = logging.getLogger(__name__)


def _subsystem(model, rows):
    return replace(model, constraints=tuple(model.constraints[i] for i in rows), objective=())


def irreducible_rows(model, limits=None):
    """Names of an irreducible infeasible subset of the rows of ``model``.

    Deletion filter: a row is dropped when the remaining rows stay
    infeasible. When the continuous relaxation is already infeasible the
    filter runs on LPs seeded with the rows carrying a nonzero Farkas
    multiplier; otherwise every row is a candidate and each test is a MILP.
    Variable bounds always stay in place. Returns an empty list for a
    feasible model.
    """
    relaxed = LpEngine(model.relaxed()).solve()
    if relaxed.status == SolveStatus.INFEASIBLE:
        support = np.flatnonzero(np.abs(relaxed.farkas) > 1e-9).tolist()

        def infeasible(rows):
            return LpEngine(_subsystem(model.relaxed(), rows)).solve().status == SolveStatus.INFEASIBLE

        candidates = support if support and infeasible(support) else list(range(model.n_rows))
    else:

        def infeasible(rows):
            return solve_milp(_subsystem(model, rows), limits).status == SolveStatus.INFEASIBLE

        candidates = list(range(model.n_rows))
        if not infeasible(candidates):
            return []

    keep = list(candidates)
    for row in candidates:
        trial = [i for i in keep if i != row]
        if infeasible(trial):
            keep = trial
    names = [model.constraints[i].name for i in keep]
    logger.info(f"Irreducible infeasible rows of {model.name}: {', '.join(names) or '(variable bounds only)'}")
    return names
