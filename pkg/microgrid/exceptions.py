from .milp.exceptions import MilpError


class InfeasibleModel(MilpError):
    """A model has no feasible point; ``rows`` names the conflicting rows."""

    def __init__(self, rows, subject=None, detail=None):
        self.rows = list(rows)
        self.subject = subject
        message = f"{subject} is infeasible" if subject else "Model is infeasible"
        if detail:
            message += f" ({detail})"
        if self.rows:
            message += f"; conflicting rows: {', '.join(self.rows)}"
        super().__init__(message)


class UnboundedModel(MilpError):
    pass


class SolverLimitReached(MilpError):
    def __init__(self, message, solution=None):
        self.solution = solution
        super().__init__(message)


class PipelineError(Exception):
    """Stage 1 failed for one prosumer, so stage 2 never ran."""

    def __init__(self, prosumer_id, cause):
        self.prosumer_id = prosumer_id
        self.cause = cause
        super().__init__(f"Prosumer {prosumer_id}: {cause}")


class ScenarioFileError(Exception):
    """A scenario document or one of its CSV sidecars cannot be loaded.

    ``errors`` maps JSON-pointer paths (or ``file:line``) to messages.
    """

    def __init__(self, errors, path=None):
        self.errors = dict(errors)
        self.path = path
        details = "; ".join(f"{where}: {message}" for where, message in self.errors.items())
        super().__init__(f"{path}: {details}" if path else details)


class ExportError(Exception):
    def __init__(self, path, cause):
        self.path = path
        self.cause = cause
        super().__init__(f"Cannot write results to {path}: {cause}")
