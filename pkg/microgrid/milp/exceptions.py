class MilpError(Exception):
    """Base class of every engine failure."""


class ModelError(MilpError):
    """A ``MilpModel`` breaks one of its structural invariants."""


class NumericalBreakdown(MilpError):
    pass


class MpsNameError(MilpError):
    pass


class MpsFormatError(MilpError):
    def __init__(self, message, line=None, section=None):
        self.line = line
        self.section = section
        where = []
        if line is not None:
            where.append(f"line {line}")
        if section:
            where.append(f"section {section}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{message}")
