"""Exception hierarchy shared by all chainshell modules."""


class ChainshellError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(ChainshellError):
    """An input value violates a documented precondition."""


class InfeasibleError(ChainshellError):
    """A requested target cannot be reached for the given geometry."""


class EnvelopeError(ChainshellError):
    """An (amplitude, frequency) pair lies outside the feasibility envelope."""


class GeometryError(ChainshellError):
    """A mesh or surface fails a structural-geometry requirement."""


class MechanismError(ChainshellError):
    """The structural system is under-constrained (singular stiffness).

    Carries the list of suspect degrees of freedom as ``dofs``:
    tuples of (node index, dof name).
    """

    def __init__(self, message, dofs=None):
        super().__init__(message)
        self.dofs = list(dofs) if dofs else []


class ConfigError(ChainshellError):
    """A pipeline configuration value failed validation."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class StageError(ChainshellError):
    """A pipeline stage failed; names the stage and the cause."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
