"""Exception hierarchy shared by every coverops module."""


class CoverOpsError(Exception):
    """Base class for all coverops errors."""


class GraphError(CoverOpsError, ValueError):
    """Malformed graph, invalid dimensions or a bad vertex query."""


class NoPathError(CoverOpsError):
    """No path exists inside the requested vertex subset."""


class LikelihoodError(CoverOpsError, ValueError):
    """Malformed likelihood schedule or out-of-domain query."""


class InitializationError(CoverOpsError):
    """Generators do not produce a valid initial partition."""


class InvariantViolation(CoverOpsError):
    """A guaranteed property of the update scheme failed to hold.

    ``clause`` names the guarantee that broke (for example
    ``"set-properties.1"`` or ``"set-membership.3"``), so a failing run can
    be traced back to the property without re-running it.
    """

    def __init__(self, clause, message):
        super().__init__(f"[{clause}] {message}")
        self.clause = clause
        self.detail = message


class PlannerContractViolation(InvariantViolation):
    """A planner asked an agent to leave its region or enter a prohibited vertex."""

    def __init__(self, message):
        super().__init__("agent-motion", message)


class ScheduleError(CoverOpsError, ValueError):
    """Communication bounds cannot be met by any schedule."""


class ConfigError(CoverOpsError, ValueError):
    """Invalid run configuration."""


class SizeLimitError(CoverOpsError, ValueError):
    """Instance too large for an exhaustive check."""
