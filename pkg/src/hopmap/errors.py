"""Exception types shared across the package, mapped to CLI exit codes."""


class HopmapError(Exception):
    """Base class for all hopmap errors."""

    exit_code = 1


class IngestError(HopmapError):
    """Malformed or invalid input data (parse/validation failures)."""

    exit_code = 2


class QueryError(HopmapError):
    """A text/semantic query could not be resolved against the map."""

    exit_code = 3


class PlanningError(HopmapError):
    """Plan generation failed (missing nodes, unreachable target)."""

    exit_code = 4
