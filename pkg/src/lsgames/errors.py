"""Exception hierarchy.  Each class carries the CLI exit code it maps to."""


class LsgError(Exception):
    exit_code = 5


class MalformedInput(LsgError, ValueError):
    exit_code = 2


class PreconditionError(LsgError, ValueError):
    exit_code = 3


class ResourceLimit(LsgError, RuntimeError):
    exit_code = 4


class AnalysisFailure(LsgError, RuntimeError):
    exit_code = 5
