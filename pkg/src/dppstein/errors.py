"""Exception hierarchy.

Everything deriving from :class:`DomainError` is a violated mathematical
condition (invalid kernel, infeasible configuration) and maps to exit code 1
in the command-line front end.
"""


class DomainError(Exception):
    pass


class InvalidKernelError(DomainError):
    pass


class TruncationError(DomainError):
    pass


class EmptyInteriorError(DomainError):
    pass


class ConfigError(ValueError):
    """Malformed configuration (unknown or missing keys, wrong types)."""


class SamplingError(RuntimeError):
    """Internal numerical failure inside the sampler."""
