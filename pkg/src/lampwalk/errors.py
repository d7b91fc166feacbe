"""Exception types shared across the package."""


class LampwalkError(Exception):
    """Base class for all package errors."""


class ValidationError(LampwalkError):
    """An input object violates a documented invariant."""


class EvaluationError(LampwalkError):
    """A growth function evaluation produced a non-finite or invalid value."""


class DepthError(LampwalkError):
    """An operation probed beyond the materialized depth of a tree/network."""


class SolverError(LampwalkError):
    """A linear solve failed to reach the requested residual tolerance."""


class ConfigError(LampwalkError):
    """A CLI/experiment configuration is malformed or inconsistent."""
