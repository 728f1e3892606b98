"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so solvers and samplers should
raise the most specific type that applies.
"""


class SchemaError(ValueError):
    """A config or argument payload is malformed (unknown key, bad type)."""


class NumericalError(RuntimeError):
    """A numerical routine failed to meet its contract (non-convergence, ...)."""


class InfeasibleError(NumericalError):
    """An interpolation constraint system has no solution."""
