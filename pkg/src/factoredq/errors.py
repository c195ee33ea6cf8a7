"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument fails a structural precondition (shape, range, finiteness)."""


class ConfigurationError(ValueError):
    """A requested setup is infeasible (e.g. factor size incompatible with n)."""


class TrainingDivergenceError(RuntimeError):
    """Training produced non-finite gradients or parameters."""
