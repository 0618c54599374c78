"""Exception types shared by the solvers and the command line."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class SolverError(RuntimeError):
    """A forward solve failed (budget, conditioning or convergence)."""


class CoverageError(LookupError):
    """A dictionary lookup fell outside the stored data."""


class LocalizationError(RuntimeError):
    """The localization indicator carried no usable peak."""
