"""Exception hierarchy.

Every error raised by this package derives from ArbBandsError so callers can
catch the whole family.  The CLI maps the subclasses onto process exit codes
(see cli.EXIT_CODES); library users get ordinary exceptions.
"""


class ArbBandsError(Exception):
    """Base class for all package errors."""


class ConfigError(ArbBandsError, ValueError):
    """Malformed or inconsistent run configuration (unknown keys, bad types,
    grids that cannot be tiled, sampling steps too coarse to resolve the
    noise correlation time)."""


class ParameterError(ArbBandsError, ValueError):
    """Parameter values outside the mathematical domain (non-positive spot,
    volatility, time fraction outside [0, 1], coincident kernel times)."""


class SolverError(ArbBandsError, RuntimeError):
    """Finite-difference solver failure: explicit-scheme stability bound
    violated, or non-finite values produced during the march."""


class AccuracyError(ArbBandsError, RuntimeError):
    """A numerical accuracy gate was breached: quadrature node-doubling did
    not converge, or a cross-validation check exceeded its tolerance."""


class NoRootError(ArbBandsError, RuntimeError):
    """Implied-volatility target has no root inside the search bracket."""
