"""Exception hierarchy shared by all varfrac modules.

The CLI maps these onto exit codes: configuration problems exit with 1,
numerical/geometry failures with 2, and acceptance or oracle disagreements
with 3.
"""


class VarfracError(Exception):
    """Base class for all package errors."""


class ConfigurationError(VarfracError):
    """Bad or inconsistent user input (config files, parameters, grids)."""


class GeometryError(VarfracError):
    """Geometric computation failed (ray casting, degenerate polygons)."""


class AssemblyError(VarfracError):
    """Operator assembly rejected, e.g. coefficient bound violation."""


class NumericalError(VarfracError):
    """Linear algebra failure: non-convergence, residual above tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SpectralError(NumericalError):
    """Eigenvalue iteration failed; carries the iteration trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class SpectralShiftError(NumericalError):
    """Shift lambda at or above the principal eigenvalue was requested."""


class BarrierFailureError(NumericalError):
    """No exponent on the dyadic search grid yields a nonnegative margin."""

    def __init__(self, message, worst_node=None, worst_margin=None):
        super().__init__(message)
        self.worst_node = worst_node
        self.worst_margin = worst_margin


class OracleMismatchError(VarfracError):
    """Primary computation disagrees with its independent oracle."""


class AcceptanceError(VarfracError):
    """One or more acceptance criteria failed."""
